#pragma once

#include <cstdlib>
#include <string>
#include <vector>

#include <httplib.h>

#include "ivpipe/errors.hpp"
#include "ivpipe/jsonio.hpp"
#include "ivpipe/llm.hpp"
#include "ivpipe/textsim.hpp"

namespace ivpipe::http {

namespace detail {

inline std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

// Splits "host:port/path" (scheme optional) into the base httplib wants plus
// the request path.
struct Endpoint {
  std::string base;
  std::string path;
};

inline Endpoint split_endpoint(const std::string& url) {
  std::string rest = url;
  std::string scheme = "http://";
  if (rest.rfind("http://", 0) == 0) {
    rest = rest.substr(7);
  } else if (rest.rfind("https://", 0) == 0) {
    scheme = "https://";
    rest = rest.substr(8);
  }
  const std::size_t slash = rest.find('/');
  Endpoint ep;
  ep.base = scheme + (slash == std::string::npos ? rest : rest.substr(0, slash));
  ep.path = slash == std::string::npos ? "/" : rest.substr(slash);
  return ep;
}

// POSTs a JSON body and maps transport results onto the error taxonomy:
// connect failures and HTTP 5xx are retryable, HTTP 4xx is final.
inline Json post_json(const std::string& url, const std::string& api_key, const Json& body,
                      int timeout_s) {
  const Endpoint ep = split_endpoint(url);
  httplib::Client client(ep.base);
  client.set_connection_timeout(timeout_s, 0);
  client.set_read_timeout(timeout_s, 0);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

  auto res = client.Post(ep.path, headers, body.dump(), "application/json");
  if (!res)
    throw llm::TransientProviderError(url + ": " + httplib::to_string(res.error()));
  if (res->status >= 500)
    throw llm::TransientProviderError(url + ": HTTP " + std::to_string(res->status));
  if (res->status >= 400)
    throw ProviderError(url + ": HTTP " + std::to_string(res->status) + " " + res->body);

  try {
    return Json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProviderError(url + ": response is not JSON (" + e.what() + ")");
  }
}

}  // namespace detail

// Remote embedding service: {"texts": [...]} in, {"vectors": [[...], ...]}
// out. Reads its key from EMBED_API_KEY.
class HttpEmbeddingProvider final : public textsim::EmbeddingProvider {
 public:
  HttpEmbeddingProvider(std::string endpoint, std::size_t dimension, int timeout_s = 30)
      : endpoint_(std::move(endpoint)), dim_(dimension), timeout_s_(timeout_s),
        api_key_(detail::env_or_empty("EMBED_API_KEY")) {
    if (dim_ == 0) throw ConfigError("embedding dimension must be positive");
  }

  std::vector<textsim::Vector> embed(const std::vector<std::string>& texts) override {
    if (texts.empty()) return {};
    Json body;
    body["texts"] = texts;
    const Json res = detail::post_json(endpoint_, api_key_, body, timeout_s_);
    if (!res.is_object() || !res.contains("vectors") || !res.at("vectors").is_array())
      throw ProviderError(endpoint_ + ": response lacks a \"vectors\" array");
    const Json& vecs = res.at("vectors");
    if (vecs.size() != texts.size())
      throw ProviderError(endpoint_ + ": got " + std::to_string(vecs.size()) + " vectors for " +
                          std::to_string(texts.size()) + " texts");
    std::vector<textsim::Vector> out;
    out.reserve(vecs.size());
    for (const Json& v : vecs) {
      if (!v.is_array())
        throw ProviderError(endpoint_ + ": vector entry is not an array");
      textsim::Vector vec = v.get<textsim::Vector>();
      if (vec.size() != dim_)
        throw DimensionMismatch(endpoint_ + ": vector of size " + std::to_string(vec.size()) +
                                ", expected " + std::to_string(dim_));
      out.push_back(std::move(vec));
    }
    return out;
  }

  std::size_t dimension() const override { return dim_; }
  std::string id() const override { return "http-embed:" + endpoint_; }

 private:
  std::string endpoint_;
  std::size_t dim_;
  int timeout_s_;
  std::string api_key_;
};

// Remote completion service. Request carries the system text, the chat turns
// (few-shot pairs then the live history), and decode params; the response is
// {"text": ...}. Reads its key from LLM_API_KEY.
class HttpLlmProvider final : public llm::LlmProvider {
 public:
  explicit HttpLlmProvider(std::string endpoint, int timeout_s = 120)
      : endpoint_(std::move(endpoint)), timeout_s_(timeout_s),
        api_key_(detail::env_or_empty("LLM_API_KEY")) {}

  std::string complete_raw(const llm::CompletionRequest& req) override {
    Json body;
    body["system"] = req.payload.system;
    Json messages = Json::array();
    for (const auto& shot : req.payload.shots) {
      messages.push_back({{"role", "user"}, {"content", shot.history}});
      messages.push_back({{"role", "assistant"}, {"content", shot.answer_json}});
    }
    messages.push_back({{"role", "user"}, {"content", req.payload.history}});
    body["messages"] = std::move(messages);
    body["params"] = req.params.to_json();

    const Json res = detail::post_json(endpoint_, api_key_, body, timeout_s_);
    if (!res.is_object() || !res.contains("text") || !res.at("text").is_string())
      throw ProviderError(endpoint_ + ": response lacks a \"text\" string");
    return res.at("text").get<std::string>();
  }

  std::string id() const override { return "http-llm:" + endpoint_; }

 private:
  std::string endpoint_;
  int timeout_s_;
  std::string api_key_;
};

}  // namespace ivpipe::http
