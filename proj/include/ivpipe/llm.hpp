#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "ivpipe/errors.hpp"
#include "ivpipe/jsonio.hpp"
#include "ivpipe/log.hpp"
#include "ivpipe/prompt.hpp"
#include "ivpipe/schema.hpp"
#include "ivpipe/text.hpp"

namespace ivpipe::llm {

// Retryable failure (connection refused, HTTP 5xx). Anything else a provider
// throws is final.
class TransientProviderError : public ProviderError {
 public:
  explicit TransientProviderError(const std::string& msg) : ProviderError(msg) {}
};

struct DecodeParams {
  double temperature = 0.0;
  double top_p = 1.0;
  double repetition_penalty = 1.0;
  std::uint64_t seed = 12345;
  bool json_mode = true;

  // Greedy profile for reproducible runs.
  static DecodeParams deterministic() { return {0.0, 1.0, 1.0, 12345, true}; }
  // Sampling profile for chat models without a JSON mode.
  static DecodeParams llama() { return {0.3, 0.9, 1.0, 12345, false}; }

  Json to_json() const {
    Json j;
    j["temperature"] = temperature;
    j["top_p"] = top_p;
    j["repetition_penalty"] = repetition_penalty;
    j["seed"] = seed;
    j["json_mode"] = json_mode;
    return j;
  }
};

struct CompletionRequest {
  std::string tag;  // joins the response back to its variable, e.g. "iv-01/var_a"
  prompt::PromptPayload payload;
  DecodeParams params;
};

class LlmProvider {
 public:
  virtual ~LlmProvider() = default;
  // Transport only; retry policy lives in complete().
  virtual std::string complete_raw(const CompletionRequest& req) = 0;
  virtual std::string id() const = 0;
};

struct RetryPolicy {
  int attempts = 3;
  int backoff_ms = 50;  // doubles after every transient failure
};

// Budget guard, transient-failure retries with exponential backoff, and a
// log line per request keyed by the request tag.
inline std::string complete(const CompletionRequest& req, LlmProvider& provider,
                            std::size_t context_budget = 0, const RetryPolicy& retry = {}) {
  if (context_budget != 0 && req.payload.total_chars() > context_budget)
    throw ContextOverflow(req.tag + ": payload of " + std::to_string(req.payload.total_chars()) +
                          " chars exceeds the budget of " + std::to_string(context_budget));
  std::chrono::milliseconds delay{retry.backoff_ms};
  for (int attempt = 1;; ++attempt) {
    try {
      std::string out = provider.complete_raw(req);
      log::info("llm_complete",
                {{"tag", req.tag}, {"attempts", attempt}, {"response_chars", out.size()}});
      return out;
    } catch (const TransientProviderError& e) {
      if (attempt >= retry.attempts)
        throw ProviderError(req.tag + ": " + e.what() + " (gave up after " +
                            std::to_string(attempt) + " attempts)");
      log::warn("llm_retry", {{"tag", req.tag}, {"attempt", attempt}, {"error", e.what()}});
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
}

// ---------------------------------------------------------------------------
// Deterministic mock: canned responses by request tag, optional injected
// transient failures, and a call log for asserting how often (and for what)
// the pipeline actually hit the provider.
// ---------------------------------------------------------------------------
class MockLlmProvider final : public LlmProvider {
 public:
  MockLlmProvider() = default;
  explicit MockLlmProvider(std::map<std::string, std::string> canned)
      : canned_(std::move(canned)) {}

  // File format: {"tag": response}; string responses are taken as-is, any
  // other value is serialized as the response body.
  static std::map<std::string, std::string> load_canned(const std::string& path) {
    const Json doc = jsonio::load_file(path);
    if (!doc.is_object()) throw SchemaError(path + ": expected an object keyed by request tag");
    std::map<std::string, std::string> canned;
    for (auto it = doc.begin(); it != doc.end(); ++it)
      canned[it.key()] =
          it.value().is_string() ? it.value().get<std::string>() : it.value().dump();
    return canned;
  }

  void add(const std::string& tag, const std::string& response) {
    std::lock_guard<std::mutex> lock(mu_);
    canned_[tag] = response;
  }

  void set_default(const std::string& response) {
    std::lock_guard<std::mutex> lock(mu_);
    default_ = response;
  }

  void fail_next(int n) {
    std::lock_guard<std::mutex> lock(mu_);
    failures_left_ = n;
  }

  std::string complete_raw(const CompletionRequest& req) override {
    std::lock_guard<std::mutex> lock(mu_);
    called_tags_.push_back(req.tag);
    if (failures_left_ > 0) {
      --failures_left_;
      throw TransientProviderError("injected failure");
    }
    auto it = canned_.find(req.tag);
    return it != canned_.end() ? it->second : default_;
  }

  std::string id() const override { return "mock"; }

  std::size_t calls() const {
    std::lock_guard<std::mutex> lock(mu_);
    return called_tags_.size();
  }

  std::vector<std::string> called_tags() const {
    std::lock_guard<std::mutex> lock(mu_);
    return called_tags_;
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::string> canned_;
  std::string default_ = "{\"reason\": \"no canned response\", \"answer\": null}";
  int failures_left_ = 0;
  std::vector<std::string> called_tags_;
};

// ---------------------------------------------------------------------------
// Token bucket limiting request starts per minute. acquire() blocks.
// ---------------------------------------------------------------------------
class RateLimiter {
 public:
  RateLimiter(double per_minute, double burst)
      : rate_per_ms_(per_minute / 60000.0), capacity_(burst), tokens_(burst),
        last_(std::chrono::steady_clock::now()) {
    if (per_minute <= 0 || burst <= 0) throw ConfigError("rate limit must be positive");
  }

  void acquire() {
    while (true) {
      std::chrono::milliseconds wait{0};
      {
        std::lock_guard<std::mutex> lock(mu_);
        refill();
        if (tokens_ >= 1.0) {
          tokens_ -= 1.0;
          return;
        }
        wait = std::chrono::milliseconds(
            static_cast<std::int64_t>((1.0 - tokens_) / rate_per_ms_) + 1);
      }
      std::this_thread::sleep_for(wait);
    }
  }

 private:
  void refill() {
    const auto now = std::chrono::steady_clock::now();
    const double elapsed_ms =
        std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(now - last_).count();
    last_ = now;
    tokens_ = std::min(capacity_, tokens_ + elapsed_ms * rate_per_ms_);
  }

  std::mutex mu_;
  double rate_per_ms_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
};

// Decorator gating every request start through a token bucket.
class ThrottledProvider final : public LlmProvider {
 public:
  ThrottledProvider(LlmProvider& inner, double per_minute, double burst)
      : inner_(inner), limiter_(per_minute, burst) {}

  std::string complete_raw(const CompletionRequest& req) override {
    limiter_.acquire();
    return inner_.complete_raw(req);
  }

  std::string id() const override { return inner_.id(); }

 private:
  LlmProvider& inner_;
  RateLimiter limiter_;
};

// ---------------------------------------------------------------------------
// Answer parsing
// ---------------------------------------------------------------------------

enum class AnswerClass { answered, abstained, format_error, invalid };

inline std::string to_string(AnswerClass c) {
  switch (c) {
    case AnswerClass::answered: return "answered";
    case AnswerClass::abstained: return "abstained";
    case AnswerClass::format_error: return "format_error";
    case AnswerClass::invalid: return "invalid";
  }
  return "?";
}

struct ParsedAnswer {
  AnswerClass cls = AnswerClass::format_error;
  std::string reason;
  schema::Value value;  // meaningful only when cls == answered
  std::string raw;
  std::string error;  // detail for format_error / invalid
};

namespace detail {

// First balanced {...} substring, quote- and escape-aware. Empty when none.
inline std::string first_balanced_object(const std::string& s) {
  const std::size_t start = s.find('{');
  if (start == std::string::npos) return {};
  int depth = 0;
  bool in_string = false, escaped = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped)
        escaped = false;
      else if (c == '\\')
        escaped = true;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"')
      in_string = true;
    else if (c == '{')
      ++depth;
    else if (c == '}' && --depth == 0)
      return s.substr(start, i - start + 1);
  }
  return {};
}

inline std::string lower_trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out = s.substr(b, e - b);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline bool is_abstention_word(const std::string& s) {
  const std::string w = lower_trim(s);
  return w == "na" || w == "n/a" || w == "none" || w == "null";
}

inline bool parse_integer(const std::string& s, std::int64_t& out) {
  const std::string w = lower_trim(s);
  if (w.empty()) return false;
  std::size_t i = w[0] == '-' || w[0] == '+' ? 1 : 0;
  if (i == w.size()) return false;
  for (std::size_t k = i; k < w.size(); ++k)
    if (!std::isdigit(static_cast<unsigned char>(w[k]))) return false;
  try {
    out = std::stoll(w);
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

inline bool parse_number(const std::string& s, double& out) {
  const std::string w = lower_trim(s);
  if (w.empty()) return false;
  try {
    std::size_t used = 0;
    out = std::stod(w, &used);
    return used == w.size();
  } catch (const std::exception&) {
    return false;
  }
}

inline bool code_listed(const schema::CodeLabels& codes, std::int64_t v) {
  for (const auto& [code, label] : codes) {
    (void)label;
    if (code == v) return true;
  }
  return false;
}

// Integer extraction from a JSON answer value: integers directly, integral
// floats, or digit strings.
inline bool answer_as_int(const Json& a, std::int64_t& out) {
  if (a.is_number_integer()) {
    out = a.get<std::int64_t>();
    return true;
  }
  if (a.is_number_float()) {
    const double d = a.get<double>();
    if (d == static_cast<double>(static_cast<std::int64_t>(d))) {
      out = static_cast<std::int64_t>(d);
      return true;
    }
    return false;
  }
  if (a.is_string()) return parse_integer(a.get<std::string>(), out);
  return false;
}

}  // namespace detail

// Classifies arbitrary provider output against a variable. Never throws on
// any input string: the result is always one of answered / abstained /
// format_error / invalid.
inline ParsedAnswer parse_answer(const std::string& raw, const schema::VariableSpec& var) {
  if (var.var_type == schema::VarType::rule)
    throw SchemaError("rule variable " + var.var_id + " is computed, not parsed");

  ParsedAnswer out;
  out.raw = raw;

  Json doc;
  bool parsed = false;
  // nlohmann signals malformed input as parse_error but numeric overflow
  // (e.g. 1e309) as out_of_range, so catch the common base.
  try {
    doc = Json::parse(raw);
    parsed = doc.is_object();
  } catch (const nlohmann::json::exception&) {
    parsed = false;
  }
  if (!parsed) {
    const std::string sub = detail::first_balanced_object(raw);
    if (!sub.empty()) {
      try {
        doc = Json::parse(sub);
        parsed = doc.is_object();
      } catch (const nlohmann::json::exception&) {
        parsed = false;
      }
    }
  }
  if (!parsed) {
    out.cls = AnswerClass::format_error;
    out.error = "no JSON object found";
    return out;
  }

  if (doc.contains("reason") && doc.at("reason").is_string())
    out.reason = doc.at("reason").get<std::string>();

  if (!doc.contains("answer")) {
    out.cls = AnswerClass::format_error;
    out.error = "object has no \"answer\" key";
    return out;
  }
  const Json& a = doc.at("answer");

  if (a.is_null() || (a.is_string() && detail::is_abstention_word(a.get<std::string>()))) {
    out.cls = AnswerClass::abstained;
    return out;
  }

  auto invalid = [&](const std::string& why) {
    out.cls = AnswerClass::invalid;
    out.error = why;
    return out;
  };

  switch (var.var_type) {
    case schema::VarType::scale: {
      std::int64_t v = 0;
      if (!detail::answer_as_int(a, v)) return invalid("scale answer is not an integer");
      if (!detail::code_listed(var.prompt_fields.range, v))
        return invalid("scale answer " + std::to_string(v) + " outside the declared range");
      out.cls = AnswerClass::answered;
      out.value = schema::Value{v};
      return out;
    }
    case schema::VarType::category: {
      if (a.is_string()) {
        const std::string want = text::normalize(a.get<std::string>());
        for (const auto& [code, label] : var.prompt_fields.labels)
          if (text::normalize(label) == want) {
            out.cls = AnswerClass::answered;
            out.value = schema::Value{code};
            return out;
          }
      }
      std::int64_t v = 0;
      if (detail::answer_as_int(a, v) && detail::code_listed(var.prompt_fields.labels, v)) {
        out.cls = AnswerClass::answered;
        out.value = schema::Value{v};
        return out;
      }
      return invalid("category answer matches no label or code");
    }
    case schema::VarType::measure: {
      if (a.is_number_integer()) {
        out.cls = AnswerClass::answered;
        out.value = schema::Value{a.get<std::int64_t>()};
        return out;
      }
      if (a.is_number_float()) {
        out.cls = AnswerClass::answered;
        out.value = schema::Value{a.get<double>()};
        return out;
      }
      if (a.is_string()) {
        std::int64_t i = 0;
        if (detail::parse_integer(a.get<std::string>(), i)) {
          out.cls = AnswerClass::answered;
          out.value = schema::Value{i};
          return out;
        }
        double d = 0.0;
        if (detail::parse_number(a.get<std::string>(), d)) {
          out.cls = AnswerClass::answered;
          out.value = schema::Value{d};
          return out;
        }
      }
      return invalid("measure answer is not numeric");
    }
    case schema::VarType::notes: {
      if (a.is_boolean()) {
        out.cls = AnswerClass::answered;
        out.value = schema::Value{std::string(a.get<bool>() ? "yes" : "no")};
        return out;
      }
      if (a.is_string()) {
        const std::string w = detail::lower_trim(a.get<std::string>());
        if (w == "yes" || w == "no" || w == "true" || w == "false") {
          out.cls = AnswerClass::answered;
          out.value = schema::Value{std::string(w == "yes" || w == "true" ? "yes" : "no")};
          return out;
        }
      }
      return invalid("slot answer is not yes/no");
    }
    case schema::VarType::rule:
      break;  // unreachable, guarded above
  }
  return invalid("unsupported variable type");
}

}  // namespace ivpipe::llm
