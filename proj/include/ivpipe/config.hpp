#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ivpipe/errors.hpp"
#include "ivpipe/jsonio.hpp"
#include "ivpipe/llm.hpp"
#include "ivpipe/metrics.hpp"
#include "ivpipe/prompt.hpp"
#include "ivpipe/segment.hpp"

namespace ivpipe::config {

// One structured file drives a whole run; API keys come from the environment
// (LLM_API_KEY, EMBED_API_KEY), never from this file.
struct RunConfig {
  // paths
  std::string schema_path;
  std::string transcripts_dir;
  std::string gold_path;         // optional
  std::string out_dir = "out";
  std::string exemplars_path;    // optional, enables few-shot settings
  std::string mock_answers_path; // optional, canned responses for provider "mock"

  // providers
  std::string embedding_provider = "local-hash";  // local-hash | http
  std::size_t embedding_dim = 4096;
  std::string embedding_endpoint;
  std::string llm_provider = "mock";  // mock | http
  std::string llm_endpoint;
  std::string decode_preset = "deterministic";  // deterministic | llama
  std::size_t parallelism = 1;
  double rate_per_minute = 0.0;  // 0 = unlimited
  double rate_burst = 10.0;
  int retry_attempts = 3;
  int retry_backoff_ms = 50;

  // pipeline knobs
  segment::SegmentConfig segment;
  prompt::ShotSetting setting = prompt::ShotSetting::zero;
  metrics::MetricsConfig metrics;
  std::uint64_t seed = 12345;
  std::size_t context_budget = 0;
  std::size_t history_budget = 0;

  llm::DecodeParams decode() const {
    llm::DecodeParams p = decode_preset == "llama" ? llm::DecodeParams::llama()
                                                   : llm::DecodeParams::deterministic();
    p.seed = seed;
    return p;
  }
};

namespace detail {

inline double threshold(const Json& j, const char* key, double fallback,
                        const std::string& where) {
  if (!j.contains(key)) return fallback;
  const double v = j.at(key).get<double>();
  if (v < 0.0 || v > 1.0) throw ConfigError(where + ": " + key + " must be in [0, 1]");
  return v;
}

inline void need_path(const std::string& path, const char* what) {
  if (!std::filesystem::exists(path))
    throw ConfigError(std::string(what) + " path does not exist: " + path);
}

}  // namespace detail

inline RunConfig run_config_from_json(const Json& j, const std::string& where) {
  RunConfig c;
  if (j.contains("paths")) {
    const Json& p = j.at("paths");
    if (p.contains("schema")) c.schema_path = p.at("schema").get<std::string>();
    if (p.contains("transcripts_dir")) c.transcripts_dir = p.at("transcripts_dir").get<std::string>();
    if (p.contains("gold")) c.gold_path = p.at("gold").get<std::string>();
    if (p.contains("out_dir")) c.out_dir = p.at("out_dir").get<std::string>();
    if (p.contains("exemplars")) c.exemplars_path = p.at("exemplars").get<std::string>();
    if (p.contains("mock_answers")) c.mock_answers_path = p.at("mock_answers").get<std::string>();
  }
  if (j.contains("providers")) {
    const Json& p = j.at("providers");
    if (p.contains("embedding")) c.embedding_provider = p.at("embedding").get<std::string>();
    if (p.contains("embedding_dim")) c.embedding_dim = p.at("embedding_dim").get<std::size_t>();
    if (p.contains("embedding_endpoint"))
      c.embedding_endpoint = p.at("embedding_endpoint").get<std::string>();
    if (p.contains("llm")) c.llm_provider = p.at("llm").get<std::string>();
    if (p.contains("llm_endpoint")) c.llm_endpoint = p.at("llm_endpoint").get<std::string>();
    if (p.contains("decode_preset")) c.decode_preset = p.at("decode_preset").get<std::string>();
    if (p.contains("parallelism")) c.parallelism = p.at("parallelism").get<std::size_t>();
    if (p.contains("rate_per_minute")) c.rate_per_minute = p.at("rate_per_minute").get<double>();
    if (p.contains("rate_burst")) c.rate_burst = p.at("rate_burst").get<double>();
    if (p.contains("retry_attempts")) c.retry_attempts = p.at("retry_attempts").get<int>();
    if (p.contains("retry_backoff_ms")) c.retry_backoff_ms = p.at("retry_backoff_ms").get<int>();
  }
  if (j.contains("segment")) {
    const Json& s = j.at("segment");
    auto& sc = c.segment;
    sc.gate_avg = detail::threshold(s, "gate_avg", sc.gate_avg, where);
    sc.gate_strong = detail::threshold(s, "gate_strong", sc.gate_strong, where);
    sc.gate_top = detail::threshold(s, "gate_top", sc.gate_top, where);
    sc.overlap_sel = detail::threshold(s, "overlap_sel", sc.overlap_sel, where);
    sc.anchor_embed = detail::threshold(s, "anchor_embed", sc.anchor_embed, where);
    sc.anchor_lev = detail::threshold(s, "anchor_lev", sc.anchor_lev, where);
    sc.edge_min_embed = detail::threshold(s, "edge_min_embed", sc.edge_min_embed, where);
  }
  if (j.contains("setting"))
    c.setting = prompt::shot_setting_from_string(j.at("setting").get<std::string>());
  if (j.contains("metrics")) {
    const Json& m = j.at("metrics");
    if (m.contains("bias_denominator")) {
      const std::string d = m.at("bias_denominator").get<std::string>();
      if (d == "all")
        c.metrics.bias_denominator = metrics::MetricsConfig::BiasDenominator::all;
      else if (d == "nonzero")
        c.metrics.bias_denominator = metrics::MetricsConfig::BiasDenominator::nonzero;
      else
        throw ConfigError(where + ": bias_denominator must be \"all\" or \"nonzero\"");
    }
    if (m.contains("measure_tolerance")) {
      c.metrics.measure_tolerance = m.at("measure_tolerance").get<double>();
      if (c.metrics.measure_tolerance < 0)
        throw ConfigError(where + ": measure_tolerance must be non-negative");
    }
  }
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("context_budget")) c.context_budget = j.at("context_budget").get<std::size_t>();
  if (j.contains("history_budget")) c.history_budget = j.at("history_budget").get<std::size_t>();

  if (c.embedding_provider != "local-hash" && c.embedding_provider != "http")
    throw ConfigError(where + ": embedding provider must be \"local-hash\" or \"http\"");
  if (c.llm_provider != "mock" && c.llm_provider != "http")
    throw ConfigError(where + ": llm provider must be \"mock\" or \"http\"");
  if (c.embedding_provider == "http" && c.embedding_endpoint.empty())
    throw ConfigError(where + ": http embedding provider needs embedding_endpoint");
  if (c.llm_provider == "http" && c.llm_endpoint.empty())
    throw ConfigError(where + ": http llm provider needs llm_endpoint");
  if (c.decode_preset != "deterministic" && c.decode_preset != "llama")
    throw ConfigError(where + ": decode_preset must be \"deterministic\" or \"llama\"");
  if (c.parallelism == 0) throw ConfigError(where + ": parallelism must be at least 1");
  if (c.rate_per_minute < 0) throw ConfigError(where + ": rate_per_minute must be >= 0");
  return c;
}

// Loads and validates: every referenced input path must exist. The output
// directory is created later, on first write.
inline RunConfig load_run_config(const std::string& path) {
  RunConfig c = run_config_from_json(jsonio::load_file(path), path);
  if (c.schema_path.empty()) throw ConfigError(path + ": paths.schema is required");
  detail::need_path(c.schema_path, "schema");
  if (!c.transcripts_dir.empty()) detail::need_path(c.transcripts_dir, "transcripts");
  if (!c.gold_path.empty()) detail::need_path(c.gold_path, "gold");
  if (!c.exemplars_path.empty()) detail::need_path(c.exemplars_path, "exemplars");
  if (!c.mock_answers_path.empty()) detail::need_path(c.mock_answers_path, "mock answers");
  return c;
}

}  // namespace ivpipe::config
