#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ivpipe/align.hpp"
#include "ivpipe/assess.hpp"
#include "ivpipe/config.hpp"
#include "ivpipe/corpus.hpp"
#include "ivpipe/http_providers.hpp"
#include "ivpipe/log.hpp"
#include "ivpipe/metrics.hpp"
#include "ivpipe/synth.hpp"

namespace fs = std::filesystem;
using namespace ivpipe;

namespace {

std::unique_ptr<textsim::EmbeddingProvider> make_embedder(const config::RunConfig& cfg) {
  std::unique_ptr<textsim::EmbeddingProvider> base;
  if (cfg.embedding_provider == "http")
    base = std::make_unique<http::HttpEmbeddingProvider>(cfg.embedding_endpoint,
                                                         cfg.embedding_dim);
  else
    base = std::make_unique<textsim::HashEmbeddingProvider>(cfg.embedding_dim);
  return std::make_unique<textsim::CachingEmbeddingProvider>(std::move(base));
}

std::unique_ptr<llm::LlmProvider> make_llm(const config::RunConfig& cfg) {
  if (cfg.llm_provider == "http") return std::make_unique<http::HttpLlmProvider>(cfg.llm_endpoint);
  if (!cfg.mock_answers_path.empty())
    return std::make_unique<llm::MockLlmProvider>(
        llm::MockLlmProvider::load_canned(cfg.mock_answers_path));
  return std::make_unique<llm::MockLlmProvider>();
}

assess::AssessSettings settings_from(const config::RunConfig& cfg) {
  assess::AssessSettings s;
  s.setting = cfg.setting;
  s.decode = cfg.decode();
  s.retry = {cfg.retry_attempts, cfg.retry_backoff_ms};
  s.segment_cfg = cfg.segment;
  if (!cfg.exemplars_path.empty()) s.exemplars = prompt::ExemplarConfig::load(cfg.exemplars_path);
  s.parallelism = cfg.parallelism;
  s.context_budget = cfg.context_budget;
  s.history_budget = cfg.history_budget;
  return s;
}

const corpus::GoldAssessment* gold_for(const std::vector<corpus::GoldAssessment>& gold,
                                       const std::string& interview_id) {
  for (const auto& g : gold)
    if (g.interview_id == interview_id) return &g;
  return nullptr;
}

std::vector<std::string> sorted_json_files(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  return files;
}

int run_align(const std::string& diarized_path, const std::string& verbatim_path,
              const std::string& out) {
  const auto diarized = corpus::parse_transcript(diarized_path);
  const auto verbatim = corpus::parse_transcript(verbatim_path);
  const auto outcome = align::merge_transcripts(diarized, verbatim);
  if (!outcome.ok) {
    log::error("align_failed", {{"error", outcome.error}});
    return 2;
  }
  if (outcome.dropped_utterances)
    log::warn("align_dropped_turns", {{"count", outcome.dropped_utterances}});
  corpus::write_transcript(out, outcome.transcript);
  log::info("align_done", {{"out", out}, {"utterances", outcome.transcript.utterances.size()}});
  return 0;
}

int run_score(const std::string& ref_path, const std::string& hyp_path,
              const std::string& metric) {
  const auto ref = corpus::parse_transcript(ref_path);
  const auto hyp = corpus::parse_transcript(hyp_path);
  const double v = metric == "wer" ? align::wer(ref, hyp) : align::tder(ref, hyp);
  std::printf("%.6f\n", v);
  return 0;
}

int run_segment(const config::RunConfig& cfg, const std::string& transcript_path,
                const std::string& schema_path, const std::string& out) {
  const auto t = corpus::parse_transcript(transcript_path);
  const auto sch = corpus::parse_question_sets(schema_path);
  auto embedder = make_embedder(cfg);
  const auto seg = segment::segment_interview(t, sch, embedder.get(), cfg.segment);
  jsonio::save_file(out, segment::segmented_to_json(seg));
  log::info("segment_done", {{"out", out}, {"interview_id", seg.interview_id}});
  return 0;
}

int run_assess(const config::RunConfig& cfg, const std::string& transcript_path,
               const std::string& schema_path, const std::string& gold_path,
               const std::string& out) {
  const auto t = corpus::parse_transcript(transcript_path);
  const auto sch = corpus::parse_question_sets(schema_path);
  std::vector<corpus::GoldAssessment> gold;
  if (!gold_path.empty()) gold = corpus::parse_gold(gold_path, sch);
  auto embedder = make_embedder(cfg);
  auto provider = make_llm(cfg);
  llm::LlmProvider* llm_ptr = provider.get();
  std::unique_ptr<llm::ThrottledProvider> throttled;
  if (cfg.rate_per_minute > 0) {
    throttled =
        std::make_unique<llm::ThrottledProvider>(*provider, cfg.rate_per_minute, cfg.rate_burst);
    llm_ptr = throttled.get();
  }
  const auto settings = settings_from(cfg);
  const auto report = assess::assess_interview(t, sch, gold_for(gold, t.interview_id), *llm_ptr,
                                               *embedder, settings);
  jsonio::save_file(out, assess::report_to_json(report));
  log::info("assess_done", {{"out", out}, {"predictions", report.predictions.size()}});
  return 0;
}

int run_evaluate(const config::RunConfig& cfg, const std::string& pred_path,
                 const std::string& gold_path, const std::string& schema_path,
                 const std::string& out) {
  const auto sch = corpus::parse_question_sets(schema_path);
  std::vector<std::string> files;
  if (fs::is_directory(pred_path))
    files = sorted_json_files(pred_path);
  else
    files.push_back(pred_path);
  std::vector<assess::Prediction> predictions;
  for (const auto& f : files) {
    const auto report = assess::report_from_json(jsonio::load_file(f), f);
    for (const auto& p : report.predictions) predictions.push_back(p);
  }
  const auto gold = corpus::parse_gold(gold_path, sch);
  const auto eval = metrics::evaluate_run(predictions, gold, sch, cfg.metrics);
  if (!out.empty()) jsonio::save_file(out, metrics::eval_report_to_json(eval));
  std::fputs(metrics::format_table(eval).c_str(), stdout);
  return 0;
}

int run_synth(const std::string& spec_path, const std::string& schema_path,
              const std::string& out_dir, std::uint64_t seed_override, bool has_seed) {
  const auto sch = corpus::parse_question_sets(schema_path);
  auto spec = synth::synth_spec_from_json(jsonio::load_file(spec_path), spec_path);
  if (has_seed) spec.seed = seed_override;
  const auto result = synth::generate(spec, sch);
  fs::create_directories(out_dir);
  const std::string base = out_dir + "/" + result.transcript.interview_id;
  corpus::write_transcript(base + ".transcript.json", result.transcript);
  jsonio::save_file(base + ".truth.json", segment::segmented_to_json(result.truth));
  jsonio::save_file(base + ".gold.json", corpus::gold_to_json(result.gold));
  jsonio::save_file(base + ".mock.json", result.mock_answers);
  log::info("synth_done",
            {{"interview_id", result.transcript.interview_id}, {"out_dir", out_dir}});
  return 0;
}

int run_pipeline(const config::RunConfig& cfg) {
  if (cfg.transcripts_dir.empty())
    throw ConfigError("run needs paths.transcripts_dir in the config");
  const auto sch = corpus::parse_question_sets(cfg.schema_path);
  std::vector<corpus::GoldAssessment> gold;
  if (!cfg.gold_path.empty()) gold = corpus::parse_gold(cfg.gold_path, sch);

  auto embedder = make_embedder(cfg);
  auto provider = make_llm(cfg);
  llm::LlmProvider* llm_ptr = provider.get();
  std::unique_ptr<llm::ThrottledProvider> throttled;
  if (cfg.rate_per_minute > 0) {
    throttled =
        std::make_unique<llm::ThrottledProvider>(*provider, cfg.rate_per_minute, cfg.rate_burst);
    llm_ptr = throttled.get();
  }
  const auto settings = settings_from(cfg);

  const auto files = sorted_json_files(cfg.transcripts_dir);
  if (files.empty()) throw EmptyInput("no transcripts in " + cfg.transcripts_dir);

  std::vector<assess::InterviewReport> reports(files.size());
  assess::detail::run_parallel(files.size(), cfg.parallelism, [&](std::size_t i) {
    const auto t = corpus::parse_transcript(files[i]);
    reports[i] = assess::assess_interview(t, sch, gold_for(gold, t.interview_id), *llm_ptr,
                                          *embedder, settings);
  });

  // Deterministic output order regardless of worker count: by interview id.
  std::vector<std::size_t> order(reports.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return reports[a].interview_id < reports[b].interview_id;
  });

  fs::create_directories(cfg.out_dir + "/assess");
  std::vector<assess::Prediction> pooled;
  for (const std::size_t i : order) {
    jsonio::save_file(cfg.out_dir + "/assess/" + reports[i].interview_id + ".json",
                      assess::report_to_json(reports[i]));
    for (const auto& p : reports[i].predictions) pooled.push_back(p);
  }

  if (!gold.empty()) {
    const auto eval = metrics::evaluate_run(pooled, gold, sch, cfg.metrics);
    jsonio::save_file(cfg.out_dir + "/report.json", metrics::eval_report_to_json(eval));
    std::fputs(metrics::format_table(eval).c_str(), stdout);
  }
  log::info("run_done", {{"interviews", files.size()}, {"out_dir", cfg.out_dir}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diagnostic interview assessment pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // lets --config / --seed appear after the subcommand too

  std::string config_path;
  std::uint64_t seed = 0;
  bool has_seed = false;
  app.add_option("--config", config_path, "run configuration JSON");
  auto* seed_opt = app.add_option("--seed", seed, "override the configured seed");

  // align
  auto* align_cmd = app.add_subcommand("align", "merge a diarized and a verbatim transcript");
  std::string a_diarized, a_verbatim, a_out;
  align_cmd->add_option("--diarized", a_diarized)->required();
  align_cmd->add_option("--verbatim", a_verbatim)->required();
  align_cmd->add_option("--out", a_out)->required();

  // score
  auto* score_cmd = app.add_subcommand("score", "word error rate or diarization error");
  std::string s_ref, s_hyp, s_metric;
  score_cmd->add_option("--ref", s_ref)->required();
  score_cmd->add_option("--hyp", s_hyp)->required();
  score_cmd->add_option("--metric", s_metric)->required()->check(CLI::IsMember({"wer", "tder"}));

  // segment
  auto* seg_cmd = app.add_subcommand("segment", "section and session boundaries");
  std::string g_transcript, g_schema, g_out;
  seg_cmd->add_option("--transcript", g_transcript)->required();
  seg_cmd->add_option("--schema", g_schema)->required();
  seg_cmd->add_option("--out", g_out)->required();

  // assess
  auto* assess_cmd = app.add_subcommand("assess", "predict every variable of one interview");
  std::string as_transcript, as_schema, as_gold, as_out, as_provider, as_setting, as_mock,
      as_exemplars;
  assess_cmd->add_option("--transcript", as_transcript)->required();
  assess_cmd->add_option("--schema", as_schema)->required();
  assess_cmd->add_option("--out", as_out)->required();
  assess_cmd->add_option("--gold", as_gold);
  assess_cmd->add_option("--provider", as_provider)->check(CLI::IsMember({"mock", "http"}));
  assess_cmd->add_option("--setting", as_setting)
      ->check(CLI::IsMember({"zero", "few_single", "few_all"}));
  assess_cmd->add_option("--mock-answers", as_mock);
  assess_cmd->add_option("--exemplars", as_exemplars);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "score predictions against gold");
  std::string e_pred, e_gold, e_schema, e_out;
  eval_cmd->add_option("--pred", e_pred)->required();
  eval_cmd->add_option("--gold", e_gold)->required();
  eval_cmd->add_option("--schema", e_schema)->required();
  eval_cmd->add_option("--out", e_out);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic interview fixture");
  std::string y_spec, y_schema, y_out;
  synth_cmd->add_option("--spec", y_spec)->required();
  synth_cmd->add_option("--schema", y_schema)->required();
  synth_cmd->add_option("--out-dir", y_out)->required();

  // run
  auto* run_cmd = app.add_subcommand("run", "segment, assess, and evaluate a whole corpus");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  has_seed = seed_opt->count() > 0;

  try {
    config::RunConfig cfg;
    if (!config_path.empty()) cfg = config::load_run_config(config_path);
    if (has_seed) cfg.seed = seed;

    if (*align_cmd) return run_align(a_diarized, a_verbatim, a_out);
    if (*score_cmd) return run_score(s_ref, s_hyp, s_metric);
    if (*seg_cmd) return run_segment(cfg, g_transcript, g_schema, g_out);
    if (*assess_cmd) {
      if (!as_provider.empty()) cfg.llm_provider = as_provider;
      if (!as_setting.empty()) cfg.setting = prompt::shot_setting_from_string(as_setting);
      if (!as_mock.empty()) cfg.mock_answers_path = as_mock;
      if (!as_exemplars.empty()) cfg.exemplars_path = as_exemplars;
      return run_assess(cfg, as_transcript, as_schema, as_gold, as_out);
    }
    if (*eval_cmd) return run_evaluate(cfg, e_pred, e_gold, e_schema, e_out);
    if (*synth_cmd) return run_synth(y_spec, y_schema, y_out, seed, has_seed);
    if (*run_cmd) {
      if (config_path.empty()) throw ConfigError("run requires --config");
      return run_pipeline(cfg);
    }
    return 1;
  } catch (const ProviderError& e) {
    log::error("provider_error", {{"error", e.what()}});
    return 3;
  } catch (const Error& e) {
    log::error("error", {{"error", e.what()}});
    return 2;
  } catch (const std::exception& e) {
    log::error("error", {{"error", e.what()}});
    return 2;
  }
}
