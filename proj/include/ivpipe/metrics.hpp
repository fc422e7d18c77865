#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ivpipe/assess.hpp"
#include "ivpipe/corpus.hpp"
#include "ivpipe/errors.hpp"
#include "ivpipe/jsonio.hpp"
#include "ivpipe/schema.hpp"

namespace ivpipe::metrics {

struct MetricsConfig {
  enum class BiasDenominator { all, nonzero };
  BiasDenominator bias_denominator = BiasDenominator::all;
  // Absolute tolerance for measure equality; 0 keeps integers strict, 1
  // forgives clinician rounding of month counts.
  double measure_tolerance = 0.0;
};

// One scored prediction. Abstentions and error classes arrive as !answered.
struct Pair {
  bool answered = false;
  schema::Value pred{};
  schema::Value gold{};
};

inline bool value_equal(const schema::Value& a, const schema::Value& b, double tol = 0.0) {
  const bool sa = std::holds_alternative<std::string>(a);
  const bool sb = std::holds_alternative<std::string>(b);
  if (sa || sb) return sa && sb && std::get<std::string>(a) == std::get<std::string>(b);
  return std::fabs(schema::as_double(a) - schema::as_double(b)) <= tol;
}

// Exact-match fraction; anything short of an answer counts against it.
inline double accuracy(const std::vector<Pair>& pairs, double tol = 0.0) {
  if (pairs.empty()) throw EmptyInput("accuracy over zero pairs");
  std::size_t hit = 0;
  for (const auto& p : pairs)
    if (p.answered && value_equal(p.pred, p.gold, tol)) ++hit;
  return static_cast<double>(hit) / static_cast<double>(pairs.size());
}

// Root mean squared residual over answered pairs only.
inline double rmse(const std::vector<Pair>& pairs) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : pairs) {
    if (!p.answered) continue;
    const double r = schema::as_double(p.pred) - schema::as_double(p.gold);
    sum += r * r;
    ++n;
  }
  if (n == 0) throw EmptyInput("rmse with no answered pairs");
  return std::sqrt(sum / static_cast<double>(n));
}

// Signed residual balance in [-1, 1] over answered pairs. With the nonzero
// denominator, exact hits drop out instead of diluting toward 0; all-exact
// input is still 0 by definition.
inline double bias(const std::vector<Pair>& pairs, const MetricsConfig& cfg = {}) {
  std::size_t over = 0, under = 0, retained = 0;
  for (const auto& p : pairs) {
    if (!p.answered) continue;
    ++retained;
    const double d = schema::as_double(p.pred) - schema::as_double(p.gold);
    if (d > 0) ++over;
    else if (d < 0) ++under;
  }
  if (retained == 0) throw EmptyInput("bias with no answered pairs");
  const std::size_t denom =
      cfg.bias_denominator == MetricsConfig::BiasDenominator::all ? retained : over + under;
  if (denom == 0) return 0.0;
  return (static_cast<double>(over) - static_cast<double>(under)) / static_cast<double>(denom);
}

// Pooled slot recall: of every gold-present slot anywhere, how many the
// model also flagged.
inline double recall_slots(const std::vector<assess::SlotComparison>& comparisons) {
  std::size_t denom = 0, num = 0;
  for (const auto& cmp : comparisons)
    for (const auto& cell : cmp.cells) {
      if (!cell.gold_present) continue;
      ++denom;
      if (cell.predicted_present) ++num;
    }
  if (denom == 0) throw EmptyInput("recall with no gold-present slots");
  return static_cast<double>(num) / static_cast<double>(denom);
}

// ---------------------------------------------------------------------------
// Run-level evaluation
// ---------------------------------------------------------------------------

struct MetricRow {
  std::string section;  // "overall" or a section id
  std::string var_type;  // scale, scale_g, category, measure, notes, rule
  std::size_t count = 0;
  std::optional<double> accuracy;
  std::optional<double> rmse;
  std::optional<double> bias;
  std::optional<double> recall;
};

struct EvalReport {
  std::vector<MetricRow> rows;
};

namespace detail {

struct Bucket {
  std::vector<Pair> pairs;
  std::vector<Pair> grouped;  // scale pairs mapped through the 0/1/2+ grouping
  std::vector<assess::SlotComparison> comparisons;
};

inline Pair grouped_pair(const Pair& p) {
  Pair g;
  g.answered = p.answered;
  if (p.answered)
    g.pred = static_cast<std::int64_t>(
        schema::group_scale(std::get<std::int64_t>(p.pred)));
  g.gold =
      static_cast<std::int64_t>(schema::group_scale(std::get<std::int64_t>(p.gold)));
  return g;
}

template <typename Fn>
std::optional<double> guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const EmptyInput&) {
    return std::nullopt;
  }
}

// Table 5 shape: which metrics exist for which variable type.
inline MetricRow score_bucket(const std::string& section, const std::string& type,
                              const Bucket& b, const MetricsConfig& cfg) {
  MetricRow row;
  row.section = section;
  row.var_type = type;
  if (type == "notes") {
    row.count = b.comparisons.size();
    row.recall = guarded([&] { return recall_slots(b.comparisons); });
    return row;
  }
  row.count = b.pairs.size();
  const double tol = type == "measure" ? cfg.measure_tolerance : 0.0;
  row.accuracy = guarded([&] { return accuracy(b.pairs, tol); });
  if (type == "scale" || type == "scale_g" || type == "rule")
    row.rmse = guarded([&] { return rmse(b.pairs); });
  if (type == "scale" || type == "scale_g" || type == "rule" || type == "measure")
    row.bias = guarded([&] { return bias(b.pairs, cfg); });
  return row;
}

}  // namespace detail

// Joins predictions to gold on (interview_id, var_id) and aggregates one row
// per variable type, overall and per section. Groupable scales additionally
// feed a scale_g row scored on 0 / 1 / 2+ groups.
inline EvalReport evaluate_run(const std::vector<assess::Prediction>& predictions,
                               const std::vector<corpus::GoldAssessment>& gold,
                               const schema::Schema& sch, const MetricsConfig& cfg = {}) {
  std::map<std::string, const corpus::GoldAssessment*> gold_by_id;
  for (const auto& g : gold) gold_by_id[g.interview_id] = &g;

  static const std::vector<std::string> kTypeOrder = {"scale",   "scale_g", "category",
                                                      "measure", "notes",   "rule"};
  // (section, type) -> bucket; "" section key is the overall pool.
  std::map<std::pair<std::string, std::string>, detail::Bucket> buckets;
  std::size_t joined = 0;

  for (const auto& p : predictions) {
    const schema::VariableSpec* var = sch.find_variable(p.var_id);
    if (!var) throw SchemaError("prediction for unknown variable " + p.var_id);
    auto git = gold_by_id.find(p.interview_id);
    if (git == gold_by_id.end()) continue;

    if (var->var_type == schema::VarType::notes) {
      if (!p.slots) continue;  // notes variable that never ran its slot pipeline
      ++joined;
      buckets[{"", "notes"}].comparisons.push_back(*p.slots);
      buckets[{var->section_id, "notes"}].comparisons.push_back(*p.slots);
      continue;
    }

    auto vit = git->second->values.find(p.var_id);
    if (vit == git->second->values.end()) continue;
    ++joined;
    Pair pair;
    pair.answered = p.has_value;
    if (p.has_value) pair.pred = p.value;
    pair.gold = vit->second;
    const std::string type = schema::to_string(var->var_type);
    buckets[{"", type}].pairs.push_back(pair);
    buckets[{var->section_id, type}].pairs.push_back(pair);
    if (var->var_type == schema::VarType::scale && var->scale_groupable) {
      const Pair g = detail::grouped_pair(pair);
      buckets[{"", "scale_g"}].pairs.push_back(g);
      buckets[{var->section_id, "scale_g"}].pairs.push_back(g);
    }
  }
  if (joined == 0) throw EmptyInput("no prediction joins any gold assessment");

  EvalReport report;
  std::vector<std::string> sections;
  sections.push_back("");
  for (const auto& s : sch.sections()) sections.push_back(s.section_id);
  for (const auto& section : sections)
    for (const auto& type : kTypeOrder) {
      auto it = buckets.find({section, type});
      if (it == buckets.end()) continue;
      report.rows.push_back(detail::score_bucket(section.empty() ? "overall" : section, type,
                                                 it->second, cfg));
    }
  return report;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline Json eval_report_to_json(const EvalReport& report) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    Json j;
    j["section"] = r.section;
    j["type"] = r.var_type;
    j["count"] = r.count;
    j["accuracy"] = opt(r.accuracy);
    j["rmse"] = opt(r.rmse);
    j["bias"] = opt(r.bias);
    j["recall"] = opt(r.recall);
    rows.push_back(std::move(j));
  }
  Json out;
  out["rows"] = std::move(rows);
  return out;
}

// Fixed-width table, one block per section, dashes where a metric does not
// apply to the type.
inline std::string format_table(const EvalReport& report) {
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return std::string(buf);
  };
  std::string out;
  std::string current;
  bool first = true;
  for (const auto& r : report.rows) {
    if (r.section != current || first) {
      current = r.section;
      if (!first) out += "\n";
      first = false;
      out += "== " + current + " ==\n";
      char head[128];
      std::snprintf(head, sizeof head, "%-10s %7s %10s %10s %10s %10s\n", "Type", "Count",
                    "Accuracy", "RMSE", "Bias", "Recall");
      out += head;
    }
    char line[160];
    std::snprintf(line, sizeof line, "%-10s %7zu %10s %10s %10s %10s\n", r.var_type.c_str(),
                  r.count, cell(r.accuracy).c_str(), cell(r.rmse).c_str(), cell(r.bias).c_str(),
                  cell(r.recall).c_str());
    out += line;
  }
  return out;
}

}  // namespace ivpipe::metrics
