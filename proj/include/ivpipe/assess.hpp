#pragma once

#include <atomic>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "ivpipe/corpus.hpp"
#include "ivpipe/errors.hpp"
#include "ivpipe/jsonio.hpp"
#include "ivpipe/llm.hpp"
#include "ivpipe/log.hpp"
#include "ivpipe/prompt.hpp"
#include "ivpipe/schema.hpp"
#include "ivpipe/segment.hpp"
#include "ivpipe/text.hpp"
#include "ivpipe/textsim.hpp"

namespace ivpipe::assess {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct Provenance {
  std::string provider;
  std::string setting;
  std::string timestamp;  // left empty by default so reports are reproducible
};

struct SlotSchema {
  enum class Origin { generated, merged, refined };

  std::string notes_var_id;
  std::vector<std::string> slots;
  Origin origin = Origin::generated;
};

inline std::string to_string(SlotSchema::Origin o) {
  switch (o) {
    case SlotSchema::Origin::generated: return "generated";
    case SlotSchema::Origin::merged: return "merged";
    case SlotSchema::Origin::refined: return "refined";
  }
  return "?";
}

struct SlotComparison {
  struct Cell {
    std::string slot;
    bool gold_present = false;
    bool predicted_present = false;
    std::string error;  // per-slot failure detail, empty when clean
  };

  std::string notes_var_id;
  std::vector<Cell> cells;  // one per schema slot, in schema order
};

struct Prediction {
  std::string interview_id;
  std::string var_id;
  // "answered", "abstained", or an error class:
  // format_error | invalid | provider_error | context_overflow |
  // missing_dependency | range_error | error
  std::string status = "abstained";
  bool has_value = false;
  schema::Value value{};
  std::string reason;
  std::string error;
  std::vector<segment::Session> sessions_used;
  std::optional<SlotComparison> slots;  // notes variables only
  Provenance provenance;
};

struct InterviewReport {
  std::string interview_id;
  std::vector<Prediction> predictions;
};

struct AssessSettings {
  prompt::ShotSetting setting = prompt::ShotSetting::zero;
  llm::DecodeParams decode = llm::DecodeParams::deterministic();
  llm::RetryPolicy retry;
  segment::SegmentConfig segment_cfg;
  prompt::ExemplarConfig exemplars;
  std::size_t parallelism = 1;
  std::size_t context_budget = 0;  // chars, 0 = unlimited
  std::size_t history_budget = 0;  // chars, 0 = unlimited
  std::string timestamp;
  // Slot schemas for notes variables; falls back to the slots declared on the
  // variable itself when absent here.
  std::map<std::string, SlotSchema> slot_schemas;
};

namespace detail {

inline std::string status_of(llm::AnswerClass c) { return llm::to_string(c); }

// Maps a thrown failure onto a prediction error class. Keeps the run alive.
template <typename Fn>
void record_failure(Prediction& p, Fn&& fn) {
  try {
    fn();
  } catch (const MissingDependency& e) {
    p.status = "missing_dependency";
    p.error = e.what();
  } catch (const ContextOverflow& e) {
    p.status = "context_overflow";
    p.error = e.what();
  } catch (const RangeError& e) {
    p.status = "range_error";
    p.error = e.what();
  } catch (const ProviderError& e) {
    p.status = "provider_error";
    p.error = e.what();
  } catch (const std::exception& e) {
    p.status = "error";
    p.error = e.what();
  }
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// One-turn payload for the slot pipeline stages: no shots, prompt as history.
inline prompt::PromptPayload stage_payload(std::string body) {
  prompt::PromptPayload p;
  p.history = std::move(body);
  return p;
}

inline std::string stage_complete(const std::string& tag, std::string body,
                                  llm::LlmProvider& provider, const llm::DecodeParams& decode,
                                  const llm::RetryPolicy& retry, std::size_t budget) {
  llm::CompletionRequest req;
  req.tag = tag;
  req.payload = stage_payload(std::move(body));
  req.params = decode;
  return llm::complete(req, provider, budget, retry);
}

inline Json parse_json_loose(const std::string& raw, const std::string& what) {
  try {
    return Json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
  }
  const std::string sub = llm::detail::first_balanced_object(raw);
  if (!sub.empty()) {
    try {
      return Json::parse(sub);
    } catch (const nlohmann::json::parse_error&) {
    }
  }
  throw FormatError(what + ": response is not JSON: " + raw.substr(0, 120));
}

inline void append_slot(std::vector<std::string>& out, std::set<std::string>& seen,
                        const std::string& raw_name) {
  const std::string name = text::snake_case(raw_name);
  if (name.empty()) return;
  if (seen.insert(name).second) out.push_back(name);
}

// Slot list from a generate-stage response: a list of {"slot": ...} objects
// (bare strings tolerated).
inline std::vector<std::string> parse_generated_slots(const std::string& raw) {
  const Json doc = parse_json_loose(raw, "slot generation");
  const Json* list = nullptr;
  if (doc.is_array())
    list = &doc;
  else if (doc.is_object() && doc.contains("slots") && doc.at("slots").is_array())
    list = &doc.at("slots");
  if (!list) throw FormatError("slot generation: expected a JSON list of slots");
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const Json& item : *list) {
    if (item.is_string())
      append_slot(out, seen, item.get<std::string>());
    else if (item.is_object() && item.contains("slot") && item.at("slot").is_string())
      append_slot(out, seen, item.at("slot").get<std::string>());
  }
  if (out.empty()) throw FormatError("slot generation: no slot names found");
  return out;
}

// Merged slots from a merge-stage response: object keyed by merged name
// (a plain list is taken as already merged).
inline std::vector<std::string> parse_merged_slots(const std::string& raw) {
  const Json doc = parse_json_loose(raw, "slot merge");
  std::vector<std::string> out;
  std::set<std::string> seen;
  if (doc.is_object()) {
    for (auto it = doc.begin(); it != doc.end(); ++it) append_slot(out, seen, it.key());
  } else if (doc.is_array()) {
    for (const Json& item : doc)
      if (item.is_string()) append_slot(out, seen, item.get<std::string>());
  }
  if (out.empty()) throw FormatError("slot merge: no slot names found");
  return out;
}

inline void validate_slots(const SlotSchema& s) {
  if (s.slots.empty()) throw FormatError(s.notes_var_id + ": slot schema is empty");
  std::set<std::string> seen;
  for (const auto& name : s.slots) {
    if (name.empty()) throw FormatError(s.notes_var_id + ": empty slot name");
    if (!seen.insert(name).second)
      throw FormatError(s.notes_var_id + ": duplicate slot \"" + name + "\"");
  }
}

// Fill-stage response: object slot -> text. Unlisted slots count as empty.
inline std::map<std::string, std::string> parse_fill(const std::string& raw) {
  const Json doc = parse_json_loose(raw, "slot fill");
  if (!doc.is_object()) throw FormatError("slot fill: expected a JSON object");
  std::map<std::string, std::string> out;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string key = text::snake_case(it.key());
    if (it.value().is_string())
      out[key] = it.value().get<std::string>();
    else if (!it.value().is_null())
      out[key] = it.value().dump();
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Scale / category / measure prediction: resolve the variable's sessions,
// assemble the prompt, call the provider, classify the answer. A variable
// with no resolvable sessions abstains without touching the provider.
inline Prediction predict_variable(const schema::VariableSpec& var, const schema::Schema& sch,
                                   const segment::SegmentedInterview& seg,
                                   const corpus::Transcript& t, llm::LlmProvider& provider,
                                   const AssessSettings& settings) {
  using schema::VarType;
  if (var.var_type != VarType::scale && var.var_type != VarType::category &&
      var.var_type != VarType::measure)
    throw SchemaError("predict_variable on " + var.var_id + ": wrong variable type");

  Prediction p;
  p.interview_id = t.interview_id;
  p.var_id = var.var_id;
  p.provenance = {provider.id(), prompt::to_string(settings.setting), settings.timestamp};
  p.sessions_used = schema::resolve_variable_sessions(var, seg, sch);
  if (p.sessions_used.empty()) {
    p.status = "abstained";
    p.reason = "no interview sessions cover this variable";
    return p;
  }

  detail::record_failure(p, [&] {
    llm::CompletionRequest req;
    req.tag = t.interview_id + "/" + var.var_id;
    req.payload = prompt::assemble_payload(var, p.sessions_used, t, settings.setting,
                                           settings.exemplars, settings.history_budget);
    req.params = settings.decode;
    const std::string raw = llm::complete(req, provider, settings.context_budget, settings.retry);
    const llm::ParsedAnswer ans = llm::parse_answer(raw, var);
    p.status = detail::status_of(ans.cls);
    p.reason = ans.reason;
    p.error = ans.error;
    if (ans.cls == llm::AnswerClass::answered) {
      p.has_value = true;
      p.value = ans.value;
    }
  });
  return p;
}

// Slot-schema induction from gold notes: a generate pass proposes slots, a
// merge pass clusters them, and an operator override file (a JSON list of
// names) gets the last word.
inline SlotSchema induce_slot_schema(const schema::VariableSpec& notes_var,
                                     const std::vector<std::string>& gold_notes,
                                     llm::LlmProvider& provider,
                                     const std::string& override_path = "",
                                     const llm::DecodeParams& decode = llm::DecodeParams::deterministic(),
                                     const llm::RetryPolicy& retry = {}) {
  if (notes_var.var_type != schema::VarType::notes)
    throw SchemaError("induce_slot_schema on " + notes_var.var_id + ": not a notes variable");
  if (gold_notes.empty()) throw EmptyInput(notes_var.var_id + ": no gold notes to induce from");

  SlotSchema out;
  out.notes_var_id = notes_var.var_id;

  prompt::NotesStageInput gen;
  gen.notes = gold_notes;
  const std::string gen_raw = detail::stage_complete(
      notes_var.var_id + "/nsg", prompt::render_notes_stage_prompt(prompt::NotesStage::generate, gen),
      provider, decode, retry, 0);
  out.slots = detail::parse_generated_slots(gen_raw);
  out.origin = SlotSchema::Origin::generated;

  prompt::NotesStageInput merge;
  merge.slots = out.slots;
  const std::string merge_raw = detail::stage_complete(
      notes_var.var_id + "/nsm", prompt::render_notes_stage_prompt(prompt::NotesStage::merge, merge),
      provider, decode, retry, 0);
  out.slots = detail::parse_merged_slots(merge_raw);
  out.origin = SlotSchema::Origin::merged;

  if (!override_path.empty()) {
    const Json doc = jsonio::load_file(override_path);
    if (!doc.is_array()) throw SchemaError(override_path + ": override must be a JSON list");
    std::vector<std::string> names;
    std::set<std::string> seen;
    for (const Json& item : doc) {
      if (!item.is_string()) throw SchemaError(override_path + ": slot names must be strings");
      detail::append_slot(names, seen, item.get<std::string>());
    }
    out.slots = std::move(names);
    out.origin = SlotSchema::Origin::refined;
  }

  detail::validate_slots(out);
  return out;
}

// Notes comparison. Gold side: one fill call over the clinician note; a slot
// is gold-present when its filled string is non-empty. Predicted side: one
// fill call over the session history, then one yes/no presence question per
// slot against the formatted data.
inline SlotComparison assess_notes_variable(const schema::VariableSpec& var,
                                            const schema::Schema& sch,
                                            const segment::SegmentedInterview& seg,
                                            const corpus::Transcript& t,
                                            const std::string& gold_note,
                                            const SlotSchema& slot_schema,
                                            llm::LlmProvider& provider,
                                            const AssessSettings& settings) {
  if (var.var_type != schema::VarType::notes)
    throw SchemaError("assess_notes_variable on " + var.var_id + ": not a notes variable");
  detail::validate_slots(slot_schema);

  SlotComparison cmp;
  cmp.notes_var_id = var.var_id;
  for (const auto& slot : slot_schema.slots) {
    SlotComparison::Cell cell;
    cell.slot = slot;
    cmp.cells.push_back(std::move(cell));
  }
  const std::string base_tag = t.interview_id + "/" + var.var_id;

  prompt::NotesStageInput fill;
  fill.slots = slot_schema.slots;

  // Gold side.
  try {
    fill.body = gold_note;
    const std::string raw = detail::stage_complete(
        base_tag + "/nsf_gold", prompt::render_notes_stage_prompt(prompt::NotesStage::fill, fill),
        provider, settings.decode, settings.retry, settings.context_budget);
    const auto filled = detail::parse_fill(raw);
    for (auto& cell : cmp.cells) {
      auto it = filled.find(cell.slot);
      cell.gold_present = it != filled.end() && !detail::trim(it->second).empty();
    }
  } catch (const std::exception& e) {
    for (auto& cell : cmp.cells) cell.error = std::string("gold fill failed: ") + e.what();
    return cmp;
  }

  // Predicted side: format the sessions, then ask per slot.
  const auto sessions = schema::resolve_variable_sessions(var, seg, sch);
  const std::string history =
      text::join(prompt::history_lines(sessions, t), "\n");
  std::string formatted;
  try {
    fill.body = history;
    formatted = detail::stage_complete(
        base_tag + "/nsf_pred", prompt::render_notes_stage_prompt(prompt::NotesStage::fill, fill),
        provider, settings.decode, settings.retry, settings.context_budget);
  } catch (const std::exception& e) {
    for (auto& cell : cmp.cells)
      if (cell.error.empty()) cell.error = std::string("session fill failed: ") + e.what();
    return cmp;
  }

  for (auto& cell : cmp.cells) {
    try {
      llm::CompletionRequest req;
      req.tag = base_tag + "/slot/" + cell.slot;
      req.payload.system = prompt::render_slot_instruction(cell.slot);
      req.payload.history = formatted;
      req.params = settings.decode;
      const std::string raw = llm::complete(req, provider, settings.context_budget, settings.retry);
      const llm::ParsedAnswer ans = llm::parse_answer(raw, var);
      if (ans.cls == llm::AnswerClass::answered)
        cell.predicted_present = std::get<std::string>(ans.value) == "yes";
      else
        cell.error = llm::to_string(ans.cls) + (ans.error.empty() ? "" : ": " + ans.error);
    } catch (const std::exception& e) {
      cell.predicted_present = false;
      cell.error = e.what();
    }
  }
  return cmp;
}

namespace detail {

inline void run_parallel(std::size_t n, std::size_t workers,
                         const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first;
  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

inline const SlotSchema* find_slot_schema(const schema::VariableSpec& var,
                                          const AssessSettings& settings,
                                          SlotSchema& declared_storage) {
  auto it = settings.slot_schemas.find(var.var_id);
  if (it != settings.slot_schemas.end()) return &it->second;
  if (!var.prompt_fields.slots.empty()) {
    declared_storage.notes_var_id = var.var_id;
    declared_storage.slots = var.prompt_fields.slots;
    declared_storage.origin = SlotSchema::Origin::refined;
    return &declared_storage;
  }
  return nullptr;
}

}  // namespace detail

// Whole-interview orchestration: segment, predict every non-rule variable
// (concurrently up to settings.parallelism), then evaluate rule variables in
// dependency order. Output order is fixed by (section, var_id) so reports are
// byte-stable regardless of worker count.
inline InterviewReport assess_interview(const corpus::Transcript& t, const schema::Schema& sch,
                                        const corpus::GoldAssessment* gold,
                                        llm::LlmProvider& provider,
                                        textsim::EmbeddingProvider& embedder,
                                        const AssessSettings& settings) {
  const segment::SegmentedInterview seg =
      segment::segment_interview(t, sch, &embedder, settings.segment_cfg);

  // Fixed output order: schema section order, then var_id.
  std::map<std::string, std::size_t> section_rank;
  for (std::size_t i = 0; i < sch.sections().size(); ++i)
    section_rank[sch.sections()[i].section_id] = i;
  std::vector<const schema::VariableSpec*> ordered = sch.variables();
  std::sort(ordered.begin(), ordered.end(),
            [&](const schema::VariableSpec* a, const schema::VariableSpec* b) {
              const auto ra = section_rank.at(a->section_id), rb = section_rank.at(b->section_id);
              return ra != rb ? ra < rb : a->var_id < b->var_id;
            });
  std::map<std::string, std::size_t> slot_of;
  for (std::size_t i = 0; i < ordered.size(); ++i) slot_of[ordered[i]->var_id] = i;

  InterviewReport report;
  report.interview_id = t.interview_id;
  report.predictions.resize(ordered.size());

  std::vector<std::size_t> llm_indices;
  for (std::size_t i = 0; i < ordered.size(); ++i)
    if (ordered[i]->var_type != schema::VarType::rule) llm_indices.push_back(i);

  detail::run_parallel(llm_indices.size(), settings.parallelism, [&](std::size_t k) {
    const std::size_t i = llm_indices[k];
    const schema::VariableSpec& var = *ordered[i];
    if (var.var_type != schema::VarType::notes) {
      report.predictions[i] = predict_variable(var, sch, seg, t, provider, settings);
      return;
    }

    Prediction p;
    p.interview_id = t.interview_id;
    p.var_id = var.var_id;
    p.provenance = {provider.id(), prompt::to_string(settings.setting), settings.timestamp};
    p.sessions_used = schema::resolve_variable_sessions(var, seg, sch);

    SlotSchema declared;
    const SlotSchema* slot_schema = detail::find_slot_schema(var, settings, declared);
    const std::string* gold_note = nullptr;
    if (gold) {
      auto it = gold->values.find(var.var_id);
      if (it != gold->values.end() && std::holds_alternative<std::string>(it->second))
        gold_note = &std::get<std::string>(it->second);
    }

    if (!slot_schema) {
      p.reason = "no slot schema available";
    } else if (!gold_note) {
      p.reason = "no gold note available";
    } else if (p.sessions_used.empty()) {
      p.reason = "no interview sessions cover this variable";
    } else {
      detail::record_failure(p, [&] {
        p.slots = assess_notes_variable(var, sch, seg, t, *gold_note, *slot_schema, provider,
                                        settings);
        p.status = "answered";
      });
    }
    report.predictions[i] = std::move(p);
  });

  // Rule variables, dependencies first. Inputs come from answered predictions
  // and previously computed rules.
  std::map<std::string, schema::Value> values;
  for (const auto& p : report.predictions)
    if (p.has_value) values[p.var_id] = p.value;

  for (const auto* var : sch.rules_in_dependency_order()) {
    Prediction& p = report.predictions[slot_of.at(var->var_id)];
    p.interview_id = t.interview_id;
    p.var_id = var->var_id;
    p.provenance = {"rule", prompt::to_string(settings.setting), settings.timestamp};
    detail::record_failure(p, [&] {
      p.value = schema::evaluate_rule(*var, values);
      p.has_value = true;
      p.status = "answered";
      values[var->var_id] = p.value;
    });
  }

  return report;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline Json prediction_to_json(const Prediction& p) {
  Json j;
  j["interview_id"] = p.interview_id;
  j["var_id"] = p.var_id;
  j["status"] = p.status;
  j["answer"] = p.has_value ? schema::value_to_json(p.value) : Json(nullptr);
  j["reason"] = p.reason;
  j["error"] = p.error;
  Json sessions = Json::array();
  for (const auto& s : p.sessions_used)
    sessions.push_back({{"qid", s.qid}, {"start_utt", s.start_utt}, {"end_utt", s.end_utt}});
  j["sessions_used"] = std::move(sessions);
  if (p.slots) {
    Json cells = Json::array();
    for (const auto& c : p.slots->cells)
      cells.push_back({{"slot", c.slot},
                       {"gold", c.gold_present},
                       {"pred", c.predicted_present},
                       {"error", c.error}});
    j["slots"] = std::move(cells);
  }
  j["provenance"] = {{"provider", p.provenance.provider},
                     {"setting", p.provenance.setting},
                     {"timestamp", p.provenance.timestamp}};
  return j;
}

inline Json report_to_json(const InterviewReport& report) {
  Json j;
  j["interview_id"] = report.interview_id;
  Json preds = Json::array();
  for (const auto& p : report.predictions) preds.push_back(prediction_to_json(p));
  j["predictions"] = std::move(preds);
  Json errors = Json::array();
  for (const auto& p : report.predictions)
    if (!p.error.empty())
      errors.push_back({{"var_id", p.var_id}, {"status", p.status}, {"error", p.error}});
  j["errors"] = std::move(errors);
  return j;
}

inline Prediction prediction_from_json(const Json& j, const std::string& where) {
  Prediction p;
  p.interview_id = jsonio::require_string(j, "interview_id", where);
  p.var_id = jsonio::require_string(j, "var_id", where);
  p.status = jsonio::require_string(j, "status", where);
  const Json& answer = jsonio::require(j, "answer", where);
  if (!answer.is_null()) {
    p.has_value = true;
    p.value = schema::value_from_json(answer, where + "." + p.var_id);
  }
  if (j.contains("reason") && j.at("reason").is_string()) p.reason = j.at("reason");
  if (j.contains("error") && j.at("error").is_string()) p.error = j.at("error");
  if (j.contains("sessions_used"))
    for (const Json& sj : j.at("sessions_used"))
      p.sessions_used.push_back(
          {jsonio::require_string(sj, "qid", where),
           static_cast<int>(jsonio::require_int(sj, "start_utt", where)),
           static_cast<int>(jsonio::require_int(sj, "end_utt", where))});
  if (j.contains("slots")) {
    SlotComparison cmp;
    cmp.notes_var_id = p.var_id;
    for (const Json& cj : j.at("slots")) {
      SlotComparison::Cell cell;
      cell.slot = jsonio::require_string(cj, "slot", where);
      cell.gold_present = jsonio::require(cj, "gold", where).get<bool>();
      cell.predicted_present = jsonio::require(cj, "pred", where).get<bool>();
      if (cj.contains("error") && cj.at("error").is_string()) cell.error = cj.at("error");
      cmp.cells.push_back(std::move(cell));
    }
    p.slots = std::move(cmp);
  }
  if (j.contains("provenance")) {
    const Json& pv = j.at("provenance");
    p.provenance.provider = pv.value("provider", "");
    p.provenance.setting = pv.value("setting", "");
    p.provenance.timestamp = pv.value("timestamp", "");
  }
  return p;
}

inline InterviewReport report_from_json(const Json& j, const std::string& where) {
  InterviewReport report;
  report.interview_id = jsonio::require_string(j, "interview_id", where);
  const Json& preds = jsonio::require(j, "predictions", where);
  if (!preds.is_array()) throw SchemaError(where + ": predictions must be an array");
  for (const Json& pj : preds) report.predictions.push_back(prediction_from_json(pj, where));
  return report;
}

}  // namespace ivpipe::assess
