#pragma once

#include <map>
#include <string>
#include <vector>

#include "ivpipe/corpus.hpp"
#include "ivpipe/errors.hpp"
#include "ivpipe/jsonio.hpp"
#include "ivpipe/schema.hpp"
#include "ivpipe/segment.hpp"
#include "ivpipe/text.hpp"

namespace ivpipe::prompt {

// Shared instruction fragments.
inline constexpr const char* kIntro = "Imagine you are a professional clinician";
inline constexpr const char* kReturn =
    "Return the answer as a JSON object with \"reason\" and \"answer\" as the keys";
inline constexpr const char* kReason =
    "The \"reason\" should provide a brief justification or explanation for the answer";

namespace detail {

inline std::string code_label_lines(const schema::CodeLabels& cl) {
  std::vector<std::string> lines;
  lines.reserve(cl.size());
  for (const auto& [code, label] : cl) lines.push_back(std::to_string(code) + ": " + label);
  return text::join(lines, "\n");
}

inline void need(bool ok, const std::string& var_id, const std::string& field) {
  if (!ok) throw SchemaError("variable " + var_id + ": prompt field \"" + field + "\" missing");
}

}  // namespace detail

// Instruction for a scale, category, or measure variable. Notes variables are
// asked one slot at a time (render_slot_instruction); rule variables are
// computed, never prompted.
inline std::string render_instruction(const schema::VariableSpec& var) {
  using schema::VarType;
  const auto& pf = var.prompt_fields;
  switch (var.var_type) {
    case VarType::scale:
    case VarType::category: {
      detail::need(!pf.keywords.empty(), var.var_id, "keywords");
      detail::need(!pf.symptom.empty(), var.var_id, "symptom");
      const auto& codes = var.var_type == VarType::scale ? pf.range : pf.labels;
      detail::need(!codes.empty(), var.var_id,
                   var.var_type == VarType::scale ? "range" : "labels");
      std::string out = std::string(kIntro) +
                        ". Based on the patient's interview history, please determine " +
                        pf.keywords + " that the patient " + pf.symptom + ". " + kReturn + ". " +
                        kReason + ". The \"answer\" should be in the range " +
                        detail::code_label_lines(codes) + ".";
      for (const auto& attr : pf.attributes) out += "\n" + attr;
      return out;
    }
    case VarType::measure: {
      detail::need(!pf.keywords.empty(), var.var_id, "keywords");
      detail::need(!pf.symptom.empty(), var.var_id, "symptom");
      detail::need(!pf.value_type.empty(), var.var_id, "value_type");
      return std::string(kIntro) +
             ". Based on the patient's interview history, please calculate " + pf.keywords +
             " that the patient have " + pf.symptom + ". " + kReturn + ". " + kReason +
             ". The \"answer\" should be " + pf.value_type + ".";
    }
    case VarType::notes:
      throw SchemaError("variable " + var.var_id +
                        ": notes are prompted per slot, use render_slot_instruction");
    case VarType::rule:
      throw SchemaError("variable " + var.var_id + ": rules are computed, never prompted");
  }
  throw SchemaError("unreachable");
}

// Binary presence question for one slot of a notes variable, asked against
// the slot-formatted session data.
inline std::string render_slot_instruction(const std::string& slot) {
  return std::string(kIntro) +
         ". Based on the formatted data from patient's interview, please determine whether or "
         "not the formatted data includes this specified information " +
         slot + ". " + kReturn +
         ". The \"reason\" gives a brief explanation on whether the formatted data includes or "
         "omits the information. The \"answer\" should be either \"yes\" or \"no\", indicating "
         "the presence or absence of the information in formatted data.";
}

// ---------------------------------------------------------------------------
// Notes pipeline stage prompts: slot generation over a batch of clinician
// notes, slot merging, and slot filling.
// ---------------------------------------------------------------------------

enum class NotesStage { generate, merge, fill };

inline constexpr const char* kSlotGenerate =
    "As a clinician who has conducted interviews with multiple patients, you are tasked with "
    "structuring the interview data into a more organized format. To achieve this, identify "
    "general \"slots\" from the interview question and answers. These slots should represent "
    "key themes or types of information that can be adapted to various responses from different "
    "patients.\n"
    "For each identified slot, provide a brief explanation of why it has been chosen, focusing "
    "on its relevance and utility in categorizing interview data.\n"
    "Your findings should be presented in a JSON format as a list, for example: [{\"reason\": "
    "\"This slot captures the primary health concern of the patient, a common theme across all "
    "interviews\", \"slot\": \"primary_health_concern\" }, {\"reason\": \"This slot pertains to "
    "the patient's lifestyle habits, which is crucial for understanding health context\", "
    "\"slot\": \"lifestyle_habits\" } ].\n"
    "Remember to ensure that the slots are broad enough to be applicable across different "
    "patient responses yet specific enough to offer meaningful categorization.";

inline constexpr const char* kSlotMerge =
    "Imagine you are a clinician who documents patient interviews in a structured, slot-filling "
    "manner. Sometimes, certain slots may have overlapping or similar content. Your task is to "
    "review a given list of slots and merge those that are similar. The merged results should "
    "be returned as a JSON object, where each key represents a merged slot, and the "
    "corresponding value is a list of the original slots that have been combined under this "
    "merged category.\n"
    "For instance, if the list of slots is: [\"daily_routine\", \"work_events\", "
    "\"daily_activity\", \"daytime_activities\", \"work_routine\"], a possible merged result "
    "could be: {\"daily_routine\": [\"daily_routine\", \"daily_activity\", "
    "\"daytime_activities\"], \"work\": [\"work_events\", \"work_routine\"]}.\n"
    "When you receive a list of slots, analyze and merge them accordingly, ensuring that the "
    "merged slots are logically grouped and accurately represent the original information "
    "categories.";

inline constexpr const char* kSlotFillPrefix =
    "Imagine you are a professional clinician. Based on the patient's interview history, please "
    "extract specific information and fill in the following slots: ";

inline constexpr const char* kSlotFillSuffix =
    ". If the interview history does not provide information for any of these slots, please "
    "enter an empty string ('') for that slot. Return the answer as a JSON object.";

struct NotesStageInput {
  std::vector<std::string> notes;  // generate: clinician note batch
  std::vector<std::string> slots;  // merge and fill
  std::string body;                // fill: the text to format
};

inline std::string render_notes_stage_prompt(NotesStage stage, const NotesStageInput& in) {
  switch (stage) {
    case NotesStage::generate:
      return std::string(kSlotGenerate) + "\n\n" + text::join(in.notes, "\n\n");
    case NotesStage::merge: {
      Json list = Json::array();
      for (const auto& s : in.slots) list.push_back(s);
      return std::string(kSlotMerge) + "\n\n" + list.dump();
    }
    case NotesStage::fill:
      return std::string(kSlotFillPrefix) + text::join(in.slots, ", ") + kSlotFillSuffix +
             "\n\n" + in.body;
  }
  throw SchemaError("unreachable");
}

// ---------------------------------------------------------------------------
// Payload assembly
// ---------------------------------------------------------------------------

enum class ShotSetting { zero, few_single, few_all };

inline std::string to_string(ShotSetting s) {
  switch (s) {
    case ShotSetting::zero: return "zero";
    case ShotSetting::few_single: return "few_single";
    case ShotSetting::few_all: return "few_all";
  }
  return "?";
}

inline ShotSetting shot_setting_from_string(const std::string& s) {
  if (s == "zero") return ShotSetting::zero;
  if (s == "few_single") return ShotSetting::few_single;
  if (s == "few_all") return ShotSetting::few_all;
  throw ConfigError("unknown shot setting \"" + s + "\"");
}

struct Shot {
  std::string history;
  std::string answer_json;  // {"reason": ..., "answer": ...}
};

struct PromptPayload {
  std::string system;
  std::vector<Shot> shots;
  std::string history;
  bool empty_history = false;

  std::size_t total_chars() const {
    std::size_t n = system.size() + history.size();
    for (const auto& s : shots) n += s.history.size() + s.answer_json.size();
    return n;
  }
};

struct Exemplar {
  std::string history;
  std::string reason;
  Json answer;
};

// Few-shot exemplars, keyed by variable type. File format: an array of
// {"var_type": ..., "shots": [{"history", "answer": {"reason", "answer"}}]}.
class ExemplarConfig {
 public:
  ExemplarConfig() = default;

  static ExemplarConfig load(const std::string& path) {
    ExemplarConfig cfg;
    const Json doc = jsonio::load_file(path);
    if (!doc.is_array()) throw SchemaError(path + ": expected an array of exemplar groups");
    for (const auto& group : doc) {
      const auto type = schema::var_type_from_string(
          jsonio::require_string(group, "var_type", path), path);
      const Json& shots = jsonio::require(group, "shots", path);
      if (!shots.is_array()) throw SchemaError(path + ": shots must be an array");
      for (const auto& sj : shots) {
        Exemplar ex;
        ex.history = jsonio::require_string(sj, "history", path);
        const Json& ans = jsonio::require(sj, "answer", path);
        ex.reason = jsonio::require_string(ans, "reason", path);
        ex.answer = jsonio::require(ans, "answer", path);
        cfg.by_type_[type].push_back(std::move(ex));
      }
    }
    return cfg;
  }

  void add(schema::VarType type, Exemplar ex) { by_type_[type].push_back(std::move(ex)); }

  bool empty() const { return by_type_.empty(); }

  // zero: none. few_single: the first configured exemplar. few_all: for scale
  // variables one exemplar per scale point in score order, otherwise every
  // configured exemplar.
  std::vector<Shot> shots_for(const schema::VariableSpec& var, ShotSetting setting) const {
    if (setting == ShotSetting::zero) return {};
    auto it = by_type_.find(var.var_type);
    if (it == by_type_.end() || it->second.empty())
      throw ConfigError("no exemplars configured for var_type " +
                        schema::to_string(var.var_type));
    const auto& pool = it->second;

    auto to_shot = [](const Exemplar& ex) {
      Json ans;
      ans["reason"] = ex.reason;
      ans["answer"] = ex.answer;
      return Shot{ex.history, ans.dump()};
    };

    if (setting == ShotSetting::few_single) return {to_shot(pool.front())};

    if (var.var_type == schema::VarType::scale) {
      std::vector<Shot> out;
      for (const auto& [code, label] : var.prompt_fields.range) {
        (void)label;
        const Exemplar* found = nullptr;
        for (const auto& ex : pool)
          if (ex.answer.is_number_integer() && ex.answer.get<std::int64_t>() == code) {
            found = &ex;
            break;
          }
        if (!found)
          throw ConfigError("no exemplar for scale point " + std::to_string(code) +
                            " of variable " + var.var_id);
        out.push_back(to_shot(*found));
      }
      return out;
    }
    std::vector<Shot> out;
    out.reserve(pool.size());
    for (const auto& ex : pool) out.push_back(to_shot(ex));
    return out;
  }

 private:
  std::map<schema::VarType, std::vector<Exemplar>> by_type_;
};

// One "Speaker: text" line per utterance of each session, in order.
inline std::vector<std::string> history_lines(const std::vector<segment::Session>& sessions,
                                              const corpus::Transcript& t) {
  std::vector<std::string> lines;
  const int n = static_cast<int>(t.utterances.size());
  for (const auto& s : sessions)
    for (int u = s.start_utt; u < s.end_utt && u < n; ++u)
      lines.push_back(t.utterances[u].speaker + ": " + t.utterances[u].text);
  return lines;
}

// Shrinks the history to the byte budget by dropping whole utterances from
// the middle; the opening question and the final answer always survive.
// A budget of zero means unlimited.
inline std::string truncate_history(std::vector<std::string> lines, std::size_t budget) {
  auto total = [&] {
    std::size_t n = lines.empty() ? 0 : lines.size() - 1;  // newlines
    for (const auto& l : lines) n += l.size();
    return n;
  };
  if (budget == 0) return text::join(lines, "\n");
  while (lines.size() > 2 && total() > budget) lines.erase(lines.begin() + lines.size() / 2);
  return text::join(lines, "\n");
}

inline PromptPayload assemble_payload(const schema::VariableSpec& var,
                                      const std::vector<segment::Session>& sessions,
                                      const corpus::Transcript& t, ShotSetting setting,
                                      const ExemplarConfig& exemplars,
                                      std::size_t history_budget = 0) {
  PromptPayload p;
  p.system = render_instruction(var);
  p.shots = exemplars.shots_for(var, setting);
  p.history = truncate_history(history_lines(sessions, t), history_budget);
  p.empty_history = p.history.empty();
  return p;
}

}  // namespace ivpipe::prompt
