#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ivpipe/corpus.hpp"
#include "ivpipe/errors.hpp"
#include "ivpipe/jsonio.hpp"
#include "ivpipe/rng.hpp"
#include "ivpipe/schema.hpp"
#include "ivpipe/segment.hpp"
#include "ivpipe/text.hpp"

namespace ivpipe::synth {

struct SynthSpec {
  std::uint64_t seed = 1;
  std::string interview_id;            // defaults to synth-<seed>
  std::vector<std::string> sections;   // empty = every schema section
  double paraphrase_rate = 0.0;
  double skip_optional_rate = 0.0;
  double asr_noise_rate = 0.0;
  int filler_min = 0;
  int filler_max = 2;
};

inline SynthSpec synth_spec_from_json(const Json& j, const std::string& where) {
  SynthSpec s;
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("interview_id")) s.interview_id = j.at("interview_id").get<std::string>();
  if (j.contains("sections"))
    for (const Json& item : j.at("sections")) s.sections.push_back(item.get<std::string>());
  auto rate = [&](const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    const double v = j.at(key).get<double>();
    if (v < 0.0 || v > 1.0)
      throw ConfigError(where + ": " + key + " must be in [0, 1]");
    return v;
  };
  s.paraphrase_rate = rate("paraphrase_rate", 0.0);
  s.skip_optional_rate = rate("skip_optional_rate", 0.0);
  s.asr_noise_rate = rate("asr_noise_rate", 0.0);
  if (j.contains("filler_min")) s.filler_min = j.at("filler_min").get<int>();
  if (j.contains("filler_max")) s.filler_max = j.at("filler_max").get<int>();
  if (s.filler_min < 0 || s.filler_max < s.filler_min)
    throw ConfigError(where + ": filler turn range is invalid");
  return s;
}

struct SynthResult {
  corpus::Transcript transcript;
  segment::SegmentedInterview truth;
  corpus::GoldAssessment gold;
  Json mock_answers;  // request tag -> canned provider response
};

namespace detail {

// Hedges and small talk deliberately avoid the content vocabulary a question
// set would use, so off-topic turns stay far below every matching threshold.
inline const std::vector<std::string>& hedges() {
  static const std::vector<std::string> v = {"well", "um",   "you know", "i mean", "sort of",
                                             "kind of", "okay", "yeah",     "hmm",    "so"};
  return v;
}

inline const std::vector<std::string>& smalltalk() {
  static const std::vector<std::string> v = {
      "the parking lot was crowded again this morning",
      "thanks for fitting me in despite the busy waiting area",
      "the coffee machine downstairs is finally fixed",
      "traffic on the bridge was lighter than usual today",
      "i nearly forgot the paperwork but found it in the car",
      "the front desk said the copay machine takes cards now",
      "it is warmer out than the forecast promised",
      "the elevator here is still as slow as ever",
      "my bus arrived early for once this morning",
      "the waiting area magazines are ancient by now"};
  return v;
}

inline const std::vector<std::string>& filler_tokens() {
  static const std::vector<std::string> v = {"anyway",  "basically", "evidently", "actually",
                                             "perhaps", "maybe",     "somehow",   "mostly",
                                             "roughly", "frankly"};
  return v;
}

inline std::string number_words(std::int64_t n) {
  static const char* units[] = {"zero", "one", "two",   "three", "four",
                                "five", "six", "seven", "eight", "nine"};
  static const char* teens[] = {"ten",     "eleven",  "twelve",    "thirteen", "fourteen",
                                "fifteen", "sixteen", "seventeen", "eighteen", "nineteen"};
  static const char* tens[] = {"",      "",      "twenty", "thirty", "forty",
                               "fifty", "sixty", "seventy", "eighty", "ninety"};
  if (n < 0) return "minus " + number_words(-n);
  if (n < 10) return units[n];
  if (n < 20) return teens[n - 10];
  if (n < 100) {
    std::string out = tens[n / 10];
    if (n % 10) out += std::string(" ") + units[n % 10];
    return out;
  }
  if (n < 1000) {
    std::string out = std::string(units[n / 100]) + " hundred";
    if (n % 100) out += " " + number_words(n % 100);
    return out;
  }
  return std::to_string(n);
}

// --- paraphrase operators -------------------------------------------------
// Mild keeps both matching channels above the anchor thresholds, hard keeps
// the bag of words but breaks the character-level channel, destructive
// removes enough content that no edge survives.

inline std::vector<std::string> paraphrase_mild(std::vector<std::string> words, rng::Rng& r) {
  const int inserts = static_cast<int>(r.range(1, 2));
  for (int i = 0; i < inserts; ++i) {
    const std::size_t at = r.index(words.size() + 1);
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), r.pick(hedges()));
  }
  return words;
}

inline std::vector<std::string> paraphrase_hard(std::vector<std::string> words, rng::Rng& r) {
  const std::size_t mid = words.size() / 2;
  std::vector<std::string> out(words.begin() + static_cast<std::ptrdiff_t>(mid), words.end());
  out.insert(out.end(), words.begin(), words.begin() + static_cast<std::ptrdiff_t>(mid));
  const std::size_t at = r.index(out.size() + 1);
  out.insert(out.begin() + static_cast<std::ptrdiff_t>(at), r.pick(hedges()));
  return out;
}

inline std::vector<std::string> paraphrase_destructive(std::vector<std::string> words,
                                                       rng::Rng& r) {
  // Keep a two-word stub; everything else becomes generic filler.
  std::vector<std::string> out;
  for (std::size_t i = 0; i < words.size(); ++i)
    out.push_back(i < 2 ? words[i] : r.pick(filler_tokens()));
  return out;
}

inline std::string apply_paraphrase(const std::string& text_in, rng::Rng& r, double rate) {
  // The inclusion draw comes first and severity is fixed per stream, so a
  // higher rate strictly grows the paraphrased set without reshuffling it.
  const bool apply = r.uniform() < rate;
  const double severity = r.uniform();
  std::vector<std::string> words = text::split_ws(text_in);
  if (!apply || words.size() < 4) return text_in;
  if (severity < 0.45) words = paraphrase_mild(std::move(words), r);
  else if (severity < 0.80) words = paraphrase_hard(std::move(words), r);
  else words = paraphrase_destructive(std::move(words), r);
  return text::join(words, " ");
}

// ASR-style corruption: adjacent character swaps plus spelled-out numbers
// collapsing to digits and vice versa.
inline std::string apply_noise(const std::string& text_in, rng::Rng& r, double rate) {
  const bool apply = r.uniform() < rate;
  std::vector<std::string> words = text::split_ws(text_in);
  if (!apply) return text_in;
  static const std::map<std::string, std::string> digit_of = {
      {"zero", "0"}, {"one", "1"}, {"two", "2"},   {"three", "3"}, {"four", "4"},
      {"five", "5"}, {"six", "6"}, {"seven", "7"}, {"eight", "8"}, {"nine", "9"}};
  for (auto& w : words) {
    if (!r.chance(0.15)) continue;
    auto it = digit_of.find(w);
    if (it != digit_of.end()) {
      w = it->second;
    } else if (w.size() == 1 && w[0] >= '0' && w[0] <= '9') {
      w = number_words(w[0] - '0');
    } else if (w.size() >= 3) {
      const std::size_t at = 1 + r.index(w.size() - 2);
      std::swap(w[at - 1], w[at]);
    }
  }
  return text::join(words, " ");
}

// --- patient answers --------------------------------------------------------

inline std::string label_for(const schema::CodeLabels& codes, std::int64_t code) {
  for (const auto& [c, label] : codes)
    if (c == code) return label;
  return std::to_string(code);
}

inline std::string scale_answer_text(std::int64_t v, rng::Rng& r) {
  static const std::vector<std::string> lead = {"honestly i would put it at",
                                                "i guess i would say",
                                                "probably around", "for me it lands at"};
  return r.pick(lead) + " " + number_words(v);
}

inline std::string category_answer_text(const std::string& label, rng::Rng& r) {
  static const std::vector<std::string> lead = {"for me it is mostly", "i would call it",
                                                "it is basically"};
  return r.pick(lead) + " " + text::normalize(label);
}

inline std::string measure_answer_text(std::int64_t v, rng::Rng& r) {
  static const std::vector<std::string> lead = {"roughly", "i think about", "it has been about"};
  return r.pick(lead) + " " + number_words(v);
}

inline std::string notes_answer_text(const std::vector<std::string>& present_slots, rng::Rng& r) {
  if (present_slots.empty()) return "nothing much comes to mind on that honestly";
  std::vector<std::string> parts;
  for (const auto& slot : present_slots) {
    std::vector<std::string> slot_words = text::split_ws(slot);
    for (auto& w : slot_words) {
      for (auto& c : w)
        if (c == '_') c = ' ';
    }
    parts.push_back("about the " + text::join(slot_words, " ") + " side there is " +
                    r.pick(filler_tokens()) + " a lot going on");
  }
  return text::join(parts, " and ");
}

struct UtteranceDraft {
  std::string speaker;
  std::string text;
};

struct Builder {
  std::vector<UtteranceDraft> uts;
  int add(const std::string& speaker, const std::string& text_in) {
    uts.push_back({speaker, text_in});
    return static_cast<int>(uts.size()) - 1;
  }
};

inline corpus::Transcript realize(const Builder& b, const std::string& interview_id) {
  corpus::Transcript t;
  t.interview_id = interview_id;
  std::int64_t clock_ms = 0;
  for (std::size_t i = 0; i < b.uts.size(); ++i) {
    corpus::Utterance u;
    u.id = static_cast<int>(i);
    u.speaker = b.uts[i].speaker;
    u.text = b.uts[i].text;
    for (const auto& w : text::split_ws(u.text)) {
      corpus::Word word;
      word.text = w;
      word.start_ms = clock_ms;
      clock_ms += 300;
      word.end_ms = clock_ms;
      u.words.push_back(std::move(word));
    }
    clock_ms += 500;
    t.utterances.push_back(std::move(u));
  }
  return t;
}

}  // namespace detail

// Deterministic corpus generator. One seed fixes the interview text, the
// planted session boundaries, the gold assessment, and a canned provider
// response per request tag (with seeded imperfections so metrics are not
// trivially perfect).
inline SynthResult generate(const SynthSpec& spec, const schema::Schema& sch) {
  SynthResult out;
  const std::string interview_id =
      spec.interview_id.empty() ? "synth-" + std::to_string(spec.seed) : spec.interview_id;

  std::set<std::string> wanted(spec.sections.begin(), spec.sections.end());
  for (const auto& sid : spec.sections)
    if (!sch.find_section(sid)) throw ConfigError("synth spec names unknown section " + sid);

  // Plant gold values for every variable first; rules are computed from the
  // planted inputs so the gold assessment is internally consistent.
  out.gold.interview_id = interview_id;
  std::map<std::string, std::vector<std::string>> present_slots_of;  // notes vars
  for (const auto* var : sch.variables()) {
    if (var->var_type == schema::VarType::rule) continue;
    rng::Rng r = rng::substream(spec.seed, "gold/" + var->var_id);
    switch (var->var_type) {
      case schema::VarType::scale: {
        const auto& range = var->prompt_fields.range;
        out.gold.values[var->var_id] = range[r.index(range.size())].first;
        break;
      }
      case schema::VarType::category: {
        const auto& labels = var->prompt_fields.labels;
        out.gold.values[var->var_id] = labels[r.index(labels.size())].first;
        break;
      }
      case schema::VarType::measure:
        out.gold.values[var->var_id] = r.range(0, 120);
        break;
      case schema::VarType::notes: {
        std::vector<std::string> present;
        std::vector<std::string> lines;
        for (const auto& slot : var->prompt_fields.slots)
          if (r.chance(0.7)) {
            present.push_back(slot);
            lines.push_back(slot + ": notable findings recorded during this visit");
          }
        present_slots_of[var->var_id] = present;
        out.gold.values[var->var_id] = text::join(lines, "\n");
        break;
      }
      default: break;
    }
  }
  std::map<std::string, schema::Value> rule_inputs = out.gold.values;
  for (const auto* var : sch.rules_in_dependency_order()) {
    const schema::Value v = schema::evaluate_rule(*var, rule_inputs);
    rule_inputs[var->var_id] = v;
    out.gold.values[var->var_id] = v;
  }

  // Lay the transcript down section by section.
  detail::Builder b;
  out.truth.interview_id = interview_id;
  {
    rng::Rng r = rng::substream(spec.seed, "opening");
    const int opening = static_cast<int>(r.range(spec.filler_min, spec.filler_max));
    for (int i = 0; i < opening; ++i) b.add("patient", r.pick(detail::smalltalk()));
  }

  for (const auto& section : sch.sections()) {
    segment::SectionSegments truth_sec;
    truth_sec.section_id = section.section_id;
    if (!wanted.empty() && !wanted.count(section.section_id)) {
      out.truth.sections.push_back(std::move(truth_sec));
      continue;
    }
    truth_sec.present = true;

    for (const auto& q : section.questions) {
      rng::Rng rq = rng::substream(spec.seed, "question/" + q.qid);
      if (!q.core) {
        if (rq.uniform() < spec.skip_optional_rate) continue;
      } else {
        rq.uniform();  // keep stream positions identical for core and optional
      }

      rng::Rng rp = rng::substream(spec.seed, "paraphrase/" + q.qid);
      std::string qtext = detail::apply_paraphrase(q.text, rp, spec.paraphrase_rate);
      rng::Rng rn = rng::substream(spec.seed, "noise/q/" + q.qid);
      qtext = detail::apply_noise(qtext, rn, spec.asr_noise_rate);
      const int start = b.add("interviewer", qtext);

      // Patient answers every variable this question feeds.
      rng::Rng ra = rng::substream(spec.seed, "answer/" + q.qid);
      std::vector<std::string> answer_parts;
      for (const auto& var_id : q.variables) {
        const schema::VariableSpec* var = sch.find_variable(var_id);
        if (!var) continue;
        switch (var->var_type) {
          case schema::VarType::scale:
            answer_parts.push_back(detail::scale_answer_text(
                std::get<std::int64_t>(out.gold.values.at(var_id)), ra));
            break;
          case schema::VarType::category:
            answer_parts.push_back(detail::category_answer_text(
                detail::label_for(var->prompt_fields.labels,
                                  std::get<std::int64_t>(out.gold.values.at(var_id))),
                ra));
            break;
          case schema::VarType::measure:
            answer_parts.push_back(detail::measure_answer_text(
                std::get<std::int64_t>(out.gold.values.at(var_id)), ra));
            break;
          case schema::VarType::notes:
            answer_parts.push_back(
                detail::notes_answer_text(present_slots_of.at(var_id), ra));
            break;
          default: break;
        }
      }
      if (answer_parts.empty())
        answer_parts.push_back(ra.pick(detail::smalltalk()));
      std::string atext = text::join(answer_parts, " and ");
      rng::Rng rna = rng::substream(spec.seed, "noise/a/" + q.qid);
      atext = detail::apply_noise(atext, rna, spec.asr_noise_rate);
      b.add("patient", atext);

      rng::Rng rf = rng::substream(spec.seed, "filler/" + q.qid);
      const int filler = static_cast<int>(rf.range(spec.filler_min, spec.filler_max));
      for (int i = 0; i < filler; ++i) b.add("patient", rf.pick(detail::smalltalk()));

      segment::Session sess;
      sess.qid = q.qid;
      sess.start_utt = start;
      truth_sec.sessions.push_back(sess);
    }
    out.truth.sections.push_back(std::move(truth_sec));
  }

  // Close the half-open spans: each session ends where the next one starts,
  // and the very last one at the end of the transcript.
  {
    segment::Session* prev = nullptr;
    for (auto& sec : out.truth.sections)
      for (auto& sess : sec.sessions) {
        if (prev) prev->end_utt = sess.start_utt;
        prev = &sess;
      }
    if (prev) prev->end_utt = static_cast<int>(b.uts.size());
  }

  out.transcript = detail::realize(b, interview_id);

  // Canned provider responses, keyed the way the assessment layer tags its
  // requests. Seeded deviations keep accuracy, bias, and recall off 1.0.
  out.mock_answers = Json::object();
  for (const auto* var : sch.variables()) {
    if (var->var_type == schema::VarType::rule) continue;
    if (!wanted.empty() && !wanted.count(var->section_id)) continue;
    rng::Rng r = rng::substream(spec.seed, "mock/" + var->var_id);
    const std::string tag = interview_id + "/" + var->var_id;
    switch (var->var_type) {
      case schema::VarType::scale: {
        std::int64_t v = std::get<std::int64_t>(out.gold.values.at(var->var_id));
        if (r.chance(0.05)) {
          out.mock_answers[tag] = Json{{"reason", "insufficient detail"}, {"answer", nullptr}};
          break;
        }
        if (r.chance(0.2)) {
          const auto& range = var->prompt_fields.range;
          const std::int64_t lo = range.front().first, hi = range.back().first;
          v = std::min(hi, std::max(lo, v + (r.chance(0.5) ? 1 : -1)));
        }
        out.mock_answers[tag] = Json{{"reason", "rated from the interview"}, {"answer", v}};
        break;
      }
      case schema::VarType::category: {
        std::int64_t v = std::get<std::int64_t>(out.gold.values.at(var->var_id));
        if (r.chance(0.1)) v = var->prompt_fields.labels[r.index(var->prompt_fields.labels.size())].first;
        out.mock_answers[tag] = Json{{"reason", "category from the interview"}, {"answer", v}};
        break;
      }
      case schema::VarType::measure: {
        std::int64_t v = std::get<std::int64_t>(out.gold.values.at(var->var_id));
        if (r.chance(0.2)) v = std::max<std::int64_t>(0, v + r.range(-2, 2));
        out.mock_answers[tag] = Json{{"reason", "duration from the interview"}, {"answer", v}};
        break;
      }
      case schema::VarType::notes: {
        const auto& present = present_slots_of.at(var->var_id);
        const std::set<std::string> present_set(present.begin(), present.end());
        Json gold_fill = Json::object();
        Json pred_fill = Json::object();
        for (const auto& slot : var->prompt_fields.slots) {
          const bool gold_present = present_set.count(slot) > 0;
          bool pred_present = gold_present;
          if (r.chance(0.1)) pred_present = !pred_present;
          gold_fill[slot] = gold_present ? "documented in the note" : "";
          pred_fill[slot] = pred_present ? "mentioned during the interview" : "";
          out.mock_answers[tag + "/slot/" + slot] =
              Json{{"reason", "checked the formatted data"},
                   {"answer", pred_present ? "yes" : "no"}};
        }
        out.mock_answers[tag + "/nsf_gold"] = gold_fill;
        out.mock_answers[tag + "/nsf_pred"] = pred_fill;
        break;
      }
      default: break;
    }
  }

  return out;
}

}  // namespace ivpipe::synth
