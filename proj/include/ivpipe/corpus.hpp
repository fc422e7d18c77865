#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ivpipe/errors.hpp"
#include "ivpipe/jsonio.hpp"
#include "ivpipe/schema.hpp"
#include "ivpipe/text.hpp"

namespace ivpipe::corpus {

enum class Source { diarized, verbatim, merged };

inline std::string to_string(Source s) {
  switch (s) {
    case Source::diarized: return "diarized";
    case Source::verbatim: return "verbatim";
    case Source::merged: return "merged";
  }
  return "?";
}

inline Source source_from_string(const std::string& s, const std::string& where) {
  if (s == "diarized") return Source::diarized;
  if (s == "verbatim") return Source::verbatim;
  if (s == "merged") return Source::merged;
  throw SchemaError(where + ": unknown source \"" + s + "\"");
}

struct Word {
  std::string text;
  std::optional<std::int64_t> start_ms;
  std::optional<std::int64_t> end_ms;
};

struct Utterance {
  int id = 0;
  std::string speaker;  // empty on verbatim-only transcripts
  std::string text;
  std::vector<Word> words;
};

struct Transcript {
  std::string interview_id;
  Source source = Source::merged;
  std::vector<Utterance> utterances;
};

inline Transcript transcript_from_json(const Json& j, const std::string& where) {
  Transcript t;
  t.interview_id = jsonio::require_string(j, "interview_id", where);
  const std::string ctx = where + " interview " + t.interview_id;
  t.source = source_from_string(jsonio::require_string(j, "source", ctx), ctx);
  const Json& utts = jsonio::require(j, "utterances", ctx);
  if (!utts.is_array()) throw SchemaError(ctx + ": utterances must be an array");
  int expected_id = 0;
  for (const auto& uj : utts) {
    Utterance u;
    u.id = static_cast<int>(jsonio::require_int(uj, "id", ctx));
    if (u.id != expected_id++)
      throw SchemaError(ctx + ": utterance ids must be dense and ascending, got " +
                        std::to_string(u.id) + " where " + std::to_string(expected_id - 1) +
                        " was expected");
    u.speaker = jsonio::require_string(uj, "speaker", ctx);
    u.text = jsonio::require_string(uj, "text", ctx);
    if (uj.contains("words")) {
      const Json& words = uj.at("words");
      if (!words.is_array()) throw SchemaError(ctx + ": words must be an array");
      for (const auto& wj : words) {
        Word w;
        w.text = jsonio::require_string(wj, "text", ctx);
        if (wj.contains("start_ms") && !wj.at("start_ms").is_null())
          w.start_ms = wj.at("start_ms").get<std::int64_t>();
        if (wj.contains("end_ms") && !wj.at("end_ms").is_null())
          w.end_ms = wj.at("end_ms").get<std::int64_t>();
        u.words.push_back(std::move(w));
      }
    }
    if (u.words.empty()) {
      // no word detail supplied: fall back to plain whitespace tokens
      for (const auto& tok : text::split_ws(u.text)) u.words.push_back({tok, {}, {}});
    }
    t.utterances.push_back(std::move(u));
  }
  return t;
}

inline Json transcript_to_json(const Transcript& t) {
  Json j;
  j["interview_id"] = t.interview_id;
  j["source"] = to_string(t.source);
  Json utts = Json::array();
  for (const auto& u : t.utterances) {
    Json uj;
    uj["id"] = u.id;
    uj["speaker"] = u.speaker;
    uj["text"] = u.text;
    Json words = Json::array();
    for (const auto& w : u.words) {
      Json wj;
      wj["text"] = w.text;
      if (w.start_ms) wj["start_ms"] = *w.start_ms;
      if (w.end_ms) wj["end_ms"] = *w.end_ms;
      words.push_back(std::move(wj));
    }
    uj["words"] = std::move(words);
    utts.push_back(std::move(uj));
  }
  j["utterances"] = std::move(utts);
  return j;
}

inline Transcript parse_transcript(const std::string& path) {
  return transcript_from_json(jsonio::load_file(path), path);
}

inline void write_transcript(const std::string& path, const Transcript& t) {
  jsonio::save_file(path, transcript_to_json(t));
}

// ---------------------------------------------------------------------------
// Question sets
// ---------------------------------------------------------------------------

// The file is either an array of sections or an object with a "sections"
// array. Validation (unique ids, parent links, rule acyclicity) happens in
// the Schema constructor.
inline schema::Schema parse_question_sets(const std::string& path) {
  const Json doc = jsonio::load_file(path);
  const Json* sections = nullptr;
  if (doc.is_array())
    sections = &doc;
  else if (doc.is_object() && doc.contains("sections") && doc.at("sections").is_array())
    sections = &doc.at("sections");
  else
    throw SchemaError(path + ": expected an array of sections");
  std::vector<schema::QuestionSet> sets;
  for (const auto& sj : *sections) sets.push_back(schema::question_set_from_json(sj, path));
  return schema::Schema(std::move(sets));
}

// ---------------------------------------------------------------------------
// Gold assessments
// ---------------------------------------------------------------------------

struct GoldAssessment {
  std::string interview_id;
  std::map<std::string, schema::Value> values;  // var_id -> clinician value
};

namespace detail {

inline schema::Value gold_value(const schema::VariableSpec& var, const Json& j,
                                const std::string& ctx) {
  using schema::VarType;
  auto listed = [](const schema::CodeLabels& codes, std::int64_t v) {
    for (const auto& [code, label] : codes) {
      (void)label;
      if (code == v) return true;
    }
    return false;
  };
  switch (var.var_type) {
    case VarType::scale: {
      if (!j.is_number_integer())
        throw SchemaError(ctx + ": scale value must be an integer");
      const auto v = j.get<std::int64_t>();
      if (!listed(var.prompt_fields.range, v))
        throw SchemaError(ctx + ": scale value " + std::to_string(v) + " not in range");
      return schema::Value{v};
    }
    case VarType::category: {
      if (j.is_number_integer()) {
        const auto v = j.get<std::int64_t>();
        if (!listed(var.prompt_fields.labels, v))
          throw SchemaError(ctx + ": unknown category code " + std::to_string(v));
        return schema::Value{v};
      }
      if (j.is_string()) {
        const std::string want = text::normalize(j.get<std::string>());
        for (const auto& [code, label] : var.prompt_fields.labels)
          if (text::normalize(label) == want) return schema::Value{code};
        throw SchemaError(ctx + ": unknown category label \"" + j.get<std::string>() + "\"");
      }
      throw SchemaError(ctx + ": category value must be a code or a label");
    }
    case VarType::measure: {
      if (j.is_number_integer()) return schema::Value{j.get<std::int64_t>()};
      if (j.is_number_float()) return schema::Value{j.get<double>()};
      throw SchemaError(ctx + ": measure value must be a number");
    }
    case VarType::notes: {
      if (!j.is_string()) throw SchemaError(ctx + ": notes value must be a string");
      return schema::Value{j.get<std::string>()};
    }
    case VarType::rule: {
      if (j.is_number_integer()) {
        const auto v = j.get<std::int64_t>();
        if (!var.prompt_fields.range.empty() && !listed(var.prompt_fields.range, v))
          throw SchemaError(ctx + ": rule value " + std::to_string(v) + " not in range");
        return schema::Value{v};
      }
      if (j.is_number_float()) return schema::Value{j.get<double>()};
      throw SchemaError(ctx + ": rule value must be a number");
    }
  }
  throw SchemaError(ctx + ": unreachable");
}

inline GoldAssessment gold_from_json(const Json& j, const schema::Schema& schema,
                                     const std::string& where) {
  GoldAssessment g;
  g.interview_id = jsonio::require_string(j, "interview_id", where);
  const std::string ctx = where + " interview " + g.interview_id;
  const Json& values = jsonio::require(j, "values", ctx);
  if (!values.is_object()) throw SchemaError(ctx + ": values must be an object");
  for (auto it = values.begin(); it != values.end(); ++it) {
    const schema::VariableSpec* var = schema.find_variable(it.key());
    if (!var) throw SchemaError(ctx + ": unknown variable \"" + it.key() + "\"");
    g.values[it.key()] = gold_value(*var, it.value(), ctx + " variable " + it.key());
  }
  return g;
}

}  // namespace detail

inline std::vector<GoldAssessment> parse_gold(const std::string& path,
                                              const schema::Schema& schema) {
  const Json doc = jsonio::load_file(path);
  std::vector<GoldAssessment> out;
  if (doc.is_array())
    for (const auto& g : doc) out.push_back(detail::gold_from_json(g, schema, path));
  else if (doc.is_object())
    out.push_back(detail::gold_from_json(doc, schema, path));
  else
    throw SchemaError(path + ": expected a gold object or an array of them");
  return out;
}

inline Json gold_to_json(const GoldAssessment& g) {
  Json j;
  j["interview_id"] = g.interview_id;
  Json values = Json::object();
  for (const auto& [var_id, value] : g.values) values[var_id] = schema::value_to_json(value);
  j["values"] = std::move(values);
  return j;
}

}  // namespace ivpipe::corpus
