#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "ivpipe/errors.hpp"
#include "ivpipe/jsonio.hpp"
#include "ivpipe/text.hpp"

namespace ivpipe::schema {

enum class VarType { scale, category, measure, notes, rule };

inline std::string to_string(VarType t) {
  switch (t) {
    case VarType::scale: return "scale";
    case VarType::category: return "category";
    case VarType::measure: return "measure";
    case VarType::notes: return "notes";
    case VarType::rule: return "rule";
  }
  return "?";
}

inline VarType var_type_from_string(const std::string& s, const std::string& where) {
  if (s == "scale") return VarType::scale;
  if (s == "category") return VarType::category;
  if (s == "measure") return VarType::measure;
  if (s == "notes") return VarType::notes;
  if (s == "rule") return VarType::rule;
  throw SchemaError(where + ": unknown var_type \"" + s + "\"");
}

// A prediction or gold value: integer codes and counts, real measures, or
// free text for notes.
using Value = std::variant<std::int64_t, double, std::string>;

inline bool is_numeric(const Value& v) { return !std::holds_alternative<std::string>(v); }

inline double as_double(const Value& v) {
  if (std::holds_alternative<std::int64_t>(v)) return static_cast<double>(std::get<std::int64_t>(v));
  if (std::holds_alternative<double>(v)) return std::get<double>(v);
  throw RangeError("text value used where a number is required");
}

inline Json value_to_json(const Value& v) {
  if (std::holds_alternative<std::int64_t>(v)) return std::get<std::int64_t>(v);
  if (std::holds_alternative<double>(v)) return std::get<double>(v);
  return std::get<std::string>(v);
}

inline Value value_from_json(const Json& j, const std::string& where) {
  if (j.is_number_integer()) return Value{j.get<std::int64_t>()};
  if (j.is_number_float()) return Value{j.get<double>()};
  if (j.is_string()) return Value{j.get<std::string>()};
  throw SchemaError(where + ": value must be a number or a string");
}

// Labeled integer codes, kept sorted by code.
using CodeLabels = std::vector<std::pair<std::int64_t, std::string>>;

struct PromptFields {
  std::string keywords;
  std::string symptom;
  std::vector<std::string> attributes;
  CodeLabels range;   // scale points or rule result range
  CodeLabels labels;  // category codes
  std::string value_type;  // measure answer description, e.g. "an integer ..."
  std::vector<std::string> slots;  // notes slots, possibly empty before induction
};

struct VariableSpec {
  std::string var_id;
  VarType var_type = VarType::scale;
  std::string section_id;
  PromptFields prompt_fields;
  std::string rule_expr;             // rule variables only
  std::vector<std::string> related;  // inputs of a rule variable
  bool scale_groupable = false;
};

struct Question {
  std::string qid;
  std::string text;
  bool core = false;
  std::string parent;    // qid of the question this follows up on, or empty
  bool recurrent = false;
  std::vector<std::string> variables;  // variable ids this question feeds
};

struct QuestionSet {
  std::string section_id;
  std::vector<Question> questions;
  std::vector<VariableSpec> variables;
};

// ---------------------------------------------------------------------------
// Rule expressions
//
// Grammar (documented in README):
//   expr   := or
//   or     := and ("or" and)*
//   and    := cmp ("and" cmp)*
//   cmp    := add (("=="|"!="|">="|"<="|">"|"<") add)?
//   add    := mul (("+"|"-") mul)*
//   mul    := unary ("*" unary)*
//   unary  := "-" unary | primary
//   primary:= number | ident | ident "(" expr ("," expr)* ")" | "(" expr ")"
//           | "if" expr "then" expr "else" expr
// Functions: min, max, abs, floor, ceil, round, clamp(x, lo, hi),
//            lookup(key, k1, v1, ..., default).
// Booleans are numbers: comparisons yield 1 or 0, "and"/"or" treat nonzero
// as true.
// ---------------------------------------------------------------------------
namespace rule {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { literal, ref, unary_minus, binary, call, conditional };
  Kind kind = Kind::literal;
  double number = 0.0;        // literal
  std::string name;           // ref name, call name, or binary operator
  std::vector<ExprPtr> args;  // operands
};

namespace detail {

struct Token {
  enum class Kind { number, ident, op, end };
  Kind kind = Kind::end;
  std::string text;
  double number = 0.0;
};

inline std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto fail = [&](const std::string& msg) {
    throw SchemaError("rule expression: " + msg + " at offset " + std::to_string(i));
  };
  while (i < src.size()) {
    const unsigned char c = src[i];
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (std::isdigit(c)) {
      std::size_t j = i;
      while (j < src.size() && (std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == '.'))
        ++j;
      out.push_back({Token::Kind::number, src.substr(i, j - i), std::stod(src.substr(i, j - i))});
      i = j;
      continue;
    }
    if (std::isalpha(c) || c == '_') {
      std::size_t j = i;
      while (j < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_'))
        ++j;
      out.push_back({Token::Kind::ident, src.substr(i, j - i), 0.0});
      i = j;
      continue;
    }
    static const char* two[] = {"==", "!=", ">=", "<="};
    bool matched = false;
    for (const char* op : two) {
      if (src.compare(i, 2, op) == 0) {
        out.push_back({Token::Kind::op, op, 0.0});
        i += 2;
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (std::string("+-*<>(),").find(static_cast<char>(c)) != std::string::npos) {
      out.push_back({Token::Kind::op, std::string(1, static_cast<char>(c)), 0.0});
      ++i;
      continue;
    }
    fail(std::string("unexpected character '") + static_cast<char>(c) + "'");
  }
  out.push_back({Token::Kind::end, "", 0.0});
  return out;
}

class Parser {
 public:
  explicit Parser(const std::string& src) : toks_(lex(src)) {}

  ExprPtr parse() {
    ExprPtr e = parse_or();
    if (!at_end()) fail("trailing input \"" + cur().text + "\"");
    return e;
  }

 private:
  const Token& cur() const { return toks_[pos_]; }
  bool at_end() const { return cur().kind == Token::Kind::end; }
  void advance() { ++pos_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw SchemaError("rule expression: " + msg);
  }

  bool accept_op(const std::string& s) {
    if (cur().kind == Token::Kind::op && cur().text == s) {
      advance();
      return true;
    }
    return false;
  }

  bool accept_word(const std::string& s) {
    if (cur().kind == Token::Kind::ident && cur().text == s) {
      advance();
      return true;
    }
    return false;
  }

  void expect_op(const std::string& s) {
    if (!accept_op(s)) fail("expected \"" + s + "\"");
  }

  static ExprPtr make_binary(std::string op, ExprPtr lhs, ExprPtr rhs) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::binary;
    e->name = std::move(op);
    e->args = {std::move(lhs), std::move(rhs)};
    return e;
  }

  ExprPtr parse_or() {
    ExprPtr e = parse_and();
    while (accept_word("or")) e = make_binary("or", e, parse_and());
    return e;
  }

  ExprPtr parse_and() {
    ExprPtr e = parse_cmp();
    while (accept_word("and")) e = make_binary("and", e, parse_cmp());
    return e;
  }

  ExprPtr parse_cmp() {
    ExprPtr e = parse_add();
    for (const char* op : {"==", "!=", ">=", "<=", ">", "<"}) {
      if (accept_op(op)) return make_binary(op, e, parse_add());
    }
    return e;
  }

  ExprPtr parse_add() {
    ExprPtr e = parse_mul();
    while (true) {
      if (accept_op("+"))
        e = make_binary("+", e, parse_mul());
      else if (accept_op("-"))
        e = make_binary("-", e, parse_mul());
      else
        return e;
    }
  }

  ExprPtr parse_mul() {
    ExprPtr e = parse_unary();
    while (accept_op("*")) e = make_binary("*", e, parse_unary());
    return e;
  }

  ExprPtr parse_unary() {
    if (accept_op("-")) {
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::unary_minus;
      e->args = {parse_unary()};
      return e;
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    if (cur().kind == Token::Kind::number) {
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::literal;
      e->number = cur().number;
      advance();
      return e;
    }
    if (accept_op("(")) {
      ExprPtr e = parse_or();
      expect_op(")");
      return e;
    }
    if (accept_word("if")) {
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::conditional;
      e->args.push_back(parse_or());
      if (!accept_word("then")) fail("expected \"then\"");
      e->args.push_back(parse_or());
      if (!accept_word("else")) fail("expected \"else\"");
      e->args.push_back(parse_or());
      return e;
    }
    if (cur().kind == Token::Kind::ident) {
      const std::string name = cur().text;
      if (name == "then" || name == "else" || name == "and" || name == "or")
        fail("keyword \"" + name + "\" used as a value");
      advance();
      if (accept_op("(")) {
        auto e = std::make_shared<Expr>();
        e->kind = Expr::Kind::call;
        e->name = name;
        if (!accept_op(")")) {
          e->args.push_back(parse_or());
          while (accept_op(",")) e->args.push_back(parse_or());
          expect_op(")");
        }
        validate_call(*e);
        return e;
      }
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::ref;
      e->name = name;
      return e;
    }
    fail("expected a value");
  }

  void validate_call(const Expr& e) const {
    const std::size_t n = e.args.size();
    if (e.name == "min" || e.name == "max") {
      if (n < 2) fail(e.name + " needs at least two arguments");
    } else if (e.name == "abs" || e.name == "floor" || e.name == "ceil" || e.name == "round") {
      if (n != 1) fail(e.name + " takes exactly one argument");
    } else if (e.name == "clamp") {
      if (n != 3) fail("clamp takes exactly three arguments");
    } else if (e.name == "lookup") {
      if (n < 2 || n % 2 != 0)
        fail("lookup takes a key, key/value pairs, and a default");
    } else {
      fail("unknown function \"" + e.name + "\"");
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

inline void collect_refs(const ExprPtr& e, std::set<std::string>& out) {
  if (e->kind == Expr::Kind::ref) out.insert(e->name);
  for (const auto& a : e->args) collect_refs(a, out);
}

}  // namespace detail

inline ExprPtr parse(const std::string& src) { return detail::Parser(src).parse(); }

inline std::vector<std::string> references(const ExprPtr& e) {
  std::set<std::string> refs;
  detail::collect_refs(e, refs);
  return {refs.begin(), refs.end()};
}

inline double evaluate(const ExprPtr& e, const std::map<std::string, double>& env) {
  switch (e->kind) {
    case Expr::Kind::literal:
      return e->number;
    case Expr::Kind::ref: {
      auto it = env.find(e->name);
      if (it == env.end()) throw MissingDependency("no value for \"" + e->name + "\"");
      return it->second;
    }
    case Expr::Kind::unary_minus:
      return -evaluate(e->args[0], env);
    case Expr::Kind::conditional:
      return evaluate(e->args[0], env) != 0.0 ? evaluate(e->args[1], env)
                                              : evaluate(e->args[2], env);
    case Expr::Kind::binary: {
      // short-circuit forms first
      if (e->name == "and")
        return (evaluate(e->args[0], env) != 0.0 && evaluate(e->args[1], env) != 0.0) ? 1.0 : 0.0;
      if (e->name == "or")
        return (evaluate(e->args[0], env) != 0.0 || evaluate(e->args[1], env) != 0.0) ? 1.0 : 0.0;
      const double a = evaluate(e->args[0], env);
      const double b = evaluate(e->args[1], env);
      if (e->name == "+") return a + b;
      if (e->name == "-") return a - b;
      if (e->name == "*") return a * b;
      if (e->name == "==") return a == b ? 1.0 : 0.0;
      if (e->name == "!=") return a != b ? 1.0 : 0.0;
      if (e->name == ">=") return a >= b ? 1.0 : 0.0;
      if (e->name == "<=") return a <= b ? 1.0 : 0.0;
      if (e->name == ">") return a > b ? 1.0 : 0.0;
      if (e->name == "<") return a < b ? 1.0 : 0.0;
      throw SchemaError("rule expression: unknown operator " + e->name);
    }
    case Expr::Kind::call: {
      std::vector<double> v;
      v.reserve(e->args.size());
      for (const auto& a : e->args) v.push_back(evaluate(a, env));
      if (e->name == "min") return *std::min_element(v.begin(), v.end());
      if (e->name == "max") return *std::max_element(v.begin(), v.end());
      if (e->name == "abs") return std::fabs(v[0]);
      if (e->name == "floor") return std::floor(v[0]);
      if (e->name == "ceil") return std::ceil(v[0]);
      if (e->name == "round") return std::round(v[0]);
      if (e->name == "clamp") return std::min(std::max(v[0], v[1]), v[2]);
      if (e->name == "lookup") {
        for (std::size_t i = 1; i + 1 < v.size(); i += 2)
          if (v[0] == v[i]) return v[i + 1];
        return v.back();  // default
      }
      throw SchemaError("rule expression: unknown function " + e->name);
    }
  }
  throw SchemaError("rule expression: unreachable");
}

}  // namespace rule

// ---------------------------------------------------------------------------
// Scale grouping: collapse a 0..4 severity score to none / mild / clinical.
// ---------------------------------------------------------------------------
enum class ScaleGroup { g0 = 0, g1 = 1, g2plus = 2 };

inline ScaleGroup group_scale(std::int64_t v) {
  if (v < 0 || v > 4)
    throw RangeError("scale value " + std::to_string(v) + " outside 0..4");
  if (v == 0) return ScaleGroup::g0;
  if (v == 1) return ScaleGroup::g1;
  return ScaleGroup::g2plus;
}

inline std::string to_string(ScaleGroup g) {
  switch (g) {
    case ScaleGroup::g0: return "g0";
    case ScaleGroup::g1: return "g1";
    case ScaleGroup::g2plus: return "g2plus";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// JSON decoding
// ---------------------------------------------------------------------------
namespace detail {

inline CodeLabels code_labels_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": must map integer codes to labels");
  CodeLabels out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::int64_t code = 0;
    try {
      std::size_t used = 0;
      code = std::stoll(it.key(), &used);
      if (used != it.key().size()) throw std::invalid_argument(it.key());
    } catch (const std::exception&) {
      throw SchemaError(where + ": code \"" + it.key() + "\" is not an integer");
    }
    if (!it.value().is_string())
      throw SchemaError(where + ": label for code " + it.key() + " must be a string");
    out.emplace_back(code, it.value().get<std::string>());
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].first == out[i - 1].first)
      throw SchemaError(where + ": duplicate code " + std::to_string(out[i].first));
  return out;
}

inline std::vector<std::string> string_list(const Json& j, const std::string& where) {
  if (!j.is_array()) throw SchemaError(where + ": must be an array of strings");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) throw SchemaError(where + ": must be an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace detail

inline VariableSpec variable_from_json(const Json& j, const std::string& where) {
  VariableSpec v;
  v.var_id = jsonio::require_string(j, "var_id", where);
  const std::string ctx = where + " variable " + v.var_id;
  v.var_type = var_type_from_string(jsonio::require_string(j, "var_type", ctx), ctx);
  v.section_id = jsonio::require_string(j, "section_id", ctx);
  if (j.contains("prompt_fields")) {
    const Json& p = j.at("prompt_fields");
    if (!p.is_object()) throw SchemaError(ctx + ": prompt_fields must be an object");
    if (p.contains("keywords")) v.prompt_fields.keywords = p.at("keywords").get<std::string>();
    if (p.contains("symptom")) v.prompt_fields.symptom = p.at("symptom").get<std::string>();
    if (p.contains("value_type"))
      v.prompt_fields.value_type = p.at("value_type").get<std::string>();
    if (p.contains("attributes"))
      v.prompt_fields.attributes = detail::string_list(p.at("attributes"), ctx + ".attributes");
    if (p.contains("range"))
      v.prompt_fields.range = detail::code_labels_from_json(p.at("range"), ctx + ".range");
    if (p.contains("labels"))
      v.prompt_fields.labels = detail::code_labels_from_json(p.at("labels"), ctx + ".labels");
    if (p.contains("slots"))
      v.prompt_fields.slots = detail::string_list(p.at("slots"), ctx + ".slots");
  }
  if (j.contains("rule_expr")) v.rule_expr = j.at("rule_expr").get<std::string>();
  if (j.contains("related")) v.related = detail::string_list(j.at("related"), ctx + ".related");
  if (j.contains("scale_groupable")) v.scale_groupable = j.at("scale_groupable").get<bool>();

  if (v.var_type == VarType::rule) {
    if (v.rule_expr.empty()) throw SchemaError(ctx + ": rule variable without rule_expr");
    if (v.related.empty()) throw SchemaError(ctx + ": rule variable without related inputs");
    auto ast = rule::parse(v.rule_expr);
    std::set<std::string> allowed(v.related.begin(), v.related.end());
    for (const auto& r : rule::references(ast))
      if (!allowed.count(r))
        throw SchemaError(ctx + ": rule references \"" + r + "\" not listed in related");
  } else {
    if (!v.rule_expr.empty()) throw SchemaError(ctx + ": rule_expr on a non-rule variable");
  }
  if (v.var_type == VarType::scale && v.prompt_fields.range.empty())
    throw SchemaError(ctx + ": scale variable without a range");
  if (v.var_type == VarType::category && v.prompt_fields.labels.empty())
    throw SchemaError(ctx + ": category variable without labels");
  if (v.scale_groupable) {
    if (v.var_type != VarType::scale)
      throw SchemaError(ctx + ": scale_groupable on a non-scale variable");
    for (const auto& [code, label] : v.prompt_fields.range) {
      (void)label;
      if (code < 0 || code > 4)
        throw SchemaError(ctx + ": groupable scale code " + std::to_string(code) +
                          " outside 0..4");
    }
  }
  return v;
}

inline QuestionSet question_set_from_json(const Json& j, const std::string& where) {
  QuestionSet qs;
  qs.section_id = jsonio::require_string(j, "section_id", where);
  const std::string ctx = where + " section " + qs.section_id;
  const Json& questions = jsonio::require(j, "questions", ctx);
  if (!questions.is_array()) throw SchemaError(ctx + ": questions must be an array");
  for (const auto& qj : questions) {
    Question q;
    q.qid = jsonio::require_string(qj, "qid", ctx);
    q.text = jsonio::require_string(qj, "text", ctx + " question " + q.qid);
    if (qj.contains("core")) q.core = qj.at("core").get<bool>();
    if (qj.contains("parent") && !qj.at("parent").is_null())
      q.parent = qj.at("parent").get<std::string>();
    if (qj.contains("recurrent")) q.recurrent = qj.at("recurrent").get<bool>();
    if (qj.contains("variables"))
      q.variables = detail::string_list(qj.at("variables"), ctx + " question " + q.qid);
    qs.questions.push_back(std::move(q));
  }
  if (j.contains("variables")) {
    const Json& vars = j.at("variables");
    if (!vars.is_array()) throw SchemaError(ctx + ": variables must be an array");
    for (const auto& vj : vars) qs.variables.push_back(variable_from_json(vj, ctx));
  }
  return qs;
}

// ---------------------------------------------------------------------------
// A loaded, validated schema with lookup indexes.
// ---------------------------------------------------------------------------
class Schema {
 public:
  Schema() = default;

  explicit Schema(std::vector<QuestionSet> sections) : sections_(std::move(sections)) {
    validate_and_index();
  }

  const std::vector<QuestionSet>& sections() const { return sections_; }

  const QuestionSet* find_section(const std::string& section_id) const {
    auto it = section_index_.find(section_id);
    return it == section_index_.end() ? nullptr : &sections_[it->second];
  }

  const VariableSpec* find_variable(const std::string& var_id) const {
    auto it = var_index_.find(var_id);
    return it == var_index_.end() ? nullptr : it->second;
  }

  const Question* find_question(const std::string& qid) const {
    auto it = question_index_.find(qid);
    return it == question_index_.end() ? nullptr : it->second;
  }

  // All variables in section order, then declaration order.
  std::vector<const VariableSpec*> variables() const {
    std::vector<const VariableSpec*> out;
    for (const auto& s : sections_)
      for (const auto& v : s.variables) out.push_back(&v);
    return out;
  }

  // Questions of a section feeding the given variable, in section order.
  std::vector<const Question*> questions_for_variable(const std::string& var_id) const {
    std::vector<const Question*> out;
    auto it = var_index_.find(var_id);
    if (it == var_index_.end()) return out;
    const QuestionSet* sec = find_section(it->second->section_id);
    if (!sec) return out;
    for (const auto& q : sec->questions)
      if (std::find(q.variables.begin(), q.variables.end(), var_id) != q.variables.end())
        out.push_back(&q);
    return out;
  }

  // Walks parent links to the enclosing core question; returns the qid or
  // empty when the chain dead-ends.
  std::string core_ancestor(const std::string& qid) const {
    const Question* q = find_question(qid);
    std::size_t hops = 0;
    while (q && !q->core && !q->parent.empty() && hops++ < question_index_.size())
      q = find_question(q->parent);
    return q && q->core ? q->qid : std::string{};
  }

  // Rule variables in dependency order: every variable appears after all of
  // its related inputs.
  std::vector<const VariableSpec*> rules_in_dependency_order() const {
    std::vector<const VariableSpec*> rules;
    for (const auto* v : variables())
      if (v->var_type == VarType::rule) rules.push_back(v);
    std::stable_sort(rules.begin(), rules.end(),
                     [this](const VariableSpec* a, const VariableSpec* b) {
                       return depth_.at(a->var_id) < depth_.at(b->var_id);
                     });
    return rules;
  }

 private:
  void validate_and_index() {
    for (std::size_t i = 0; i < sections_.size(); ++i) {
      const auto& s = sections_[i];
      if (!section_index_.emplace(s.section_id, i).second)
        throw SchemaError("duplicate section " + s.section_id);
      for (const auto& q : s.questions)
        if (!question_index_.emplace(q.qid, &q).second)
          throw SchemaError("duplicate question " + q.qid);
      for (const auto& v : s.variables) {
        if (!var_index_.emplace(v.var_id, &v).second)
          throw SchemaError("duplicate variable " + v.var_id);
        if (v.section_id != s.section_id)
          throw SchemaError("variable " + v.var_id + " declares section " + v.section_id +
                            " but lives in " + s.section_id);
      }
    }
    for (const auto& s : sections_) {
      for (const auto& q : s.questions) {
        if (!q.parent.empty() && !question_index_.count(q.parent))
          throw SchemaError("question " + q.qid + " has unknown parent " + q.parent);
        for (const auto& vid : q.variables)
          if (!var_index_.count(vid))
            throw SchemaError("question " + q.qid + " feeds unknown variable " + vid);
      }
      for (const auto& q : s.questions)
        if (!q.core && core_ancestor_or_cycle(q.qid).empty())
          throw SchemaError("question " + q.qid + " has no core ancestor");
      for (const auto& v : s.variables)
        for (const auto& r : v.related)
          if (!var_index_.count(r))
            throw SchemaError("variable " + v.var_id + " relates to unknown " + r);
    }
    compute_depths();
  }

  std::string core_ancestor_or_cycle(const std::string& qid) const {
    std::unordered_set<std::string> seen;
    const Question* q = find_question(qid);
    while (q) {
      if (!seen.insert(q->qid).second)
        throw SchemaError("parent cycle through question " + q->qid);
      if (q->core) return q->qid;
      if (q->parent.empty()) return {};
      q = find_question(q->parent);
    }
    return {};
  }

  // Depth-first walk over related edges; a back edge is a dependency cycle
  // and rejected at load.
  void compute_depths() {
    enum class Mark { none, active, done };
    std::unordered_map<std::string, Mark> mark;
    for (const auto& [id, v] : var_index_) {
      (void)v;
      mark[id] = Mark::none;
    }
    std::function<std::size_t(const std::string&)> visit =
        [&](const std::string& id) -> std::size_t {
      if (auto it = depth_.find(id); it != depth_.end()) return it->second;
      if (mark[id] == Mark::active)
        throw SchemaError("rule dependency cycle through variable " + id);
      mark[id] = Mark::active;
      std::size_t d = 0;
      const VariableSpec* v = var_index_.at(id);
      if (v->var_type == VarType::rule)
        for (const auto& r : v->related) d = std::max(d, visit(r) + 1);
      mark[id] = Mark::done;
      depth_[id] = d;
      return d;
    };
    for (const auto& [id, v] : var_index_) {
      (void)v;
      visit(id);
    }
  }

  std::vector<QuestionSet> sections_;
  std::unordered_map<std::string, std::size_t> section_index_;
  std::unordered_map<std::string, const VariableSpec*> var_index_;
  std::unordered_map<std::string, const Question*> question_index_;
  std::unordered_map<std::string, std::size_t> depth_;
};

// Computes a rule variable from the values of its inputs. Inputs missing from
// the map, or present with a non-numeric value, raise MissingDependency; a
// result outside the declared range raises RangeError.
inline Value evaluate_rule(const VariableSpec& var, const std::map<std::string, Value>& values) {
  if (var.var_type != VarType::rule)
    throw SchemaError("evaluate_rule on non-rule variable " + var.var_id);
  auto ast = rule::parse(var.rule_expr);
  std::map<std::string, double> env;
  for (const auto& name : var.related) {
    auto it = values.find(name);
    if (it == values.end())
      throw MissingDependency(var.var_id + ": no value for input " + name);
    if (!is_numeric(it->second))
      throw MissingDependency(var.var_id + ": input " + name + " is not numeric");
    env[name] = as_double(it->second);
  }
  const double result = rule::evaluate(ast, env);
  if (!var.prompt_fields.range.empty()) {
    const double rounded = std::nearbyint(result);
    const bool integral = rounded == result;
    bool listed = false;
    if (integral)
      for (const auto& [code, label] : var.prompt_fields.range) {
        (void)label;
        if (code == static_cast<std::int64_t>(rounded)) listed = true;
      }
    if (!listed)
      throw RangeError(var.var_id + ": rule result " + std::to_string(result) +
                       " outside the declared range");
  }
  const double rounded = std::nearbyint(result);
  if (rounded == result && std::fabs(result) < 9.0e15)
    return Value{static_cast<std::int64_t>(rounded)};
  return Value{result};
}

}  // namespace ivpipe::schema
