// SPDX-License-Identifier: Apache-2.0
//
// Transform script language: `target = [lp.]verb(kernel, args..., key=value)`.

#include <algorithm>
#include <cctype>
#include <functional>

#include "loopforge/fortran.hpp"

namespace loopforge {

namespace {

// Lexing -------------------------------------------------------------------------

enum class STok { ident, string, integer, symbol, newline, end };

struct SToken {
  STok kind;
  std::string text;
  std::int64_t value = 0;
  SourceSpan span;
};

std::vector<SToken> lex_script(std::string_view text, int first_line) {
  std::vector<SToken> out;
  int line = first_line, col = 1;
  int depth = 0;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < text.size()) {
    char c = text[i];
    SourceSpan at{line, col};
    if (c == '\n') {
      if (depth == 0 && (out.empty() || out.back().kind != STok::newline)) out.push_back({STok::newline, "newline", 0, at});
      advance(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') advance(1);
      continue;
    }
    if (c == '\\' && i + 1 < text.size() && text[i + 1] == '\n') {
      advance(2);
      continue;
    }
    if (c == '"' || c == '\'') {
      std::string s;
      advance(1);
      while (i < text.size() && text[i] != c) {
        if (text[i] == '\n') throw ParseError("unterminated string", at);
        if (text[i] == '\\' && i + 1 < text.size()) advance(1);
        s += text[i];
        advance(1);
      }
      if (i >= text.size()) throw ParseError("unterminated string", at);
      advance(1);
      out.push_back({STok::string, s, 0, at});
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
      std::size_t j = i + 1;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      if (j < text.size() && (std::isalpha(static_cast<unsigned char>(text[j])) || text[j] == '.' || text[j] == '_'))
        throw ParseError("malformed integer literal", at);
      std::string num(text.substr(i, j - i));
      std::int64_t v = 0;
      try {
        v = std::stoll(num);
      } catch (const std::out_of_range&) {
        throw ParseError("integer literal out of range", at);
      }
      out.push_back({STok::integer, num, v, at});
      advance(j - i);
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
      out.push_back({STok::ident, std::string(text.substr(i, j - i)), 0, at});
      advance(j - i);
      continue;
    }
    if (std::string("=(),.[]").find(c) != std::string::npos) {
      if (c == '(' || c == '[') ++depth;
      if ((c == ')' || c == ']') && depth > 0) --depth;
      out.push_back({STok::symbol, std::string(1, c), 0, at});
      advance(1);
      continue;
    }
    throw ParseError(std::string("unexpected character '") + c + "' in transform script", at);
  }
  if (out.empty() || out.back().kind != STok::newline) out.push_back({STok::newline, "newline", 0, {line, col}});
  out.push_back({STok::end, "end of script", 0, {line, col}});
  return out;
}

class ScriptParser {
 public:
  explicit ScriptParser(std::vector<SToken> toks) : toks_(std::move(toks)) {}

  TransformScript run() {
    TransformScript s;
    for (;;) {
      while (peek().kind == STok::newline) ++pos_;
      if (peek().kind == STok::end) break;
      s.statements.push_back(statement());
    }
    return s;
  }

 private:
  std::vector<SToken> toks_;
  std::size_t pos_ = 0;

  const SToken& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, peek().span); }
  bool at_symbol(std::string_view s) const { return peek().kind == STok::symbol && peek().text == s; }
  void expect_symbol(std::string_view s) {
    if (!at_symbol(s)) fail("expected '" + std::string(s) + "' but found '" + peek().text + "'");
    ++pos_;
  }
  std::string expect_ident(const char* what) {
    if (peek().kind != STok::ident) fail(std::string("expected ") + what + " but found '" + peek().text + "'");
    return toks_[pos_++].text;
  }

  ScriptStatement statement() {
    ScriptStatement st;
    st.span = peek().span;
    st.target = expect_ident("a kernel name");
    expect_symbol("=");
    st.verb = expect_ident("a transform name");
    if (at_symbol(".")) {
      if (st.verb != "lp" && st.verb != "loopy") fail("unknown module prefix '" + st.verb + "'");
      ++pos_;
      st.verb = expect_ident("a transform name");
    }
    expect_symbol("(");
    bool seen_keyword = false;
    while (!at_symbol(")")) {
      if (peek().kind == STok::ident && peek(1).kind == STok::symbol && peek(1).text == "=") {
        std::string key = toks_[pos_].text;
        pos_ += 2;
        for (const auto& [k, v] : st.keywords)
          if (k == key) fail("keyword argument '" + key + "' given twice");
        st.keywords.push_back({key, value()});
        seen_keyword = true;
      } else {
        if (seen_keyword) fail("positional argument after keyword argument");
        st.positional.push_back(value());
      }
      if (at_symbol(",")) {
        ++pos_;
        continue;
      }
      if (!at_symbol(")")) fail("expected ',' or ')' but found '" + peek().text + "'");
    }
    ++pos_;
    if (peek().kind != STok::newline) fail("expected end of statement but found '" + peek().text + "'");
    return st;
  }

  ScriptValue value() {
    const SToken& t = peek();
    switch (t.kind) {
      case STok::string: ++pos_; return ScriptValue{ScriptValue::Kind::string, t.text, 0};
      case STok::integer: ++pos_; return ScriptValue{ScriptValue::Kind::integer, t.text, t.value};
      case STok::ident:
        ++pos_;
        if (t.text == "None") return ScriptValue{ScriptValue::Kind::none, t.text, 0};
        return ScriptValue{ScriptValue::Kind::identifier, t.text, 0};
      case STok::symbol:
        if (t.text == "[") {
          // A list of strings is accepted wherever a comma-joined string is.
          ++pos_;
          std::string joined;
          while (!at_symbol("]")) {
            if (peek().kind != STok::string) fail("list elements must be strings");
            if (!joined.empty()) joined += ",";
            joined += toks_[pos_++].text;
            if (at_symbol(",")) ++pos_;
            else if (!at_symbol("]")) fail("expected ',' or ']'");
          }
          ++pos_;
          return ScriptValue{ScriptValue::Kind::string, joined, 0};
        }
        break;
      default: break;
    }
    fail("expected a string, integer, None or name but found '" + t.text + "'");
  }
};

// Verbs ----------------------------------------------------------------------------

enum class PType { string, integer, opt_string };

struct Param {
  std::vector<std::string> names;  // first is canonical, the rest are aliases
  PType type;
  bool required;
  std::optional<ScriptValue> fallback;
};

using Args = std::vector<ScriptValue>;
using Apply = std::function<Kernel(Kernel, const Args&, TransformLog*)>;

struct Verb {
  std::string name;
  std::vector<Param> params;
  Apply apply;
};

std::optional<std::string> opt(const ScriptValue& v) {
  if (v.kind == ScriptValue::Kind::none) return std::nullopt;
  return v.text;
}

ScriptValue str_default(std::string s) { return ScriptValue{ScriptValue::Kind::string, std::move(s), 0}; }
ScriptValue none_default() { return ScriptValue{ScriptValue::Kind::none, "None", 0}; }

MatchExpr match_of(const std::string& text) {
  try {
    return parse_match(text);
  } catch (const ParseError& e) {
    throw TransformError(std::string("bad match expression '") + text + "': " + e.what());
  }
}

Kernel tag_inames_spec(Kernel k, const std::string& spec, const std::optional<std::string>& tag) {
  if (tag) return tag_inames(std::move(k), spec, *tag);
  for (const auto& item : split_name_list(spec)) {
    auto colon = item.find(':');
    if (colon == std::string::npos) throw TransformError("tag_inames: expected 'iname:tag' but found '" + item + "'");
    auto trim = [](std::string s) {
      while (!s.empty() && s.front() == ' ') s.erase(s.begin());
      while (!s.empty() && s.back() == ' ') s.pop_back();
      return s;
    };
    k = tag_inames(std::move(k), trim(item.substr(0, colon)), trim(item.substr(colon + 1)));
  }
  return k;
}

const std::vector<Verb>& verbs() {
  static const std::vector<Verb> table = {
      {"split_iname",
       {{{"iname"}, PType::string, true, {}},
        {{"factor"}, PType::integer, true, {}},
        {{"outer_tag"}, PType::opt_string, false, none_default()},
        {{"inner_tag"}, PType::opt_string, false, none_default()}},
       [](Kernel k, const Args& a, TransformLog*) {
         return split_iname(std::move(k), a[0].text, a[1].value, opt(a[2]), opt(a[3]));
       }},
      {"assume",
       {{{"assumptions", "text"}, PType::string, true, {}}},
       [](Kernel k, const Args& a, TransformLog*) { return assume(std::move(k), a[0].text); }},
      {"tag_inames",
       {{{"tag_spec", "iname"}, PType::string, true, {}}, {{"tag"}, PType::opt_string, false, none_default()}},
       [](Kernel k, const Args& a, TransformLog*) { return tag_inames_spec(std::move(k), a[0].text, opt(a[1])); }},
      {"tag_instructions",
       {{{"within", "match"}, PType::string, true, {}}, {{"new_tag", "tag"}, PType::string, true, {}}},
       [](Kernel k, const Args& a, TransformLog* log) {
         return tag_instructions(std::move(k), match_of(a[0].text), a[1].text, log);
       }},
      {"extract_subst",
       {{{"subst_name", "name"}, PType::string, true, {}},
        {{"template"}, PType::string, true, {}},
        {{"parameters"}, PType::string, false, str_default("")}},
       [](Kernel k, const Args& a, TransformLog* log) {
         return extract_subst(std::move(k), a[0].text, a[1].text, split_name_list(a[2].text), log);
       }},
      {"wrap_variable_access",
       {{{"var", "variable"}, PType::string, true, {}}, {{"rule_name", "subst_name"}, PType::string, true, {}}},
       [](Kernel k, const Args& a, TransformLog* log) {
         return wrap_variable_access(std::move(k), a[0].text, a[1].text, log);
       }},
      {"temporary_to_subst",
       {{{"temp_name"}, PType::string, true, {}}},
       [](Kernel k, const Args& a, TransformLog*) { return temporary_to_subst(std::move(k), a[0].text); }},
      {"expand_subst",
       {{{"within", "match"}, PType::string, false, str_default("*")}},
       [](Kernel k, const Args& a, TransformLog* log) {
         return expand_subst(std::move(k), match_of(a[0].text), log);
       }},
      {"expand_all_rules", {}, [](Kernel k, const Args&, TransformLog*) { return expand_all_rules(std::move(k)); }},
      {"precompute",
       {{{"subst_use", "rule_match"}, PType::string, true, {}},
        {{"sweep_inames"}, PType::string, true, {}},
        {{"default_tag"}, PType::opt_string, false, none_default()}},
       [](Kernel k, const Args& a, TransformLog* log) {
         return precompute(std::move(k), a[0].text, split_name_list(a[1].text), opt(a[2]), log);
       }},
  };
  return table;
}

const Verb* find_verb(const std::string& name) {
  for (const auto& v : verbs())
    if (v.name == name) return &v;
  return nullptr;
}

std::string kind_name(ScriptValue::Kind k) {
  switch (k) {
    case ScriptValue::Kind::string: return "a string";
    case ScriptValue::Kind::integer: return "an integer";
    case ScriptValue::Kind::none: return "None";
    case ScriptValue::Kind::identifier: return "a name";
  }
  return "?";
}

/// Checks a statement and binds its arguments to the verb's parameters.
Args bind_args(const ScriptStatement& st, const Verb& v, const std::set<std::string>& kernels) {
  auto fail = [&](const std::string& msg) -> void { throw ParseError(st.verb + ": " + msg, st.span); };
  if (st.positional.empty() || st.positional[0].kind != ScriptValue::Kind::identifier)
    fail("the first argument must be a kernel name");
  if (!kernels.count(st.positional[0].text)) fail("unknown kernel '" + st.positional[0].text + "'");
  if (!kernels.count(st.target)) fail("unknown kernel '" + st.target + "' on the left-hand side");
  if (st.positional.size() - 1 > v.params.size())
    fail("takes at most " + std::to_string(v.params.size() + 1) + " positional arguments, got " +
         std::to_string(st.positional.size()));
  std::vector<std::optional<ScriptValue>> slots(v.params.size());
  for (std::size_t i = 1; i < st.positional.size(); ++i) slots[i - 1] = st.positional[i];
  for (const auto& [key, val] : st.keywords) {
    std::size_t idx = v.params.size();
    for (std::size_t p = 0; p < v.params.size(); ++p)
      if (std::find(v.params[p].names.begin(), v.params[p].names.end(), key) != v.params[p].names.end()) idx = p;
    if (idx == v.params.size()) fail("unexpected keyword argument '" + key + "'");
    if (slots[idx]) fail("argument '" + v.params[idx].names[0] + "' given twice");
    slots[idx] = val;
  }
  Args out;
  for (std::size_t p = 0; p < v.params.size(); ++p) {
    const Param& param = v.params[p];
    if (!slots[p]) {
      if (param.required) fail("missing argument '" + param.names[0] + "'");
      out.push_back(*param.fallback);
      continue;
    }
    const ScriptValue& val = *slots[p];
    bool ok = (param.type == PType::string && val.kind == ScriptValue::Kind::string) ||
              (param.type == PType::integer && val.kind == ScriptValue::Kind::integer) ||
              (param.type == PType::opt_string &&
               (val.kind == ScriptValue::Kind::string || val.kind == ScriptValue::Kind::none));
    if (!ok)
      fail("argument '" + param.names[0] + "' must be " +
           (param.type == PType::integer ? "an integer" : param.type == PType::string ? "a string" : "a string or None") +
           ", got " + kind_name(val.kind));
    out.push_back(val);
  }
  return out;
}

}  // namespace

TransformScript parse_transform_script(std::string_view text, int first_line) {
  return ScriptParser(lex_script(text, first_line)).run();
}

std::vector<std::string> script_verbs() {
  std::vector<std::string> out;
  for (const auto& v : verbs()) out.push_back(v.name);
  return out;
}

std::map<std::string, Kernel> run_transform_script(std::map<std::string, Kernel> kernels,
                                                   const TransformScript& script, TransformLog* log) {
  std::set<std::string> names;
  for (const auto& [n, k] : kernels) names.insert(n);
  std::vector<std::pair<const Verb*, Args>> plan;
  for (const auto& st : script.statements) {
    const Verb* v = find_verb(st.verb);
    if (!v) throw ParseError("unknown transform '" + st.verb + "'", st.span);
    plan.push_back({v, bind_args(st, *v, names)});
  }
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& st = script.statements[i];
    try {
      kernels[st.target] = plan[i].first->apply(kernels.at(st.positional[0].text), plan[i].second, log);
    } catch (const TransformError& e) {
      throw TransformError(e.what(), st.span);
    }
  }
  return kernels;
}

Translation translate_fortran(std::string_view source, std::string_view extra_script, int extra_first_line) {
  Translation t;
  t.unit = parse_fortran(source);
  t.warnings = t.unit.warnings;
  t.raw = lower_to_kernel(t.unit, &t.warnings);
  TransformScript all;
  for (const auto& p : t.unit.pragmas)
    if (p.kind == PragmaBlock::Kind::transform) {
      auto part = parse_transform_script(p.payload, p.span.line + 1);
      all.statements.insert(all.statements.end(), part.statements.begin(), part.statements.end());
    }
  if (!extra_script.empty()) {
    auto part = parse_transform_script(extra_script, extra_first_line);
    all.statements.insert(all.statements.end(), part.statements.begin(), part.statements.end());
  }
  TransformLog log;
  auto out = run_transform_script({{t.unit.name, t.raw}}, all, &log);
  t.transformed = out.at(t.unit.name);
  t.warnings.insert(t.warnings.end(), log.warnings.begin(), log.warnings.end());
  return t;
}

Translation translate_native(std::string_view knl_text, std::string_view script, int first_line) {
  Translation t;
  t.raw = parse_knl(knl_text);
  t.transformed = t.raw;
  if (script.empty()) return t;
  TransformLog log;
  auto out = run_transform_script({{t.raw.name, t.raw}}, parse_transform_script(script, first_line), &log);
  t.transformed = out.at(t.raw.name);
  t.warnings = log.warnings;
  return t;
}

}  // namespace loopforge
