// SPDX-License-Identifier: Apache-2.0
//
// Native expression and statement parser.

#include <cctype>
#include <cerrno>
#include <cstdlib>

#include "loopforge/error.hpp"
#include "loopforge/expr.hpp"

namespace loopforge {

namespace {

enum class Tok { ident, integer, number, symbol, end };

struct Token {
  Tok kind;
  std::string text;
  std::size_t offset;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (ident_start(c)) {
      while (i < s.size() && ident_char(s[i])) ++i;
      out.push_back({Tok::ident, std::string(s.substr(start, i - start)), start});
      continue;
    }
    if (digit(c) || (c == '.' && i + 1 < s.size() && digit(s[i + 1]))) {
      bool is_float = false;
      while (i < s.size() && digit(s[i])) ++i;
      if (i < s.size() && s[i] == '.') {
        is_float = true;
        ++i;
        while (i < s.size() && digit(s[i])) ++i;
      }
      if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
        if (j < s.size() && digit(s[j])) {
          is_float = true;
          i = j;
          while (i < s.size() && digit(s[i])) ++i;
        }
      }
      if (i < s.size() && s[i] == 'f' && is_float) ++i;
      if (i < s.size() && ident_char(s[i]))
        throw ParseError("malformed number", start);
      out.push_back({is_float ? Tok::number : Tok::integer, std::string(s.substr(start, i - start)),
                     start});
      continue;
    }
    static const char* two[] = {"**", "<=", ">=", "==", "!=", ":=", "<>"};
    std::string sym;
    for (const char* t : two)
      if (s.substr(i, 2) == t) sym = t;
    if (sym.empty()) {
      static const std::string one = "+-*/()[],<>=${}:!";
      if (one.find(c) == std::string::npos)
        throw ParseError(std::string("unexpected character '") + c + "'", start);
      sym = std::string(1, c);
    }
    i += sym.size();
    out.push_back({Tok::symbol, sym, start});
  }
  out.push_back({Tok::end, "", s.size()});
  return out;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  Token next() { return toks_[pos_++]; }
  bool at(std::string_view sym) const {
    return peek().kind == Tok::symbol && peek().text == sym;
  }
  bool at_end() const { return peek().kind == Tok::end; }
  std::size_t pos() const { return pos_; }

  [[noreturn]] void fail(const std::string& what) const {
    const Token& t = peek();
    throw ParseError(what + " but found " +
                         (t.kind == Tok::end ? std::string("end of input") : "'" + t.text + "'"),
                     t.offset);
  }
  void expect(std::string_view sym) {
    if (!at(sym)) fail("expected '" + std::string(sym) + "'");
    ++pos_;
  }
  std::string ident() {
    if (peek().kind != Tok::ident) fail("expected an identifier");
    return next().text;
  }

  // expr := 'not' expr | cmp
  ExprPtr expr() {
    if (peek().kind == Tok::ident && peek().text == "not") {
      next();
      return unop(UnOp::lnot, expr());
    }
    return comparison();
  }

  ExprPtr comparison() {
    ExprPtr l = additive();
    static const std::pair<const char*, CmpOp> ops[] = {{"<", CmpOp::lt},  {"<=", CmpOp::le},
                                                        {">", CmpOp::gt},  {">=", CmpOp::ge},
                                                        {"==", CmpOp::eq}, {"!=", CmpOp::ne}};
    for (const auto& [sym, op] : ops) {
      if (!at(sym)) continue;
      next();
      ExprPtr r = additive();
      for (const auto& [s2, _] : ops)
        if (at(s2)) fail("comparison chains are not supported; expected end of comparison");
      return compare(op, l, r);
    }
    return l;
  }

  ExprPtr additive() {
    ExprPtr e = multiplicative();
    while (at("+") || at("-")) {
      BinOp op = next().text == "+" ? BinOp::add : BinOp::sub;
      e = binop(op, e, multiplicative());
    }
    return e;
  }

  ExprPtr multiplicative() {
    ExprPtr e = unary();
    while (at("*") || at("/")) {
      BinOp op = next().text == "*" ? BinOp::mul : BinOp::div;
      e = binop(op, e, unary());
    }
    return e;
  }

  ExprPtr unary() {
    if (at("-")) {
      next();
      // Negated literals fold, so "-66.742" is a single literal.
      return unop(UnOp::neg, unary());
    }
    if (at("+")) {
      next();
      return unary();
    }
    return power();
  }

  ExprPtr power() {
    ExprPtr base = primary();
    if (at("**")) {
      next();
      return binop(BinOp::pow, base, unary());
    }
    return base;
  }

  std::vector<ExprPtr> arg_list(std::string_view close) {
    std::vector<ExprPtr> args;
    if (at(close)) return args;
    while (true) {
      args.push_back(expr());
      if (!at(",")) break;
      next();
    }
    return args;
  }

  ExprPtr primary() {
    const Token& t = peek();
    if (t.kind == Tok::integer) {
      Token n = next();
      errno = 0;
      long long v = std::strtoll(n.text.c_str(), nullptr, 10);
      if (errno != 0) throw ParseError("integer literal out of range", n.offset);
      return int_lit(v);
    }
    if (t.kind == Tok::number) {
      Token n = next();
      std::string text = n.text;
      std::optional<DType> type;
      if (text.back() == 'f') {
        text.pop_back();
        type = DType::f32;
      }
      return float_lit(std::strtod(text.c_str(), nullptr), type);
    }
    if (at("(")) {
      next();
      ExprPtr e = expr();
      expect(")");
      return e;
    }
    if (t.kind != Tok::ident) fail("expected an expression");
    Token name = next();
    if (name.text == "not" || name.text == "and" || name.text == "or")
      throw ParseError("unexpected keyword '" + name.text + "'", name.offset);
    std::optional<std::string> tag;
    if (at("$")) {
      next();
      if (peek().kind != Tok::ident) fail("expected an invocation tag after '$'");
      tag = next().text;
      if (!at("(")) fail("expected '(' after tagged rule name");
    }
    if (at("[")) {
      std::size_t open = peek().offset;
      next();
      auto idx = arg_list("]");
      expect("]");
      if (idx.empty()) throw ParseError("empty subscript on '" + name.text + "'", open);
      return subscript(name.text, std::move(idx));
    }
    if (at("(")) {
      next();
      auto args = arg_list(")");
      expect(")");
      if (tag) return rule_call(name.text, tag, std::move(args));
      if ((name.text == "sum" || name.text == "product") && args.size() == 2 &&
          args[0]->kind == ExprKind::var)
        return reduction(name.text == "sum" ? RedOp::sum : RedOp::product, args[0]->name, args[1]);
      return call(name.text, std::move(args));
    }
    return var(name.text);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

std::set<std::string> split_list(const std::string& v) {
  std::set<std::string> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    std::size_t end = v.find(':', start);
    if (end == std::string::npos) end = v.size();
    std::string item = v.substr(start, end - start);
    if (!item.empty()) out.insert(item);
    start = end + 1;
  }
  return out;
}

// Parses "{key=value, ...}" where values are ':'-joined identifier lists.
InstructionOptions parse_options(Parser& p) {
  InstructionOptions opts;
  p.expect("{");
  while (!p.at("}")) {
    std::size_t key_offset = p.peek().offset;
    std::string key = p.ident();
    p.expect("=");
    std::string value;
    while (!p.at(",") && !p.at("}")) {
      if (p.at_end()) p.fail("expected '}'");
      value += p.next().text;
    }
    if (key == "id") {
      opts.id = value;
    } else if (key == "tags") {
      opts.tags = split_list(value);
    } else if (key == "dep") {
      opts.deps = split_list(value);
    } else if (key == "inames") {
      opts.inames = split_list(value);
    } else if (key == "if") {
      std::set<Predicate> preds;
      for (const auto& item : split_list(value)) {
        if (item[0] == '!')
          preds.insert({item.substr(1), true});
        else
          preds.insert({item, false});
      }
      opts.predicates = preds;
    } else {
      throw ParseError("unknown instruction option '" + key + "'", key_offset);
    }
    if (p.at(",")) p.next();
  }
  p.expect("}");
  return opts;
}

// Index of the first top-level token with the given text, or npos.
std::size_t find_top_level(const std::vector<Token>& toks, std::string_view sym) {
  int depth = 0;
  for (std::size_t k = 0; k < toks.size(); ++k) {
    const auto& t = toks[k];
    if (t.kind != Tok::symbol) continue;
    if (t.text == "(" || t.text == "[" || t.text == "{") ++depth;
    if (t.text == ")" || t.text == "]" || t.text == "}") --depth;
    if (depth == 0 && t.text == sym) return k;
  }
  return std::string::npos;
}

}  // namespace

ExprPtr parse_expr(std::string_view text) {
  Parser p(lex(text));
  ExprPtr e = p.expr();
  if (!p.at_end()) p.fail("expected end of expression");
  return e;
}

Statement parse_statement(std::string_view text) {
  auto toks = lex(text);
  Statement out;

  std::size_t def = find_top_level(toks, ":=");
  if (def != std::string::npos) {
    Parser p(toks);
    SubstitutionRule rule;
    if (p.peek().kind != Tok::ident)
      throw ParseError("':=' needs a rule name on its left", p.peek().offset);
    rule.name = p.next().text;
    if (p.at("(")) {
      p.next();
      while (!p.at(")")) {
        std::size_t off = p.peek().offset;
        std::string param = p.ident();
        for (const auto& q : rule.params)
          if (q == param) throw ParseError("duplicate rule parameter '" + param + "'", off);
        rule.params.push_back(param);
        if (!p.at(",")) break;
        p.next();
      }
      p.expect(")");
    }
    if (!p.at(":=")) throw ParseError("':=' needs a rule name on its left", toks[0].offset);
    p.next();
    rule.body = p.expr();
    if (!p.at_end()) p.fail("expected end of rule body");
    out.rule = RuleStmt{std::move(rule)};
    return out;
  }

  InstructionStmt insn;
  std::size_t first = 0;
  if (toks[0].kind == Tok::symbol && (toks[0].text == "<>" || toks[0].text == "<")) {
    insn.is_temporary_decl = true;
    if (toks[0].text == "<>") {
      first = 1;
    } else {
      if (toks.size() < 3 || toks[1].kind != Tok::ident || toks[2].text != ">")
        throw ParseError("expected '<dtype>' before the temporary name", toks[0].offset);
      insn.temporary_type = parse_dtype(toks[1].text);
      if (!insn.temporary_type)
        throw ParseError("unknown dtype '" + toks[1].text + "'", toks[1].offset);
      first = 3;
    }
  }
  std::vector<Token> rest(toks.begin() + static_cast<std::ptrdiff_t>(first), toks.end());
  std::size_t eq = find_top_level(rest, "=");
  if (eq == std::string::npos)
    throw ParseError("expected an assignment 'lhs = rhs' or a rule 'name := expr'",
                     rest.empty() ? 0 : rest.back().offset);
  std::vector<Token> lhs_toks(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(eq));
  lhs_toks.push_back({Tok::end, "", rest[eq].offset});
  Parser lp(lhs_toks);
  if (lp.at_end()) throw ParseError("missing assignment target", rest[eq].offset);
  std::size_t lhs_off = lp.peek().offset;
  insn.lhs = lp.expr();
  if (!lp.at_end()) lp.fail("expected '='");
  if (insn.lhs->kind != ExprKind::var && insn.lhs->kind != ExprKind::subscript)
    throw ParseError("cannot assign to '" + render(insn.lhs) + "'", lhs_off);
  if (insn.is_temporary_decl && insn.lhs->kind != ExprKind::var)
    throw ParseError("a '<>' temporary must be declared with a plain name", lhs_off);

  std::vector<Token> rhs_toks(rest.begin() + static_cast<std::ptrdiff_t>(eq) + 1, rest.end());
  Parser rp(rhs_toks);
  if (rp.at_end()) rp.fail("expected an expression after '='");
  insn.rhs = rp.expr();
  if (rp.at("{")) insn.options = parse_options(rp);
  if (!rp.at_end()) rp.fail("expected end of statement");
  out.instruction = std::move(insn);
  return out;
}

std::vector<std::pair<int, std::string>> logical_lines(std::string_view body) {
  std::vector<std::pair<int, std::string>> out;
  std::string pending;
  int pending_line = 0;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= body.size()) {
    std::size_t end = body.find('\n', start);
    if (end == std::string_view::npos) end = body.size();
    std::string line(body.substr(start, end - start));
    start = end + 1;
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    bool cont = !line.empty() && line.back() == '\\';
    if (cont) line.pop_back();
    if (pending.empty()) pending_line = line_no;
    if (!line.empty()) pending += (pending.empty() ? "" : " ") + line;
    if (!cont) {
      auto first = pending.find_first_not_of(" \t\r");
      if (first != std::string::npos) out.emplace_back(pending_line, pending.substr(first));
      pending.clear();
    }
    if (end == body.size()) break;
  }
  if (!pending.empty()) out.emplace_back(pending_line, pending);
  return out;
}

}  // namespace loopforge
