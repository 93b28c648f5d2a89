// SPDX-License-Identifier: Apache-2.0
//
// Parser for isl-style set text and assumption text.

#include <cctype>
#include <set>

#include "loopforge/error.hpp"
#include "loopforge/polyset.hpp"

namespace loopforge::poly {

namespace {

enum class Tok { ident, integer, symbol, end };

struct Token {
  Tok kind;
  std::string text;
  std::size_t offset;
};

std::vector<Token> lex(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_'))
        ++i;
      out.push_back({Tok::ident, std::string(text.substr(start, i - start)), start});
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
      out.push_back({Tok::integer, std::string(text.substr(start, i - start)), start});
    } else {
      std::string sym(1, c);
      if ((c == '<' || c == '>' || c == '=' || c == '!') && i + 1 < text.size() &&
          text[i + 1] == '=')
        sym += '=';
      i += sym.size();
      static const std::string allowed = "{}[]:,()+-*<>=";
      if (sym.size() == 1 && allowed.find(c) == std::string::npos)
        throw ParseError("unexpected character '" + sym + "'", start);
      out.push_back({Tok::symbol, sym, start});
    }
  }
  out.push_back({Tok::end, "", text.size()});
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(lex(text)) {}

  const Token& peek() const { return toks_[pos_]; }
  Token next() { return toks_[pos_++]; }
  bool at_symbol(std::string_view s) const {
    return peek().kind == Tok::symbol && peek().text == s;
  }
  bool at_ident(std::string_view s) const {
    return peek().kind == Tok::ident && peek().text == s;
  }
  void expect(std::string_view s) {
    if (!at_symbol(s))
      throw ParseError("expected '" + std::string(s) + "' but found '" + describe(peek()) + "'",
                       peek().offset);
    ++pos_;
  }
  static std::string describe(const Token& t) {
    return t.kind == Tok::end ? "end of input" : t.text;
  }
  bool at_end() const { return peek().kind == Tok::end; }

  void note_ident(const std::string& name) {
    if (seen_.insert(name).second) order_.push_back(name);
  }
  const std::vector<std::string>& identifiers() const { return order_; }

  // affine := term (('+'|'-') term)*
  AffineExpr affine() {
    AffineExpr e = term();
    while (at_symbol("+") || at_symbol("-")) {
      bool minus = next().text == "-";
      AffineExpr t = term();
      e += minus ? -t : t;
    }
    return e;
  }

  // term := factor ('*' factor)*
  AffineExpr term() {
    std::size_t start = peek().offset;
    AffineExpr e = factor();
    while (at_symbol("*")) {
      next();
      AffineExpr f = factor();
      if (e.is_constant())
        e = f * e.constant();
      else if (f.is_constant())
        e = e * f.constant();
      else
        throw ParseError("non-affine term: product of two variables", start);
    }
    return e;
  }

  AffineExpr factor() {
    const Token& t = peek();
    if (t.kind == Tok::symbol && t.text == "-") {
      next();
      return -factor();
    }
    if (t.kind == Tok::symbol && t.text == "(") {
      next();
      AffineExpr e = affine();
      expect(")");
      return e;
    }
    if (t.kind == Tok::integer) {
      Token n = next();
      AffineExpr e(std::stoll(n.text));
      // isl allows "2i" for 2*i.
      if (peek().kind == Tok::ident && !is_keyword(peek().text)) {
        Token v = next();
        note_ident(v.text);
        e = AffineExpr::variable(v.text, e.constant());
      }
      return e;
    }
    if (t.kind == Tok::ident && !is_keyword(t.text)) {
      Token v = next();
      note_ident(v.text);
      return AffineExpr::variable(v.text);
    }
    throw ParseError("expected an affine expression but found '" + describe(t) + "'", t.offset);
  }

  static bool is_keyword(std::string_view s) { return s == "and" || s == "or" || s == "mod"; }

  // chain := group (cmp group)+ ; group := affine (',' affine)*
  std::vector<Constraint> chain() {
    std::vector<std::vector<AffineExpr>> groups;
    std::vector<std::string> ops;
    groups.push_back(group());
    while (peek().kind == Tok::symbol &&
           (peek().text == "<" || peek().text == "<=" || peek().text == ">" ||
            peek().text == ">=" || peek().text == "=" || peek().text == "==")) {
      ops.push_back(next().text);
      groups.push_back(group());
    }
    if (ops.empty())
      throw ParseError("expected a comparison but found '" + describe(peek()) + "'",
                       peek().offset);
    std::vector<Constraint> out;
    for (std::size_t k = 0; k < ops.size(); ++k) {
      for (const auto& a : groups[k]) {
        for (const auto& b : groups[k + 1]) {
          const std::string& op = ops[k];
          if (op == "<=")
            out.push_back(Constraint::ge0(b - a));
          else if (op == "<")
            out.push_back(Constraint::ge0(b - a - AffineExpr(1)));
          else if (op == ">=")
            out.push_back(Constraint::ge0(a - b));
          else if (op == ">")
            out.push_back(Constraint::ge0(a - b - AffineExpr(1)));
          else
            out.push_back(Constraint::eq0(a - b));
        }
      }
    }
    return out;
  }

  std::vector<AffineExpr> group() {
    std::vector<AffineExpr> g{affine()};
    while (at_symbol(",")) {
      next();
      g.push_back(affine());
    }
    return g;
  }

  std::vector<Constraint> conjunction() {
    std::vector<Constraint> cs = chain();
    while (at_ident("and")) {
      next();
      auto more = chain();
      cs.insert(cs.end(), more.begin(), more.end());
    }
    if (at_ident("or"))
      throw ParseError("unions ('or') are not supported", peek().offset);
    return cs;
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::set<std::string> seen_;
  std::vector<std::string> order_;
};

}  // namespace

BasicSet parse_set(std::string_view text) {
  Parser p(text);
  p.expect("{");
  p.expect("[");
  std::vector<std::string> dims;
  std::set<std::string> dim_set;
  if (!p.at_symbol("]")) {
    while (true) {
      const Token& t = p.peek();
      if (t.kind != Tok::ident) throw ParseError("expected an iname", t.offset);
      if (!dim_set.insert(t.text).second)
        throw ParseError("duplicate iname '" + t.text + "'", t.offset);
      dims.push_back(p.next().text);
      if (!p.at_symbol(",")) break;
      p.next();
    }
  }
  p.expect("]");
  std::vector<Constraint> cs;
  if (p.at_symbol(":")) {
    p.next();
    cs = p.conjunction();
  }
  p.expect("}");
  if (!p.at_end()) throw ParseError("trailing text after set", p.peek().offset);

  std::vector<std::string> params;
  for (const auto& name : p.identifiers())
    if (!dim_set.count(name)) params.push_back(name);
  return BasicSet(std::move(dims), std::move(params), std::move(cs));
}

std::vector<Constraint> parse_constraint_text(std::string_view text) {
  Parser p(text);
  auto cs = p.conjunction();
  if (!p.at_end()) throw ParseError("trailing text after constraint", p.peek().offset);
  return cs;
}

std::optional<Assumptions::Divisibility> try_parse_divisibility(std::string_view text) {
  Parser p(text);
  AffineExpr e = p.affine();
  if (!p.at_ident("mod")) return std::nullopt;
  p.next();
  const Token& m = p.peek();
  if (m.kind != Tok::integer) throw ParseError("expected an integer modulus", m.offset);
  std::int64_t modulus = std::stoll(p.next().text);
  if (!(p.at_symbol("=") || p.at_symbol("=="))) throw ParseError("expected '= 0'", p.peek().offset);
  p.next();
  const Token& z = p.peek();
  if (z.kind != Tok::integer || z.text != "0")
    throw ParseError("only 'mod K = 0' facts are supported", z.offset);
  p.next();
  if (!p.at_end()) throw ParseError("trailing text after assumption", p.peek().offset);
  if (modulus < 2) throw ParseError("modulus must be at least 2", m.offset);
  return Assumptions::Divisibility{std::move(e), modulus};
}

Assumptions::Divisibility parse_divisibility(std::string_view text) {
  auto d = try_parse_divisibility(text);
  if (!d) throw ParseError("expected 'expr mod K = 0'", 0);
  return *d;
}

}  // namespace loopforge::poly
