// SPDX-License-Identifier: Apache-2.0
//
// Fortran-77 subset parser.

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "loopforge/fortran.hpp"

namespace loopforge {

const FortranDecl* FortranUnit::find_decl(std::string_view n) const {
  for (const auto& d : decls)
    if (d.name == n) return &d;
  return nullptr;
}

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Expressions ------------------------------------------------------------------

enum class Tok { ident, integer, real, symbol, dotop, end };

struct Token {
  Tok kind;
  std::string text;
  int column;
  bool double_exponent = false;
};

class ExprParser {
 public:
  ExprParser(std::string_view text, SourceSpan at) : at_(at) { lex(text); }

  ExprPtr parse_all() {
    ExprPtr e = expr();
    if (peek().kind != Tok::end) fail("unexpected '" + peek().text + "'");
    return e;
  }

 private:
  SourceSpan at_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& msg, int column = -1) const {
    int col = column >= 0 ? column : peek().column;
    throw ParseError(msg, SourceSpan{at_.line, at_.column + col});
  }

  void lex(std::string_view s) {
    std::size_t i = 0;
    auto col = [&](std::size_t p) { return static_cast<int>(p); };
    while (i < s.size()) {
      char c = s[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
        continue;
      }
      std::size_t start = i;
      if (c == '.' && i + 1 < s.size() && std::isalpha(static_cast<unsigned char>(s[i + 1]))) {
        std::size_t j = i + 1;
        while (j < s.size() && std::isalpha(static_cast<unsigned char>(s[j]))) ++j;
        if (j < s.size() && s[j] == '.') {
          toks_.push_back({Tok::dotop, std::string(s.substr(i + 1, j - i - 1)), col(start)});
          i = j + 1;
          continue;
        }
      }
      if (std::isdigit(static_cast<unsigned char>(c)) ||
          (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
        bool real = false, dexp = false;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        // "1.ge.2": the dot belongs to the operator.
        bool dot_op = false;
        if (i < s.size() && s[i] == '.') {
          std::size_t j = i + 1;
          while (j < s.size() && std::isalpha(static_cast<unsigned char>(s[j]))) ++j;
          dot_op = j > i + 1 && j < s.size() && s[j] == '.' &&
                   !(j == i + 2 && (s[i + 1] == 'd' || s[i + 1] == 'e'));
        }
        if (i < s.size() && s[i] == '.' && !dot_op) {
          real = true;
          ++i;
          while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        }
        std::string mant(s.substr(start, i - start));
        std::string exp;
        if (i < s.size() && (s[i] == 'e' || s[i] == 'd')) {
          std::size_t j = i + 1;
          if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
          if (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) {
            real = true;
            dexp = s[i] == 'd';
            std::size_t k = j;
            while (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) ++k;
            exp = "e" + std::string(s.substr(i + 1, k - i - 1));
            i = k;
          }
        }
        if (i < s.size() && ident_char(s[i])) fail("malformed number", col(start));
        toks_.push_back({real ? Tok::real : Tok::integer, mant + exp, col(start), dexp});
        continue;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        while (i < s.size() && ident_char(s[i])) ++i;
        toks_.push_back({Tok::ident, std::string(s.substr(start, i - start)), col(start)});
        continue;
      }
      static const char* two[] = {"**", "<=", ">=", "==", "/=", "=>"};
      std::string sym;
      for (const char* t : two)
        if (s.substr(i, 2) == t) sym = t;
      if (sym == "=>") fail("POINTER assignment is not supported (no pointers)", col(start));
      if (sym.empty()) {
        if (std::string("+-*/(),<>").find(c) == std::string::npos)
          fail(std::string("unexpected character '") + c + "'", col(start));
        sym = std::string(1, c);
      }
      i += sym.size();
      toks_.push_back({Tok::symbol, sym, col(start)});
    }
    toks_.push_back({Tok::end, "end of expression", static_cast<int>(s.size())});
  }

  const Token& peek() const { return toks_[std::min(pos_, toks_.size() - 1)]; }
  bool at(std::string_view sym) const { return peek().kind == Tok::symbol && peek().text == sym; }
  bool at_dot(std::string_view op) const { return peek().kind == Tok::dotop && peek().text == op; }
  void expect(std::string_view sym) {
    if (!at(sym)) fail("expected '" + std::string(sym) + "' but found '" + peek().text + "'");
    ++pos_;
  }

  ExprPtr expr() {
    ExprPtr e = not_expr();
    if (at_dot("and") || at_dot("or") || at_dot("eqv") || at_dot("neqv"))
      fail("logical operator ." + peek().text + ". is not supported; use nested IF blocks");
    return e;
  }

  ExprPtr not_expr() {
    if (at_dot("not")) {
      ++pos_;
      return unop(UnOp::lnot, not_expr());
    }
    return comparison();
  }

  ExprPtr comparison() {
    ExprPtr l = additive();
    static const std::pair<const char*, CmpOp> sym_ops[] = {
        {"<", CmpOp::lt}, {"<=", CmpOp::le}, {">", CmpOp::gt}, {">=", CmpOp::ge}, {"==", CmpOp::eq}, {"/=", CmpOp::ne}};
    static const std::pair<const char*, CmpOp> dot_ops[] = {
        {"lt", CmpOp::lt}, {"le", CmpOp::le}, {"gt", CmpOp::gt}, {"ge", CmpOp::ge}, {"eq", CmpOp::eq}, {"ne", CmpOp::ne}};
    for (const auto& [s, op] : sym_ops)
      if (at(s)) {
        ++pos_;
        return compare(op, l, additive());
      }
    for (const auto& [s, op] : dot_ops)
      if (at_dot(s)) {
        ++pos_;
        return compare(op, l, additive());
      }
    return l;
  }

  ExprPtr additive() {
    ExprPtr e;
    if (at("-") || at("+")) {
      bool neg = peek().text == "-";
      ++pos_;
      e = multiplicative();
      if (neg) e = unop(UnOp::neg, e);
    } else {
      e = multiplicative();
    }
    while (at("+") || at("-")) {
      BinOp op = peek().text == "+" ? BinOp::add : BinOp::sub;
      ++pos_;
      e = binop(op, e, multiplicative());
    }
    return e;
  }

  ExprPtr multiplicative() {
    ExprPtr e = power();
    while (at("*") || at("/")) {
      BinOp op = peek().text == "*" ? BinOp::mul : BinOp::div;
      ++pos_;
      e = binop(op, e, power());
    }
    return e;
  }

  ExprPtr power() {
    ExprPtr base = primary();
    if (at("**")) {
      ++pos_;
      ExprPtr ex;
      if (at("-")) {
        ++pos_;
        ex = unop(UnOp::neg, power());
      } else {
        ex = power();
      }
      return binop(BinOp::pow, base, ex);
    }
    return base;
  }

  ExprPtr primary() {
    Token t = peek();
    switch (t.kind) {
      case Tok::integer:
        ++pos_;
        return int_lit(std::strtoll(t.text.c_str(), nullptr, 10));
      case Tok::real:
        ++pos_;
        return float_lit(std::strtod(t.text.c_str(), nullptr),
                         t.double_exponent ? std::optional<DType>(DType::f64) : std::nullopt);
      case Tok::dotop:
        if (t.text == "true" || t.text == "false") {
          ++pos_;
          return int_lit(t.text == "true" ? 1 : 0);
        }
        fail("unexpected operator ." + t.text + ".");
      case Tok::ident: {
        ++pos_;
        if (!at("(")) return var(t.text);
        ++pos_;
        std::vector<ExprPtr> args;
        if (!at(")"))
          for (;;) {
            if (at(":")) fail("array sections are not supported (no array-level operations)");
            args.push_back(expr());
            if (!at(",")) break;
            ++pos_;
          }
        expect(")");
        return call(t.text, std::move(args));
      }
      case Tok::symbol:
        if (t.text == "(") {
          ++pos_;
          ExprPtr e = expr();
          expect(")");
          return e;
        }
        break;
      case Tok::end: break;
    }
    fail("expected an expression but found '" + t.text + "'");
  }
};

// Source lines ---------------------------------------------------------------

struct Line {
  int number;
  int column;  // column of text[0] in the source line
  std::string text;
  bool comment = false;
};

bool looks_fixed_form(const std::vector<std::string>& raw) {
  bool marker = false;
  for (const auto& l : raw) {
    if (trim(l).empty()) continue;
    char c0 = l[0];
    if (c0 == 'c' || c0 == 'C' || c0 == '*') {
      if (l.size() == 1 || !ident_char(l[1]) || l[1] == ' ') marker = true;
      else return false;
      continue;
    }
    if (c0 == '!') continue;
    if (l.size() > 5 && l[5] != ' ' && trim(l.substr(0, 5)).empty()) marker = true;
    for (std::size_t i = 0; i < std::min<std::size_t>(5, l.size()); ++i)
      if (l[i] != ' ' && !std::isdigit(static_cast<unsigned char>(l[i]))) return false;
  }
  return marker;
}

/// Joins continuation lines; comment lines are kept separately.
std::vector<Line> source_lines(std::string_view src) {
  std::vector<std::string> raw;
  std::size_t start = 0;
  while (start <= src.size()) {
    std::size_t end = src.find('\n', start);
    if (end == std::string_view::npos) end = src.size();
    std::string l(src.substr(start, end - start));
    if (!l.empty() && l.back() == '\r') l.pop_back();
    for (auto& c : l)
      if (c == '\t') c = ' ';
    raw.push_back(l);
    if (end == src.size()) break;
    start = end + 1;
  }
  bool fixed = looks_fixed_form(raw);
  std::vector<Line> out;
  bool continuing = false;
  for (std::size_t n = 0; n < raw.size(); ++n) {
    std::string l = raw[n];
    int number = static_cast<int>(n) + 1;
    if (fixed && !l.empty() && (l[0] == 'c' || l[0] == 'C' || l[0] == '*')) l[0] = '!';
    if (fixed && l.size() > 5 && l[5] != ' ' && l[5] != '0' && trim(l.substr(0, 5)).empty() && l[0] != '!') {
      if (out.empty() || out.back().comment) throw ParseError("continuation line without a statement", SourceSpan{number, 6});
      out.back().text += " " + l.substr(6);
      continue;
    }
    std::size_t first = l.find_first_not_of(' ');
    if (first == std::string::npos) {
      continuing = false;
      continue;
    }
    if (l[first] == '!') {
      out.push_back({number, static_cast<int>(first) + 1, l.substr(first), true});
      continue;
    }
    std::size_t bang = l.find('!');
    if (bang != std::string::npos && (l.find('\'') == std::string::npos || l.find('\'') > bang) &&
        (l.find('"') == std::string::npos || l.find('"') > bang))
      l = l.substr(0, bang);
    std::string body = l.substr(first);
    while (!body.empty() && body.back() == ' ') body.pop_back();
    bool cont = !body.empty() && body.back() == '&';
    if (cont) body.pop_back();
    if (continuing && !out.empty()) {
      std::string t = trim(body);
      if (!t.empty() && t[0] == '&') t = t.substr(1);
      out.back().text += " " + t;
    } else {
      out.push_back({number, static_cast<int>(first) + 1, body, false});
    }
    continuing = cont;
  }
  return out;
}

// Statements ------------------------------------------------------------------

struct Restriction {
  const char* word;
  const char* message;
};

const Restriction kRestricted[] = {
    {"exit", "EXIT is not supported: no early exits from loops"},
    {"cycle", "CYCLE is not supported: no early exits from loop iterations"},
    {"return", "RETURN is not supported: no early exits from the subroutine"},
    {"entry", "ENTRY is not supported: no mid-subroutine entry points"},
    {"call", "CALL is not supported: no calls to other subroutines"},
    {"common", "COMMON is not supported: no COMMON data"},
    {"save", "SAVE is not supported: no SAVE data"},
    {"goto", "GOTO is not supported: only structured control flow"},
    {"stop", "STOP is not supported: no early exits from the subroutine"},
    {"pause", "PAUSE is not supported: no I/O"},
    {"read", "I/O statement READ is not supported: no I/O"},
    {"write", "I/O statement WRITE is not supported: no I/O"},
    {"print", "I/O statement PRINT is not supported: no I/O"},
    {"open", "I/O statement OPEN is not supported: no I/O"},
    {"close", "I/O statement CLOSE is not supported: no I/O"},
    {"inquire", "I/O statement INQUIRE is not supported: no I/O"},
    {"rewind", "I/O statement REWIND is not supported: no I/O"},
    {"backspace", "I/O statement BACKSPACE is not supported: no I/O"},
    {"endfile", "I/O statement ENDFILE is not supported: no I/O"},
    {"format", "I/O statement FORMAT is not supported: no I/O"},
    {"pointer", "POINTER is not supported: no pointers"},
    {"allocatable", "ALLOCATABLE is not supported: no dynamic memory management"},
    {"allocate", "ALLOCATE is not supported: no dynamic memory management"},
    {"deallocate", "DEALLOCATE is not supported: no dynamic memory management"},
    {"nullify", "NULLIFY is not supported: no pointers"},
    {"equivalence", "EQUIVALENCE is not supported"},
    {"data", "DATA statements are not supported"},
    {"function", "FUNCTION subprograms are not supported: translation acts on a single subroutine"},
    {"program", "PROGRAM units are not supported: translation acts on a single subroutine"},
    {"module", "MODULE units are not supported: translation acts on a single subroutine"},
    {"where", "WHERE is not supported: no array-level assignments"},
    {"forall", "FORALL is not supported: no array-level assignments"},
    {"select", "SELECT CASE is not supported: only IF/THEN/ELSE control flow"},
    {"while", "DO WHILE is not supported: only counted DO loops"},
    {"type", "derived types are not supported"},
};

std::string first_word(const std::string& s) {
  std::size_t i = 0;
  while (i < s.size() && (std::isalpha(static_cast<unsigned char>(s[i])) || s[i] == '_' ||
                          (i > 0 && std::isdigit(static_cast<unsigned char>(s[i])))))
    ++i;
  return s.substr(0, i);
}

/// Position just after the parenthesis matching s[open].
std::size_t match_paren(const std::string& s, std::size_t open, SourceSpan at) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    if (s[i] == ')' && --depth == 0) return i + 1;
  }
  throw ParseError("unbalanced parentheses", SourceSpan{at.line, at.column + static_cast<int>(open)});
}

/// Index of a top-level '=' that is an assignment, or npos.
std::size_t assignment_eq(const std::string& s) {
  int depth = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c != '=' || depth != 0) continue;
    char prev = i ? s[i - 1] : ' ';
    char next = i + 1 < s.size() ? s[i + 1] : ' ';
    if (prev == '<' || prev == '>' || prev == '=' || prev == '/' || next == '=' || next == '>') continue;
    return i;
  }
  return std::string::npos;
}

std::vector<std::string> split_top_level(const std::string& s, char sep) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == sep && depth == 0) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

class UnitParser {
 public:
  explicit UnitParser(std::string_view src) : lines_(source_lines(src)) {}

  FortranUnit run() {
    enum class Phase { before, inside, after } phase = Phase::before;
    std::vector<Frame> stack;
    std::vector<std::string> tags;
    std::optional<PragmaBlock> transform;
    for (const auto& line : lines_) {
      SourceSpan at{line.number, line.column};
      if (line.comment) {
        std::string t = lower(trim(line.text));
        if (t.rfind("!$loopy", 0) == 0) {
          directive(trim(t.substr(7)), at, tags, transform, phase == Phase::inside);
          continue;
        }
        if (transform) {
          std::string p = line.text.substr(1);
          transform->payload += p + "\n";
        }
        continue;
      }
      if (transform)
        throw ParseError("Fortran statement inside a transform block", at);
      std::string s = lower(line.text);
      std::string word = first_word(s);
      if (phase == Phase::before) {
        if (word != "subroutine") {
          check_restricted(s, word, at);
          throw ParseError("expected SUBROUTINE", at);
        }
        subroutine_header(s, at);
        phase = Phase::inside;
        stack.push_back(Frame{Frame::Kind::unit, {}, at});
        continue;
      }
      if (phase == Phase::after) {
        if (word == "subroutine")
          throw ParseError("only one subroutine per translation unit is supported", at);
        check_restricted(s, word, at);
        throw ParseError("statement after the end of the subroutine", at);
      }
      if (statement(s, word, at, stack, tags)) phase = Phase::after;
    }
    if (transform) throw ParseError("unterminated '!$loopy begin transform' block", transform->span);
    if (!tags.empty()) throw ParseError("unterminated '!$loopy begin tagged: " + tags.back() + "' block", SourceSpan{});
    if (phase == Phase::before) throw ParseError("no SUBROUTINE found", SourceSpan{1, 1});
    if (phase == Phase::inside) throw ParseError("missing END for subroutine '" + unit_.name + "'", stack.back().span);
    return std::move(unit_);
  }

 private:
  struct Frame {
    enum class Kind { unit, do_loop, if_then, if_else };
    Kind kind;
    FortranStmt stmt;
    SourceSpan span;
  };

  std::vector<Line> lines_;
  FortranUnit unit_;

  void directive(const std::string& d, SourceSpan at, std::vector<std::string>& tags,
                 std::optional<PragmaBlock>& transform, bool inside) {
    if (d == "begin transform") {
      if (transform) throw ParseError("nested transform block", at);
      transform = PragmaBlock{PragmaBlock::Kind::transform, "", "", at};
      return;
    }
    if (d == "end transform") {
      if (!transform) throw ParseError("'!$loopy end transform' without a matching begin", at);
      unit_.pragmas.push_back(*transform);
      transform.reset();
      return;
    }
    auto tag_of = [&](std::size_t skip) {
      std::string t = trim(d.substr(skip));
      if (t.empty() || !std::all_of(t.begin(), t.end(), ident_char))
        throw ParseError("malformed tag in '!$loopy " + d + "'", at);
      return t;
    };
    if (d.rfind("begin tagged:", 0) == 0) {
      if (!inside) throw ParseError("tagged block outside the subroutine body", at);
      std::string t = tag_of(13);
      tags.push_back(t);
      unit_.pragmas.push_back(PragmaBlock{PragmaBlock::Kind::tagged, t, "", at});
      return;
    }
    if (d.rfind("end tagged:", 0) == 0) {
      std::string t = tag_of(11);
      if (tags.empty() || tags.back() != t)
        throw ParseError("'!$loopy end tagged: " + t + "' does not close the innermost tagged block", at);
      tags.pop_back();
      return;
    }
    throw ParseError("unknown directive '!$loopy " + d + "'", at);
  }

  static void check_restricted(const std::string& s, const std::string& word, SourceSpan at) {
    std::string w = word;
    if (w == "go" && first_word(trim(s.substr(2))) == "to") w = "goto";
    if (w == "do" && first_word(trim(s.substr(2))) == "while") w = "while";
    if (w == "select" || w == "selectcase") w = "select";
    if (w == "type" && s.find('(') != std::string::npos && s.find("::") == std::string::npos &&
        assignment_eq(s) == std::string::npos)
      w = "type";
    else if (w == "type" && assignment_eq(s) != std::string::npos)
      return;
    for (const auto& r : kRestricted)
      if (w == r.word) {
        // Names like "read" may be ordinary variables being assigned.
        if (assignment_eq(s) != std::string::npos && w != "goto" && w != "where" && w != "forall" &&
            s.find('(') > assignment_eq(s) && first_word(s) == s.substr(0, w.size()) &&
            trim(s.substr(w.size())).rfind("=", 0) == 0)
          return;
        throw ParseError(r.message, at);
      }
    if (word == "double" || word == "real" || word == "integer" || word == "logical")
      if (s.find("pointer") != std::string::npos) throw ParseError("POINTER is not supported: no pointers", at);
  }

  void subroutine_header(const std::string& s, SourceSpan at) {
    std::string rest = trim(s.substr(10));
    std::string name = first_word(rest);
    if (name.empty()) throw ParseError("expected a subroutine name", at);
    unit_.name = name;
    rest = trim(rest.substr(name.size()));
    if (rest.empty()) return;
    if (rest.front() != '(' || rest.back() != ')') throw ParseError("malformed argument list", at);
    for (auto& a : split_top_level(rest.substr(1, rest.size() - 2), ',')) {
      std::string n = trim(a);
      if (n.empty()) continue;
      if (!std::all_of(n.begin(), n.end(), ident_char)) throw ParseError("malformed argument '" + n + "'", at);
      unit_.args.push_back(n);
    }
  }

  std::vector<FortranStmt>& target(std::vector<Frame>& stack) {
    Frame& f = stack.back();
    return f.kind == Frame::Kind::if_else ? f.stmt.else_body : f.stmt.body;
  }

  ExprPtr parse_expr_at(const std::string& text, SourceSpan at, std::size_t offset) {
    return ExprParser(text, SourceSpan{at.line, at.column + static_cast<int>(offset)}).parse_all();
  }

  /// Returns true at the END of the subroutine.
  bool statement(std::string s, std::string word, SourceSpan at, std::vector<Frame>& stack,
                 const std::vector<std::string>& tags) {
    // Statement labels are ignored.
    if (!s.empty() && std::isdigit(static_cast<unsigned char>(s[0]))) {
      std::size_t i = 0;
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
      std::string rest = trim(s.substr(i));
      at.column += static_cast<int>(s.size() - rest.size());
      s = rest;
      word = first_word(s);
    }
    std::string tail = trim(s.substr(word.size()));

    if (word == "end" || word == "endsubroutine" || word == "enddo" || word == "endif") {
      std::string what = word == "enddo" ? "do" : word == "endif" ? "if" : word == "endsubroutine" ? "subroutine" : first_word(tail);
      if (what.empty() || what == "subroutine") {
        if (stack.size() != 1) throw ParseError("END of subroutine inside an open block", at);
        unit_.body = std::move(stack.back().stmt.body);
        stack.pop_back();
        return true;
      }
      if (what == "do") {
        if (stack.back().kind != Frame::Kind::do_loop) throw ParseError("END DO without a matching DO", at);
        FortranStmt st = std::move(stack.back().stmt);
        stack.pop_back();
        target(stack).push_back(std::move(st));
        return false;
      }
      if (what == "if") {
        if (stack.back().kind != Frame::Kind::if_then && stack.back().kind != Frame::Kind::if_else)
          throw ParseError("END IF without a matching IF", at);
        close_if(stack);
        return false;
      }
      throw ParseError("unknown END statement", at);
    }
    check_restricted(s, word, at);
    if (assignment_eq(s) != std::string::npos && word != "do" && word != "if" &&
        !(word == "else" || word == "elseif")) {
      assignment(s, at, stack, tags);
      return false;
    }
    if (word == "implicit") {
      if (trim(tail) != "none") throw ParseError("only IMPLICIT NONE is supported", at);
      unit_.implicit_none = true;
      return false;
    }
    if (word == "continue") return false;
    if (word == "real" || word == "integer" || word == "double" || word == "doubleprecision") {
      declaration(s, word, at);
      return false;
    }
    if (word == "dimension" || word == "parameter" || word == "external" || word == "intrinsic" ||
        word == "logical" || word == "character" || word == "complex")
      throw ParseError(word + " statements are not supported", at);
    if (word == "do") {
      do_statement(tail, at, s.size() - tail.size(), stack, tags);
      return false;
    }
    if (word == "if") {
      if_statement(s, at, stack, tags);
      return false;
    }
    if (word == "else" || word == "elseif") {
      Frame& f = stack.back();
      if (f.kind != Frame::Kind::if_then) throw ParseError("ELSE without a matching IF", at);
      std::string rest = word == "elseif" ? "if" + s.substr(6) : tail;
      if (rest.empty()) {
        f.kind = Frame::Kind::if_else;
        return false;
      }
      if (first_word(rest) != "if") throw ParseError("malformed ELSE statement", at);
      // ELSE IF: a nested block in the else branch closed together with its parent.
      f.kind = Frame::Kind::if_else;
      if_statement(rest, at, stack, tags);
      stack.back().stmt.var = "elseif";
      return false;
    }
    throw ParseError("unsupported statement '" + (word.empty() ? s : word) + "'", at);
  }

  void close_if(std::vector<Frame>& stack) {
    for (;;) {
      FortranStmt st = std::move(stack.back().stmt);
      stack.pop_back();
      bool chained = st.var == "elseif";
      st.var.clear();
      target(stack).push_back(std::move(st));
      if (!chained) return;
    }
  }

  void assignment(const std::string& s, SourceSpan at, std::vector<Frame>& stack,
                  const std::vector<std::string>& tags) {
    std::size_t eq = assignment_eq(s);
    FortranStmt st;
    st.kind = FortranStmt::Kind::assign;
    st.span = at;
    st.tags.insert(tags.begin(), tags.end());
    st.lhs = parse_expr_at(s.substr(0, eq), at, 0);
    if (st.lhs->kind != ExprKind::var && st.lhs->kind != ExprKind::call)
      throw ParseError("left-hand side must be a variable or array element", at);
    st.rhs = parse_expr_at(s.substr(eq + 1), at, eq + 1);
    target(stack).push_back(std::move(st));
  }

  void declaration(const std::string& s, const std::string& word, SourceSpan at) {
    std::string rest = trim(s.substr(word.size()));
    DType t = DType::f32;
    if (word == "integer") {
      t = DType::i32;
      if (rest.rfind("*", 0) == 0) {
        std::string n = first_word(trim(rest.substr(1)));
        std::size_t k = rest.find_first_not_of("*0123456789 ");
        std::string size = trim(rest.substr(1, k == std::string::npos ? std::string::npos : k - 1));
        if (size != "4") throw ParseError("only INTEGER*4 is supported", at);
        rest = trim(rest.substr(k == std::string::npos ? rest.size() : k));
        (void)n;
      }
    } else if (word == "double" || word == "doubleprecision") {
      if (word == "double") {
        if (first_word(rest) != "precision") throw ParseError("expected DOUBLE PRECISION", at);
        rest = trim(rest.substr(9));
      }
      t = DType::f64;
    } else {
      if (rest.rfind("*", 0) == 0) {
        std::size_t k = rest.find_first_not_of("*0123456789 ");
        std::string size = trim(rest.substr(1, k == std::string::npos ? std::string::npos : k - 1));
        if (size == "8")
          t = DType::f64;
        else if (size != "4")
          throw ParseError("unsupported REAL*" + size, at);
        rest = trim(rest.substr(k == std::string::npos ? rest.size() : k));
      } else if (rest.rfind("(", 0) == 0) {
        std::size_t close = match_paren(rest, 0, at);
        std::string kind = trim(rest.substr(1, close - 2));
        if (kind.rfind("kind", 0) == 0) kind = trim(kind.substr(kind.find('=') + 1));
        if (kind == "8")
          t = DType::f64;
        else if (kind != "4")
          throw ParseError("unsupported REAL kind " + kind, at);
        rest = trim(rest.substr(close));
      }
    }
    if (auto colons = rest.find("::"); colons != std::string::npos) {
      std::string attrs = rest.substr(0, colons);
      if (attrs.find("pointer") != std::string::npos) throw ParseError("POINTER is not supported: no pointers", at);
      if (attrs.find("allocatable") != std::string::npos)
        throw ParseError("ALLOCATABLE is not supported: no dynamic memory management", at);
      if (attrs.find("save") != std::string::npos) throw ParseError("SAVE is not supported: no SAVE data", at);
      if (!trim(attrs).empty() && trim(attrs) != "," && trim(attrs).find("intent") == std::string::npos)
        throw ParseError("unsupported declaration attributes '" + trim(attrs) + "'", at);
      rest = trim(rest.substr(colons + 2));
    }
    for (auto& item : split_top_level(rest, ',')) {
      std::string it = trim(item);
      if (it.empty()) throw ParseError("empty declaration item", at);
      FortranDecl d;
      d.span = at;
      d.dtype = t;
      d.name = first_word(it);
      if (d.name.empty()) throw ParseError("malformed declaration '" + it + "'", at);
      std::string dims = trim(it.substr(d.name.size()));
      if (!dims.empty()) {
        if (dims.front() != '(' || dims.back() != ')') throw ParseError("malformed declaration '" + it + "'", at);
        for (auto& dim : split_top_level(dims.substr(1, dims.size() - 2), ',')) {
          std::string dt = trim(dim);
          if (dt == "*" || dt == ":") throw ParseError("assumed-size and deferred-shape arrays are not supported", at);
          auto parts = split_top_level(dt, ':');
          if (parts.size() > 2) throw ParseError("malformed dimension '" + dt + "'", at);
          ExprPtr lo = parts.size() == 2 ? parse_expr_at(parts[0], at, 0) : int_lit(1);
          ExprPtr hi = parse_expr_at(parts.back(), at, 0);
          d.dims.push_back({lo, hi});
        }
      }
      if (unit_.find_decl(d.name)) throw ParseError("'" + d.name + "' is declared twice", at);
      unit_.decls.push_back(std::move(d));
    }
  }

  void do_statement(const std::string& tail, SourceSpan at, std::size_t offset, std::vector<Frame>& stack,
                    const std::vector<std::string>& tags) {
    if (!tail.empty() && std::isdigit(static_cast<unsigned char>(tail[0])))
      throw ParseError("labeled DO loops are not supported; use DO ... END DO", at);
    std::size_t eq = tail.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'DO var = lo, hi'", at);
    FortranStmt st;
    st.kind = FortranStmt::Kind::do_loop;
    st.span = at;
    st.tags.insert(tags.begin(), tags.end());
    st.var = trim(tail.substr(0, eq));
    if (st.var.empty() || !std::all_of(st.var.begin(), st.var.end(), ident_char))
      throw ParseError("malformed DO variable", at);
    auto parts = split_top_level(tail.substr(eq + 1), ',');
    if (parts.size() < 2 || parts.size() > 3) throw ParseError("expected 'DO var = lo, hi'", at);
    std::size_t base = offset + eq + 1;
    st.lo = parse_expr_at(parts[0], at, base);
    st.hi = parse_expr_at(parts[1], at, base + parts[0].size() + 1);
    if (parts.size() == 3) {
      ExprPtr step = parse_expr_at(parts[2], at, base + parts[0].size() + parts[1].size() + 2);
      if (step->kind != ExprKind::int_lit || step->ival != 1)
        throw ParseError("non-unit DO stride '" + trim(parts[2]) + "' is not supported", at);
    }
    stack.push_back(Frame{Frame::Kind::do_loop, std::move(st), at});
  }

  void if_statement(const std::string& s, SourceSpan at, std::vector<Frame>& stack,
                    const std::vector<std::string>& tags) {
    std::size_t open = s.find('(');
    if (open == std::string::npos) throw ParseError("expected '(' after IF", at);
    std::size_t close = match_paren(s, open, at);
    FortranStmt st;
    st.kind = FortranStmt::Kind::if_block;
    st.span = at;
    st.tags.insert(tags.begin(), tags.end());
    st.cond = parse_expr_at(s.substr(open + 1, close - open - 2), at, open + 1);
    std::string rest = trim(s.substr(close));
    if (rest == "then") {
      stack.push_back(Frame{Frame::Kind::if_then, std::move(st), at});
      return;
    }
    if (rest.empty()) throw ParseError("expected THEN or a statement after IF (...)", at);
    // Logical IF: a one-statement block.
    std::string word = first_word(rest);
    check_restricted(rest, word, at);
    if (assignment_eq(rest) == std::string::npos) throw ParseError("unsupported statement in logical IF", at);
    stack.push_back(Frame{Frame::Kind::if_then, std::move(st), at});
    assignment(rest, SourceSpan{at.line, at.column + static_cast<int>(s.size() - rest.size())}, stack, tags);
    close_if(stack);
  }
};

}  // namespace

FortranUnit parse_fortran(std::string_view source) { return UnitParser(source).run(); }

}  // namespace loopforge
