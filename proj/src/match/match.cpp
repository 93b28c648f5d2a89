// SPDX-License-Identifier: Apache-2.0

#include "loopforge/match.hpp"

#include <cctype>

#include "loopforge/error.hpp"

namespace loopforge {

std::string MatchExpr::str() const {
  std::string out;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (k) out += " < ";
    const auto& l = levels[k];
    if (l.ellipsis) {
      out += "...";
      continue;
    }
    out += l.pattern.id_glob;
    if (l.pattern.tag_glob) out += "$" + *l.pattern.tag_glob;
  }
  return out;
}

namespace {

bool glob_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '*' || c == '?' ||
         c == '.' || c == '-';
}

}  // namespace

MatchExpr parse_match(std::string_view text) {
  MatchExpr m;
  std::size_t pos = 0;
  auto skip = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };
  auto glob = [&](const char* what) {
    std::size_t start = pos;
    while (pos < text.size() && glob_char(text[pos])) ++pos;
    if (pos == start) throw ParseError(std::string("expected ") + what + " in match expression", pos);
    return std::string(text.substr(start, pos - start));
  };
  while (true) {
    skip();
    if (pos >= text.size()) throw ParseError("empty level in match expression", pos);
    MatchLevel level;
    if (text.substr(pos, 3) == "...") {
      level.ellipsis = true;
      pos += 3;
      if (!m.levels.empty() && m.levels.back().ellipsis)
        throw ParseError("two adjacent '...' levels in match expression", pos - 3);
    } else {
      if (text[pos] == '<') throw ParseError("empty level in match expression", pos);
      level.pattern.id_glob = glob("an identifier pattern");
      skip();
      if (pos < text.size() && text[pos] == '$') {
        ++pos;
        skip();
        level.pattern.tag_glob = glob("a tag pattern");
      }
    }
    m.levels.push_back(level);
    skip();
    if (pos >= text.size()) break;
    if (text[pos] != '<') throw ParseError("expected '<' in match expression", pos);
    ++pos;
  }
  bool any = false;
  for (const auto& l : m.levels) any = any || !l.ellipsis;
  if (!any) throw ParseError("match expression needs at least one non-ellipsis level", 0);
  return m;
}

bool glob_match(std::string_view p, std::string_view t) {
  // Iterative matcher with single-star backtracking.
  std::size_t pi = 0, ti = 0, star = std::string_view::npos, mark = 0;
  while (ti < t.size()) {
    if (pi < p.size() && (p[pi] == '?' || p[pi] == t[ti])) {
      ++pi;
      ++ti;
    } else if (pi < p.size() && p[pi] == '*') {
      star = pi++;
      mark = ti;
    } else if (star != std::string_view::npos) {
      pi = star + 1;
      ti = ++mark;
    } else {
      return false;
    }
  }
  while (pi < p.size() && p[pi] == '*') ++pi;
  return pi == p.size();
}

namespace {

bool frame_matches(const LevelPattern& p, const StackFrame& f) {
  if (!glob_match(p.id_glob, f.id)) return false;
  if (!p.tag_glob) return true;
  if (f.tags.empty()) return *p.tag_glob == "*";
  for (const auto& t : f.tags)
    if (glob_match(*p.tag_glob, t)) return true;
  return false;
}

bool match_from(const MatchExpr& m, std::size_t li, const std::vector<StackFrame>& s,
                std::size_t si) {
  if (li == m.levels.size()) return true;
  const auto& level = m.levels[li];
  if (level.ellipsis)
    return match_from(m, li + 1, s, si) || (si < s.size() && match_from(m, li, s, si + 1));
  return si < s.size() && frame_matches(level.pattern, s[si]) && match_from(m, li + 1, s, si + 1);
}

}  // namespace

bool matches(const MatchExpr& m, const std::vector<StackFrame>& stack) {
  return match_from(m, 0, stack, 0);
}

}  // namespace loopforge
