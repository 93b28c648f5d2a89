// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <regex>

#include "loopforge/error.hpp"
#include "loopforge/match.hpp"

using namespace loopforge;

namespace {

StackFrame rule(std::string id, std::optional<std::string> tag = std::nullopt) {
  StackFrame f{FrameKind::rule, std::move(id), {}};
  if (tag) f.tags.insert(*tag);
  return f;
}

StackFrame insn(std::string id, std::set<std::string> tags = {}) {
  return StackFrame{FrameKind::instruction, std::move(id), std::move(tags)};
}

std::string glob_to_regex(const std::string& g) {
  std::string r;
  for (char c : g) {
    if (c == '*')
      r += ".*";
    else if (c == '?')
      r += ".";
    else if (std::isalnum(static_cast<unsigned char>(c)))
      r += c;
    else
      r += std::string("\\") + c;
  }
  return r;
}

}  // namespace

TEST(ParseMatch, Examples) {
  auto m = parse_match("g$three < h$two");
  ASSERT_EQ(m.levels.size(), 2u);
  EXPECT_EQ(m.levels[0].pattern.id_glob, "g");
  EXPECT_EQ(m.levels[0].pattern.tag_glob, "three");
  EXPECT_EQ(m.levels[1].pattern.id_glob, "h");
  EXPECT_EQ(m.levels[1].pattern.tag_glob, "two");

  auto star = parse_match("*$input");
  ASSERT_EQ(star.levels.size(), 1u);
  EXPECT_EQ(star.levels[0].pattern.id_glob, "*");
  EXPECT_EQ(star.levels[0].pattern.tag_glob, "input");

  auto el = parse_match("inner < ... < outer");
  ASSERT_EQ(el.levels.size(), 3u);
  EXPECT_TRUE(el.levels[1].ellipsis);
  EXPECT_EQ(el.str(), "inner < ... < outer");
}

TEST(ParseMatch, Errors) {
  EXPECT_THROW(parse_match(""), ParseError);
  EXPECT_THROW(parse_match("< a"), ParseError);
  EXPECT_THROW(parse_match("a <"), ParseError);
  EXPECT_THROW(parse_match("a < < b"), ParseError);
  EXPECT_THROW(parse_match("a < ... < ... < b"), ParseError);
  EXPECT_THROW(parse_match("..."), ParseError);
  EXPECT_THROW(parse_match("a$"), ParseError);
}

TEST(Matches, PaperExamples) {
  auto m = parse_match("g$three < h$two");
  EXPECT_TRUE(matches(m, {rule("g", "three"), rule("h", "two"), insn("insn_0")}));
  EXPECT_FALSE(matches(m, {rule("g", "three"), rule("h", "one"), insn("insn_0")}));
  EXPECT_FALSE(matches(m, {rule("h", "two"), insn("insn_0")}));
  EXPECT_TRUE(matches(parse_match("*$input"), {insn("insn_3", {"input"})}));
  EXPECT_FALSE(matches(parse_match("*$input"), {insn("insn_3", {"other"})}));
}

TEST(Matches, TaglessFrames) {
  EXPECT_TRUE(matches(parse_match("g$*"), {rule("g"), insn("x")}));
  EXPECT_FALSE(matches(parse_match("g$t*"), {rule("g"), insn("x")}));
  EXPECT_TRUE(matches(parse_match("g"), {rule("g", "anything"), insn("x")}));
}

TEST(Glob, AgreesWithRegexOracle) {
  const std::vector<std::string> patterns{"*", "a*", "*b", "a?c", "??", "a*b*c", "*a*", "abc", "?*", "*?*"};
  const std::vector<std::string> texts{"", "a", "b", "ab", "abc", "aXc", "acb", "aabbcc", "ba", "xyz", "abcabc"};
  for (const auto& p : patterns) {
    std::regex re(glob_to_regex(p));
    for (const auto& t : texts)
      EXPECT_EQ(glob_match(p, t), std::regex_match(t, re)) << p << " vs " << t;
  }
}

TEST(Property, StarMatchesEveryNonemptyStack) {
  auto m = parse_match("*");
  for (const char* id : {"a", "insn_0", "h_0"}) {
    EXPECT_TRUE(matches(m, {insn(id)}));
    EXPECT_TRUE(matches(m, {rule(id, "t"), insn("x")}));
  }
}

TEST(Property, EllipsisAgreesWithRegexOracle) {
  // Frames are single letters; a stack reads innermost first.
  const std::string alphabet = "abc";
  std::vector<std::string> stacks{""};
  for (int len = 1; len <= 4; ++len) {
    std::vector<std::string> next;
    for (const auto& s : stacks)
      if (static_cast<int>(s.size()) == len - 1)
        for (char c : alphabet) next.push_back(s + c);
    stacks.insert(stacks.end(), next.begin(), next.end());
  }
  // Every pattern of up to 4 levels over {a, b, c, ?, ...} without adjacent ellipses.
  std::vector<std::vector<std::string>> patterns{{}};
  const std::vector<std::string> symbols{"a", "b", "c", "*", "..."};
  for (int len = 1; len <= 4; ++len) {
    std::vector<std::vector<std::string>> next;
    for (const auto& p : patterns)
      if (static_cast<int>(p.size()) == len - 1)
        for (const auto& s : symbols) {
          if (s == "..." && !p.empty() && p.back() == "...") continue;
          auto q = p;
          q.push_back(s);
          next.push_back(q);
        }
    patterns.insert(patterns.end(), next.begin(), next.end());
  }
  int checked = 0;
  for (const auto& p : patterns) {
    bool has_level = false;
    std::string text, re;
    for (std::size_t k = 0; k < p.size(); ++k) {
      text += (k ? " < " : "") + p[k];
      if (p[k] == "...")
        re += ".*";
      else if (p[k] == "*")
        re += ".", has_level = true;
      else
        re += p[k], has_level = true;
    }
    if (!has_level) continue;
    re += ".*";
    std::regex oracle(re);
    MatchExpr m = parse_match(text);
    for (const auto& s : stacks) {
      std::vector<StackFrame> frames;
      for (char c : s) frames.push_back(rule(std::string(1, c)));
      ASSERT_EQ(matches(m, frames), std::regex_match(s, oracle)) << text << " on '" << s << "'";
      ++checked;
    }
  }
  EXPECT_GT(checked, 10000);
}
