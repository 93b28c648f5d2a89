// SPDX-License-Identifier: Apache-2.0
//
// Match expressions over rule-expansion stacks, e.g. "g$three < h$two".

#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace loopforge {

struct LevelPattern {
  std::string id_glob;
  std::optional<std::string> tag_glob;
};

struct MatchLevel {
  bool ellipsis = false;
  LevelPattern pattern;
};

/// Levels innermost first.
struct MatchExpr {
  std::vector<MatchLevel> levels;
  std::string str() const;
};

enum class FrameKind { rule, instruction };

struct StackFrame {
  FrameKind kind = FrameKind::rule;
  std::string id;
  /// Invocation tag (at most one) or the instruction's tag set.
  std::set<std::string> tags;
};

/// Throws ParseError.
MatchExpr parse_match(std::string_view text);

/// Shell-style glob with `*` and `?`.
bool glob_match(std::string_view pattern, std::string_view text);

/// `stack` is innermost first. The match anchors at the innermost frame and
/// is open outward.
bool matches(const MatchExpr& m, const std::vector<StackFrame>& stack);

}  // namespace loopforge
