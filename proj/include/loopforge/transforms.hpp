// SPDX-License-Identifier: Apache-2.0
//
// Kernel-to-kernel transformations. Each takes a kernel by value and
// returns the transformed kernel; failures throw TransformError.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "loopforge/kernel.hpp"
#include "loopforge/match.hpp"

namespace loopforge {

/// Collects non-fatal notes such as "pattern matched nothing".
struct TransformLog {
  std::vector<std::string> warnings;
};

Kernel split_iname(Kernel k, const std::string& iname, std::int64_t factor,
                   const std::optional<std::string>& outer_tag = std::nullopt,
                   const std::optional<std::string>& inner_tag = std::nullopt);

Kernel assume(Kernel k, const std::string& text);

Kernel tag_inames(Kernel k, const std::string& iname, const std::string& tag);

Kernel tag_instructions(Kernel k, const MatchExpr& match, const std::string& tag,
                        TransformLog* log = nullptr);

Kernel extract_subst(Kernel k, const std::string& rule_name, const std::string& template_text,
                     const std::vector<std::string>& parameters, TransformLog* log = nullptr);

Kernel wrap_variable_access(Kernel k, const std::string& var, const std::string& rule_name,
                            TransformLog* log = nullptr);

Kernel temporary_to_subst(Kernel k, const std::string& temp_name);

Kernel expand_subst(Kernel k, const MatchExpr& match, TransformLog* log = nullptr);

/// Expands every invocation; afterwards no instruction mentions a rule.
Kernel expand_all_rules(Kernel k);

Kernel precompute(Kernel k, const std::string& rule_match,
                  const std::vector<std::string>& sweep_inames,
                  const std::optional<std::string>& default_tag = std::nullopt,
                  TransformLog* log = nullptr);

/// "a, b" or "a,b" -> {"a", "b"}.
std::vector<std::string> split_name_list(const std::string& text);

}  // namespace loopforge
