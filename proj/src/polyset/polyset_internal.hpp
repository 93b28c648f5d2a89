// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "loopforge/polyset.hpp"

namespace loopforge::poly::detail {

/// Canonicalizes, drops tautologies, dedupes, keeps the tightest of
/// parallel inequalities. A contradiction collapses the list to one entry.
std::vector<Constraint> normalize(std::vector<Constraint> cs);

/// One Fourier-Motzkin step on a raw constraint list.
std::vector<Constraint> eliminate(const std::vector<Constraint>& cs, std::string_view var,
                                  bool* exact);

/// Eliminates every variable and reports whether a contradiction appears.
bool empty(std::vector<Constraint> cs);

std::vector<std::string> variables_of(const std::vector<Constraint>& cs);

}  // namespace loopforge::poly::detail
