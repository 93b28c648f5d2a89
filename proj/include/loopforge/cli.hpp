// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver: translate, dump-ir, run and check.

#pragma once

#include <iosfwd>

namespace loopforge {

/// Exit codes: 0 success, 1 user error (diagnostic printed to `err`),
/// 2 internal invariant failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace loopforge
