// SPDX-License-Identifier: Apache-2.0
//
// Scheduling of instructions into loop nests and source emission for C and
// OpenCL.

#pragma once

#include <set>
#include <string>
#include <vector>

#include "loopforge/kernel.hpp"

namespace loopforge {

struct ScheduleNode {
  enum class Kind { loop, conditional, statement };
  Kind kind = Kind::statement;
  std::string iname;                // loop
  std::string insn_id;              // statement
  std::set<Predicate> predicates;   // conditional guard, or statement residual
  std::vector<ScheduleNode> children;
};

struct Schedule {
  Kernel kernel;  // rules expanded
  std::vector<ScheduleNode> body;
};

/// Expands all rules and orders instructions into loop nests. Throws
/// ScheduleError when a dependency would split a shared loop.
Schedule schedule(const Kernel& k);

/// Hoists common predicates of consecutive statements and loops into
/// conditional nodes. Statements keep no residual predicates afterwards.
Schedule group_predicates(Schedule s);

/// Indented textual rendering of a schedule (for tests and dumps).
std::string render_schedule(const Schedule& s);

/// Bounds of `iname` with the loops in `open` (outermost first) fixed.
poly::Bounds loop_bounds(const Kernel& k, const std::vector<std::string>& open,
                         const std::string& iname);

enum class Target { c, opencl };

std::string emit(const Kernel& k, Target target);
std::string emit_schedule(const Schedule& s, Target target);

/// C literal for a float value of the given type: always has a decimal point
/// or exponent; f32 values carry the `f` suffix.
std::string c_float_literal(double v, DType type);

}  // namespace loopforge
