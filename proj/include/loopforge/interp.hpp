// SPDX-License-Identifier: Apache-2.0
//
// Reference interpreter: executes a kernel on concrete arrays with the same
// rounding behavior as the emitted C.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "loopforge/codegen.hpp"
#include "loopforge/kernel.hpp"

namespace loopforge {

/// Flat storage laid out by the argument's strides. Values of every dtype
/// are held as doubles (exact for f32 and i32).
struct Buffer {
  DType dtype = DType::f64;
  std::vector<std::int64_t> shape;  // empty: scalar
  std::vector<double> data;

  friend bool operator==(const Buffer&, const Buffer&) = default;
};

struct WriteEvent {
  std::string insn;
  std::string target;
  std::vector<std::int64_t> indices;
};

struct ExecutionEnv {
  std::map<std::string, std::int64_t> params;
  std::map<std::string, Buffer> arrays;  // arguments, including scalars
  bool record_writes = false;
  std::vector<WriteEvent> writes;
};

/// Runs the kernel. Missing output arrays are allocated zero-filled.
/// Throws InterpError on out-of-bounds argument access, reads of
/// never-written temporaries, missing inputs or violated assumptions.
ExecutionEnv interpret(const Kernel& k, ExecutionEnv env);
/// As interpret, and also rejects temporary accesses outside their extent.
ExecutionEnv interpret_bounds_checked(const Kernel& k, ExecutionEnv env);
/// Walks an existing schedule (grouped or not).
ExecutionEnv interpret_schedule(const Schedule& s, ExecutionEnv env, bool check_temporaries);

/// Shape of an argument under concrete parameters.
std::vector<std::int64_t> concrete_shape(const ArgDecl& a, const std::map<std::string, std::int64_t>& params);
/// Number of storage elements the argument's strides address.
std::size_t storage_size(const ArgDecl& a, const std::map<std::string, std::int64_t>& params);

/// Seeded random values for every non-output argument (and zeroed outputs).
/// Floats are drawn from [-4, 8) and rounded to their dtype; integers from [-5, 10].
ExecutionEnv random_inputs(const Kernel& k, const std::map<std::string, std::int64_t>& params,
                           std::uint64_t seed);

/// Binary array file: "LFA1", u32 dtype code (0 i32, 1 f32, 2 f64),
/// u32 rank, rank x i64 extents, then the elements, all little-endian.
void write_array(std::ostream& out, const Buffer& b);
Buffer read_array(std::istream& in);

}  // namespace loopforge
