// SPDX-License-Identifier: Apache-2.0
//
// Test corpus: on-disk fixtures, golden comparison, random kernels and the
// compiled-C execution oracle.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "loopforge/fortran.hpp"
#include "loopforge/interp.hpp"

namespace loopforge {

/// corpus/<id>/{input.f|input.knl, transforms.txt, expected.c, expected.ir}
struct Fixture {
  std::string id;
  std::filesystem::path dir;
  bool fortran = false;
  std::string source;
  std::string transforms;
  std::optional<std::string> expected_c;
  std::optional<std::string> expected_ir;
  /// From `# params: n=32 m=4` lines in transforms.txt.
  std::map<std::string, std::int64_t> params;
};

Fixture load_fixture(const std::filesystem::path& dir);
/// Every fixture directory under `root`, sorted by id.
std::vector<Fixture> load_corpus(const std::filesystem::path& root);

struct FixtureOutput {
  Translation translation;
  std::string c;
  std::string ir;
};

/// Runs the fixture's pipeline: front end, pragma scripts, transforms.txt,
/// then C emission and the IR dump of the transformed kernel.
FixtureOutput run_fixture(const Fixture& f);
/// Rewrites expected.c and expected.ir from the current pipeline.
void bless_fixture(const Fixture& f);

/// Tokens of C or IR text with whitespace dropped and numbering suffixes
/// (`_0`, `_17`) stripped from identifiers.
std::vector<std::string> structural_tokens(std::string_view text);
bool structurally_equal(std::string_view a, std::string_view b);
/// True when the tokens of `fragment` occur contiguously in `text`.
bool structurally_contains(std::string_view text, std::string_view fragment);

struct RandomLimits {
  int max_dims = 3;
  int max_extent = 40;
  int max_instructions = 6;
  int max_rules = 2;
};

/// Seed-deterministic well-formed kernel with at least one output array.
Kernel random_kernel(std::uint64_t seed, const RandomLimits& limits = {});
/// Parameter values satisfying the kernel's assumptions, in [1, 40].
std::map<std::string, std::int64_t> random_params(const Kernel& k, std::uint64_t seed);

/// First C compiler found among $CC, cc, gcc, clang.
std::optional<std::string> find_c_compiler();
/// Standalone C program around the emitted function: reads arguments as
/// text (hex floats) from stdin, calls the kernel, prints outputs.
std::string c_harness(const Kernel& k);
/// Compiles the emitted kernel once; runs it on many environments.
class CompiledKernel {
 public:
  /// Throws Error when compilation fails.
  CompiledKernel(const Kernel& k, const std::string& compiler);
  ~CompiledKernel();
  CompiledKernel(const CompiledKernel&) = delete;
  CompiledKernel& operator=(const CompiledKernel&) = delete;
  ExecutionEnv run(const ExecutionEnv& env) const;

 private:
  Kernel kernel_;
  std::filesystem::path dir_;
};

}  // namespace loopforge
