// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "loopforge/cli.hpp"
#include "loopforge/codegen.hpp"
#include "loopforge/corpus.hpp"
#include "loopforge/transforms.hpp"
#include "support/preservation.hpp"
#include "support/set_oracle.hpp"

using namespace loopforge;
namespace fs = std::filesystem;

namespace {

const fs::path kCorpus = LOOPFORGE_CORPUS_DIR;

/// Collects the reasons a criterion failed.
struct Check {
  std::vector<std::string> problems;
  std::string note;

  void expect(bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  }
};

struct Criterion {
  int number;
  std::string title;
  double budget_seconds;  // 0: no runtime bound
  std::function<void(Check&)> body;
};

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + needle.size())) ++n;
  return n;
}

FixtureOutput fixture(const std::string& id) { return run_fixture(load_fixture(kCorpus / id)); }

std::string line_starting(const std::string& text, const std::string& prefix) {
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);)
    if (l.rfind(prefix, 0) == 0) return l;
  return {};
}

void conditional_listing(Check& c) {
  std::string code = fixture("conditional").c;
  const char* listing = R"(
  for (int i = 0; i <= -1 + n; ++i)
  {
    a = inp[i];
    loopy_cond0 = a >= 3;
    if (loopy_cond0)
    {
      b = 2.0 * a;
      for (int j = 0; j <= 2; ++j)
        b = 3.0 * b;
      out[i] = 5.0 * b;
    }
    if (!loopy_cond0)
      out[i] = 4.0 * a;
  })";
  c.expect(structurally_contains(code, listing), "emitted C does not contain the conditional listing:\n" + code);
  c.expect(count(code, "if (loopy_cond0)") == 1, "expected exactly one 'if (loopy_cond0)' block");
  c.expect(count(code, "if (!loopy_cond0)") == 1, "expected exactly one 'if (!loopy_cond0)' block");
}

void bsquare_pair(Check& c) {
  std::string ir = fixture("bsquare").ir;
  c.expect(structurally_contains(ir, "bsquare(alpha) := alpha*b[i_0]**2"), "rule 'bsquare(alpha) := alpha*b[i_0]**2' missing:\n" + ir);
  c.expect(structurally_contains(ir, "a[i] = bsquare(23) + bsquare(25)"), "instruction 'a[i] = bsquare(23) + bsquare(25)' missing:\n" + ir);
}

void targeted_expansion(Check& c) {
  FixtureOutput out = fixture("rule_targeting");
  const Kernel& k = out.translation.transformed;
  c.expect(k.find_rule("h_0") != nullptr, "no rule h_0 after expand_subst");
  c.expect(structurally_contains(out.ir, "a[i] = h$one(i)*h_0$two(i)"), "instruction does not read h$one(i)*h_0$two(i):\n" + out.ir);
  std::string before = line_starting(render_ir(out.translation.raw), "  h(");
  std::string after = line_starting(out.ir, "  h(");
  c.expect(!before.empty() && before == after, "body of h changed: '" + before + "' became '" + after + "'");
}

std::uint32_t f32_bits(double v) {
  float f = static_cast<float>(v);
  std::uint32_t b;
  std::memcpy(&b, &f, 4);
  return b;
}

void forward_difference(Check& c) {
  FixtureOutput out = fixture("forward_diff");
  c.expect(structurally_contains(out.c, "float u_acc_0[17];"), "no 17-element u_acc_0 temporary:\n" + out.c);
  c.expect(structurally_contains(out.c, "for (int j = 0; j <= 16; ++j)"), "no prefetch loop with trip count 17");
  c.expect(structurally_contains(out.c, "u_acc_0[1 + i_inner]"), "consumer does not read u_acc_0[1 + i_inner]");
  c.expect(structurally_contains(out.c, "u_acc_0[i_inner]"), "consumer does not read u_acc_0[i_inner]");
  const Kernel& k = out.translation.transformed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ExecutionEnv env = random_inputs(k, {{"n", 48}}, seed);
    ExecutionEnv got = interpret_bounds_checked(k, env);
    const auto& u = env.arrays.at("u").data;
    const auto& r = got.arrays.at("result").data;
    c.expect(r.size() == 48, "result has " + std::to_string(r.size()) + " elements");
    for (std::size_t i = 0; i < 48 && i < r.size(); ++i) {
      float want = static_cast<float>(u[i + 1]) - static_cast<float>(u[i]);
      if (f32_bits(r[i]) != f32_bits(want)) {
        c.expect(false, "result[" + std::to_string(i) + "] differs (seed " + std::to_string(seed) + ")");
        break;
      }
    }
  }
}

void dgemm(Check& c) {
  FixtureOutput out = fixture("dgemm");
  const std::int64_t m = 24, n = 16, l = 32;
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    ExecutionEnv env = random_inputs(out.translation.raw, {{"m", m}, {"n", n}, {"l", l}}, seed);
    const auto& A = env.arrays.at("a").data;
    const auto& B = env.arrays.at("b").data;
    auto C = env.arrays.at("c").data;
    const double alpha = env.arrays.at("alpha").data[0];
    // Column-major naive triple loop.
    for (std::int64_t j = 0; j < n; ++j)
      for (std::int64_t k = 0; k < l; ++k)
        for (std::int64_t i = 0; i < m; ++i) C[i + j * m] = C[i + j * m] + alpha * B[k + j * l] * A[i + k * m];
    const auto raw = interpret_bounds_checked(out.translation.raw, env).arrays.at("c").data;
    const auto transformed = interpret_bounds_checked(out.translation.transformed, env).arrays.at("c").data;
    c.expect(raw.size() == C.size() && transformed.size() == C.size(), "c has the wrong size");
    for (std::size_t x = 0; x < C.size() && x < raw.size() && x < transformed.size(); ++x) {
      if (!testing::same_bits(raw[x], C[x])) {
        c.expect(false, "untransformed c[" + std::to_string(x) + "] is not exact");
        break;
      }
      double rel = std::fabs(transformed[x] - C[x]) / std::max(1.0, std::fabs(C[x]));
      worst = std::max(worst, rel);
    }
  }
  c.expect(worst <= 1e-12, "transformed relative error " + std::to_string(worst));
  std::ostringstream s;
  s << "max relative error " << worst;
  c.note = s.str();
}

void preservation(Check& c) {
  auto r = testing::check_preservation(200);
  c.expect(r.kernels == 200, "ran " + std::to_string(r.kernels) + " kernels");
  for (const auto& f : r.failures) c.expect(false, f);
  for (const char* family : {"split_iname", "tag_inames", "assume", "tag_instructions", "extract_subst",
                             "wrap_variable_access", "temporary_to_subst", "expand_subst", "expand_all_rules",
                             "precompute"})
    c.expect(r.applied_by_transform[family] > 0, std::string(family) + " never applied");
  c.note = std::to_string(r.applied) + " transformed kernels compared";
}

void polyset_oracles(Check& c) {
  using testing::brute_points;
  using testing::Point;
  std::mt19937 rng(2024);
  int sets = 0, grids = 0;
  for (int trial = 0; trial < 500; ++trial) {
    auto rs = testing::random_set(rng);
    ++sets;
    const auto& dims = rs.set.dims();
    std::string target = dims[rng() % dims.size()];
    std::int64_t factor = std::vector<std::int64_t>{2, 3, 5, 8, 16}[rng() % 5];
    poly::BasicSet sp = poly::split_dim(rs.set, target, factor, target + "_o", target + "_i");
    std::vector<poly::Bounds> bounds;
    for (const auto& d : dims) bounds.push_back(poly::bounds_for(rs.set, d, {}, {}));
    for (const auto& params : rs.param_grid) {
      ++grids;
      auto orig = brute_points(rs.set, params, -1, 46);
      auto split = poly::enumerate_points(sp, params);
      std::set<Point> images;
      for (const auto& p : split) {
        poly::Valuation v;
        for (std::size_t k = 0; k < p.size(); ++k) v[sp.dims()[k]] = p[k];
        Point back;
        for (const auto& d : dims) back.push_back(d == target ? factor * v[target + "_o"] + v[target + "_i"] : v[d]);
        images.insert(back);
      }
      if (split.size() != orig.size() || images != std::set<Point>(orig.begin(), orig.end())) {
        c.expect(false, "split of " + rs.set.str() + " along " + target + " is not a bijection");
        continue;
      }
      if (orig.empty()) continue;
      for (std::size_t k = 0; k < dims.size(); ++k) {
        std::int64_t lo = orig[0][k], hi = orig[0][k];
        for (const auto& p : orig) {
          lo = std::min(lo, p[k]);
          hi = std::max(hi, p[k]);
        }
        if (testing::eval_max(bounds[k].lower, params) != lo || testing::eval_min(bounds[k].upper, params) != hi)
          c.expect(false, "bounds of " + dims[k] + " in " + rs.set.str() + " are not tight");
      }
    }
  }
  c.note = std::to_string(sets) + " sets, " + std::to_string(grids) + " parameter points";
}

void compiled_c(Check& c) {
  auto cc = find_c_compiler();
  if (!cc) {
    c.note = "skipped: no C compiler found";
    return;
  }
  int runs = 0;
  for (const auto& f : load_corpus(kCorpus)) {
    const Kernel& k = run_fixture(f).translation.transformed;
    try {
      CompiledKernel compiled(k, *cc);
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        ExecutionEnv env = random_inputs(k, f.params, seed);
        std::string diff = testing::first_difference(k, interpret(k, env), compiled.run(env));
        c.expect(diff.empty(), f.id + " seed " + std::to_string(seed) + ": " + diff);
        ++runs;
      }
    } catch (const Error& e) {
      c.expect(false, f.id + ": " + e.what());
    }
  }
  c.note = std::to_string(runs) + " runs with " + *cc;
}

void restriction_diagnostics(Check& c) {
  const std::vector<std::pair<std::string, std::string>> probes = {
      {"      do i = 1, n\n        if (x(i) > 0) exit\n      end do", "EXIT"},
      {"      do i = 1, n\n        cycle\n      end do", "CYCLE"},
      {"      return", "RETURN"},
      {"      entry other(x)", "ENTRY"},
      {"      call helper(x)", "CALL"},
      {"      common /blk/ y", "COMMON"},
      {"      save", "SAVE"},
      {"      read(*,*) n", "READ"},
      {"      write(*,*) x(1)", "WRITE"},
      {"      print *, x(1)", "PRINT"},
  };
  std::string tmpl = (fs::temp_directory_path() / "loopforge-probe-XXXXXX").string();
  fs::path dir = mkdtemp(tmpl.data());
  for (const auto& [body, word] : probes) {
    fs::path file = dir / ("probe_" + word + ".f");
    std::ofstream(file) << "      subroutine probe(n, x)\n      integer n, i\n      real*8 x(n)\n" << body
                        << "\n      end\n";
    std::string file_s = file.string();
    const char* argv[] = {"loopforge", "check", file_s.c_str()};
    std::ostringstream out, err;
    int code = -1;
    try {
      code = run_cli(3, argv, out, err);
    } catch (const std::exception& e) {
      c.expect(false, word + ": escaped exception " + e.what());
      continue;
    }
    c.expect(code == 1, word + ": exit code " + std::to_string(code));
    c.expect(contains(err.str(), word), word + ": diagnostic does not name the construct: " + err.str());
    int line = 4;
    std::string lower = word;
    for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    for (std::size_t p = 0; p < body.find(lower); ++p) line += body[p] == '\n';
    c.expect(err.str().rfind(file_s + ":" + std::to_string(line) + ":", 0) == 0,
             word + ": diagnostic does not point at line " + std::to_string(line) + ": " + err.str());
  }
  fs::remove_all(dir);
  c.note = std::to_string(probes.size()) + " probe files";
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "conditional example: lowered C matches the listing", 1, conditional_listing},
      {2, "extract_subst: bsquare rule and rewritten instruction", 0, bsquare_pair},
      {3, "targeted expansion: h_0 created, h unchanged", 0, targeted_expansion},
      {4, "forward differencing: u_acc_0[17] prefetch, bitwise f32 result", 0, forward_difference},
      {5, "dgemm end to end: exact untransformed, 1e-12 transformed", 5, dgemm},
      {6, "preservation: 200 random kernels, every applicable transform", 60, preservation},
      {7, "polyset: split bijection and tight bounds on 500 sets", 30, polyset_oracles},
      {8, "emitted C agrees with the interpreter on every fixture", 0, compiled_c},
      {9, "restricted Fortran constructs get targeted diagnostics", 0, restriction_diagnostics},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check check;
    auto start = std::chrono::steady_clock::now();
    try {
      cr.body(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (cr.budget_seconds > 0 && seconds > cr.budget_seconds) {
      std::ostringstream s;
      s << "took " << seconds << " s, budget " << cr.budget_seconds << " s";
      check.expect(false, s.str());
    }
    bool ok = check.problems.empty();
    failed += !ok;
    std::cout << (ok ? "PASS" : "FAIL") << "  [" << cr.number << "] " << cr.title << "  (" << std::fixed
              << std::setprecision(2) << seconds << " s" << (check.note.empty() ? "" : "; " + check.note) << ")\n";
    for (std::size_t i = 0; i < check.problems.size() && i < 5; ++i) std::cout << "      " << check.problems[i] << "\n";
    if (check.problems.size() > 5) std::cout << "      ... " << check.problems.size() - 5 << " more\n";
  }
  std::cout << (failed ? std::to_string(failed) + " of " : "all ") << criteria.size() << " criteria "
            << (failed ? "failed" : "passed") << "\n";
  return failed ? 1 : 0;
}
