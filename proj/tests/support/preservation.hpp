// SPDX-License-Identifier: Apache-2.0
//
// Master property: every applicable transform leaves interpreter results
// bitwise unchanged on random kernels.
#pragma once

#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "loopforge/corpus.hpp"
#include "loopforge/error.hpp"
#include "loopforge/transforms.hpp"

namespace loopforge::testing {

struct Candidate {
  std::string name;
  std::function<Kernel(const Kernel&)> apply;
};

inline bool same_bits(double a, double b) {
  std::uint64_t x, y;
  std::memcpy(&x, &a, 8);
  std::memcpy(&y, &b, 8);
  return x == y;
}

/// First output element differing between two runs, or empty.
inline std::string first_difference(const Kernel& k, const ExecutionEnv& want, const ExecutionEnv& got) {
  for (const auto& a : k.args) {
    if (!a.is_output) continue;
    const auto& x = want.arrays.at(a.name).data;
    const auto& y = got.arrays.at(a.name).data;
    if (x.size() != y.size()) return a.name + ": size " + std::to_string(x.size()) + " vs " + std::to_string(y.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!same_bits(x[i], y[i])) {
        std::ostringstream s;
        s.precision(17);
        s << a.name << "[" << i << "]: " << x[i] << " vs " << y[i];
        return s.str();
      }
  }
  return {};
}

inline std::vector<Candidate> candidate_transforms(const Kernel& k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::vector<Candidate> out;
  static const char* tags[] = {"g.0", "l.0", "l.1", "unroll"};
  for (const auto& iname : k.iname_order) {
    std::int64_t f = pick(2, 7);
    out.push_back({"split_iname(" + iname + ", " + std::to_string(f) + ")",
                   [=](const Kernel& x) { return split_iname(x, iname, f); }});
    std::string outer = pick(0, 1) ? "g.0" : "sequential";
    std::string inner = pick(0, 1) ? "l.0" : "unroll";
    out.push_back({"split_iname(" + iname + ", 4, " + outer + ", " + inner + ")",
                   [=](const Kernel& x) { return split_iname(x, iname, 4, outer, inner); }});
    std::string tag = tags[pick(0, 3)];
    out.push_back({"tag_inames(" + iname + ", " + tag + ")", [=](const Kernel& x) { return tag_inames(x, iname, tag); }});
  }
  if (k.find_arg("n")) out.push_back({"assume(n >= 1)", [](const Kernel& x) { return assume(x, "n >= 1"); }});
  out.push_back({"tag_instructions(*)", [](const Kernel& x) { return tag_instructions(x, parse_match("*"), "all"); }});
  out.push_back({"extract_subst(x1[p])", [](const Kernel& x) { return extract_subst(x, "x1_sub", "x1[p]", {"p"}); }});
  out.push_back({"extract_subst(abs(v) + 1)",
                 [](const Kernel& x) { return extract_subst(x, "denom", "abs(v) + 1", {"v"}); }});
  out.push_back({"wrap_variable_access(x0)", [](const Kernel& x) { return wrap_variable_access(x, "x0", "x0_acc"); }});
  out.push_back({"wrap_variable_access(s)", [](const Kernel& x) { return wrap_variable_access(x, "s", "s_acc"); }});
  for (const auto& t : k.temporaries)
    if (t.name[0] == 't')
      out.push_back({"temporary_to_subst(" + t.name + ")", [n = t.name](const Kernel& x) { return temporary_to_subst(x, n); }});
  out.push_back({"expand_subst(*)", [](const Kernel& x) { return expand_subst(x, parse_match("*")); }});
  out.push_back({"expand_all_rules", [](const Kernel& x) { return expand_all_rules(x); }});
  out.push_back({"precompute(x1_acc, i0)", [](const Kernel& x) {
                   return precompute(wrap_variable_access(x, "x1", "x1_acc"), "x1_acc", {"i0"});
                 }});
  out.push_back({"split + precompute(x1_acc, i0_inner)", [](const Kernel& x) {
                   Kernel y = split_iname(x, "i0", 4);
                   y = wrap_variable_access(y, "x1", "x1_acc");
                   return precompute(y, "x1_acc", {"i0_inner"});
                 }});
  const std::string last = k.iname_order.size() > 1 && k.iname_order.back() == "r"
                               ? k.iname_order[k.iname_order.size() - 2]
                               : k.iname_order.back();
  out.push_back({"precompute(x0_acc, " + last + ")", [last](const Kernel& x) {
                   return precompute(wrap_variable_access(x, "x0", "x0_acc"), "x0_acc", {last});
                 }});
  if (k.find_rule("g0"))
    out.push_back({"precompute(g0, i0)", [](const Kernel& x) { return precompute(x, "g0", {"i0"}, std::string("l.0")); }});
  return out;
}

struct PreservationReport {
  int kernels = 0;
  int applied = 0;
  int not_applicable = 0;
  std::map<std::string, int> applied_by_transform;
  std::vector<std::string> failures;
};

inline std::string transform_family(const std::string& name) { return name.substr(0, name.find('(')); }

inline PreservationReport check_preservation(int count, std::uint64_t first_seed = 0) {
  PreservationReport r;
  for (std::uint64_t seed = first_seed; seed < first_seed + static_cast<std::uint64_t>(count); ++seed) {
    Kernel k = random_kernel(seed);
    ++r.kernels;
    ExecutionEnv env = random_inputs(k, random_params(k, seed), seed);
    ExecutionEnv want = interpret(k, env);
    for (const auto& c : candidate_transforms(k, seed)) {
      Kernel t;
      try {
        t = c.apply(k);
      } catch (const TransformError&) {
        ++r.not_applicable;
        continue;
      }
      ++r.applied;
      ++r.applied_by_transform[transform_family(c.name)];
      try {
        std::string diff = first_difference(k, want, interpret_bounds_checked(t, env));
        if (!diff.empty()) r.failures.push_back(k.name + " " + c.name + ": " + diff);
      } catch (const Error& e) {
        r.failures.push_back(k.name + " " + c.name + ": " + e.what());
      }
    }
  }
  return r;
}

}  // namespace loopforge::testing
