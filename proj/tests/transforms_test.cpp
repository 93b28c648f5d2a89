// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "loopforge/error.hpp"
#include "loopforge/transforms.hpp"

using namespace loopforge;

namespace {

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

#define EXPECT_IR_HAS(k, text) EXPECT_TRUE(contains(render_ir(k), text)) << render_ir(k)

Kernel fgh() {
  return make_kernel({"{[i]: 0<=i<n}"}, R"(
f(x) := x*a[x]
g(x) := 12 + f(x)
h(x) := 1 + g(x) + 20*g$three(x)
a[i] = h$one(i) * h$two(i)
)",
                     "fgh");
}

Kernel forward_diff() {
  return make_kernel({"{[i]: 0<=i<n}"}, "result[i] = u[i+1]-u[i]", "diff");
}

Kernel forward_diff_prepared() {
  Kernel k = split_iname(forward_diff(), "i", 16);
  k = assume(k, "n mod 16 = 0");
  return extract_subst(k, "u_acc", "u[j]", {"j"});
}

int count_rules(const ExprPtr& e) {
  int n = 0;
  visit(e, [&](const ExprPtr& x) {
    n += x->kind == ExprKind::rule;
    return true;
  });
  return n;
}

}  // namespace

TEST(ExtractSubst, Bsquare) {
  Kernel k = make_kernel({"{[i]: 0<=i<n}"}, "a[i] = 23*b[i]**2 + 25*b[i]**2", "bsq");
  TransformLog log;
  k = extract_subst(k, "bsquare", "alpha*b[i]**2", {"alpha"}, &log);
  EXPECT_IR_HAS(k, "  bsquare(alpha) := alpha*b[i_0]**2\n    where i_0 = i\n");
  EXPECT_IR_HAS(k, "  a[i] = bsquare(23) + bsquare(25)  {");
  EXPECT_TRUE(log.warnings.empty());
}

TEST(ExtractSubst, ForwardDifference) {
  Kernel k = forward_diff_prepared();
  EXPECT_IR_HAS(k, "u_acc(j) := u[j]");
  EXPECT_IR_HAS(k, "result[i_outer*16 + i_inner] = u_acc(i_outer*16 + i_inner + 1) - u_acc(i_outer*16 + i_inner)");
}

TEST(ExtractSubst, Errors) {
  EXPECT_THROW(extract_subst(forward_diff(), "r", "u[j]", {"q"}), TransformError);
  EXPECT_THROW(extract_subst(forward_diff(), "r", "u[", {"j"}), TransformError);
  TransformLog log;
  extract_subst(forward_diff(), "r", "2*u[j]", {"j"}, &log);
  EXPECT_EQ(log.warnings.size(), 1u);
}

TEST(ExtractSubst, ExpandRoundTrip) {
  Kernel original = make_kernel({"{[i]: 0<=i<n}"}, "a[i] = 23*b[i]**2 + 25*b[i]**2", "bsq");
  Kernel k = expand_all_rules(extract_subst(original, "bsquare", "alpha*b[i]**2", {"alpha"}));
  ASSERT_EQ(k.instructions.size(), 1u);
  EXPECT_TRUE(equal(k.instructions[0].rhs, original.instructions[0].rhs))
      << render(k.instructions[0].rhs);
}

TEST(WrapVariableAccess, SameAsExtraction) {
  Kernel a = wrap_variable_access(forward_diff(), "u", "u_acc");
  Kernel b = extract_subst(forward_diff(), "u_acc", "u[p_0]", {"p_0"});
  EXPECT_EQ(render_ir(a), render_ir(b));
  EXPECT_IR_HAS(a, "result[i] = u_acc(i + 1) - u_acc(i)");
}

TEST(WrapVariableAccess, Scalar) {
  Kernel k = make_kernel({"{[i]: 0<=i<n}"}, "out[i] = a*u[i]", "s");
  k = wrap_variable_access(k, "a", "a_subst");
  EXPECT_IR_HAS(k, "  a_subst() := a\n");
  EXPECT_IR_HAS(k, "out[i] = a_subst()*u[i]");
  EXPECT_THROW(wrap_variable_access(k, "zz", "r"), TransformError);
}

TEST(ExpandSubst, TargetedExpansion) {
  TransformLog log;
  Kernel k = expand_subst(fgh(), parse_match("g$three < h$two"), &log);
  EXPECT_IR_HAS(k, "  h(x) := 1 + g(x) + 20*g$three(x)\n");
  EXPECT_IR_HAS(k, "  h_0(x) := 1 + g(x) + 20*(12 + f(x))\n");
  EXPECT_IR_HAS(k, "  a[i] = h$one(i)*h_0$two(i)  {");
  EXPECT_TRUE(log.warnings.empty());
}

TEST(ExpandSubst, FullExpansion) {
  Kernel k = expand_subst(fgh(), parse_match("*"));
  for (const auto& insn : k.instructions) EXPECT_EQ(count_rules(insn.rhs), 0);
  EXPECT_EQ(k.rules.size(), 3u);  // rules stay, unused
  Kernel all = expand_all_rules(fgh());
  EXPECT_TRUE(all.rules.empty());
  EXPECT_EQ(render(all.instructions[0].rhs), render(k.instructions[0].rhs));
}

TEST(ExpandSubst, NoMatchWarns) {
  TransformLog log;
  Kernel k = expand_subst(fgh(), parse_match("zz"), &log);
  EXPECT_EQ(log.warnings.size(), 1u);
  EXPECT_EQ(render_ir(k), render_ir(fgh()));
}

TEST(ExpandAllRules, Gravity) {
  Kernel k = make_kernel({"{[i,j,n,n2]: 0<=i,j<npart and 0<=n,n2<3}"}, R"(
grav_force(m, M, r) := -66.742*m*M/r**2
<> radc = sqrt(sum(n, (x[i,n]-center[n])**2))
<> rad_j = sqrt(sum(n2, (x[i,n2]-x[j,n2])**2))
force[i] = grav_force(mass[i], massc, radc) + sum(j, grav_force(mass[i], mass[j], rad_j))
)",
                         "gravity");
  k = expand_all_rules(k);
  std::string rhs = render(k.find_instruction("insn_2")->rhs);
  std::size_t count = 0;
  for (std::size_t p = rhs.find("-66.742"); p != std::string::npos; p = rhs.find("-66.742", p + 1)) ++count;
  EXPECT_EQ(count, 2u) << rhs;
  EXPECT_EQ(rhs, "-66.742*mass[i]*massc/radc**2 + sum(j, -66.742*mass[i]*mass[j]/rad_j**2)");
}

TEST(ExpandAllRules, RecursionIsAnError) {
  Kernel k = make_kernel({"{[i]: 0<=i<n}"}, "out[i] = u[i]", "r");
  SubstitutionRule r{"loop", {"x"}, parse_expr("loop(x) + 1"), {}};
  r.body = rule_call("loop", std::nullopt, {var("x")});
  k.rules.push_back(r);
  k.instructions[0].rhs = rule_call("loop", std::nullopt, {var("i")});
  EXPECT_THROW(expand_all_rules(k), TransformError);
}

TEST(SplitIname, ForwardDifference) {
  Kernel k = split_iname(forward_diff(), "i", 16, "g.0", "l.0");
  EXPECT_IR_HAS(k, "result[i_outer*16 + i_inner] = u[i_outer*16 + i_inner + 1] - u[i_outer*16 + i_inner]");
  EXPECT_EQ(k.instructions[0].within, (std::set<std::string>{"i_inner", "i_outer"}));
  EXPECT_EQ(k.tag_of("i_outer").str(), "g.0");
  EXPECT_EQ(k.tag_of("i_inner").str(), "l.0");
  EXPECT_EQ(k.iname_order, (std::vector<std::string>{"i_outer", "i_inner"}));
  EXPECT_FALSE(k.is_iname("i"));
}

TEST(SplitIname, NestedDomainFollows) {
  Kernel k = make_kernel({"{[i]: 0<=i<n}", "{[j]: 0<=j<=i}"}, "out[i] = sum(j, a[i,j])", "tri");
  k = split_iname(k, "i", 4);
  EXPECT_FALSE(k.domains.node(1).has_param("i"));
  EXPECT_TRUE(k.domains.node(1).has_param("i_outer"));
}

TEST(SplitIname, Errors) {
  EXPECT_THROW(split_iname(forward_diff(), "q", 16), TransformError);
  EXPECT_THROW(split_iname(forward_diff(), "i", 16, "warp.0"), TransformError);
  EXPECT_THROW(split_iname(forward_diff(), "i", 0), TransformError);
  Kernel tagged = split_iname(forward_diff(), "i", 16, "g.0");
  EXPECT_THROW(split_iname(tagged, "i_outer", 2), TransformError);
  Kernel red = make_kernel({"{[i,j]: 0<=i,j<n}"}, "out[i] = sum(j, a[i,j])", "red");
  EXPECT_THROW(split_iname(red, "j", 2), TransformError);
}

TEST(Assume, DivisibilityAndConstraints) {
  Kernel k = assume(forward_diff(), "n mod 16 = 0");
  ASSERT_EQ(k.assumptions.divisibility.size(), 1u);
  EXPECT_EQ(k.assumptions.divisibility[0].modulus, 16);
  k = assume(k, "n >= 1");
  EXPECT_EQ(k.assumptions.param_constraints.size(), 1u);
  EXPECT_THROW(assume(k, "i >= 0"), TransformError);
}

TEST(TagInstructions, Matching) {
  Kernel k = make_kernel({"{[i]: 0<=i<n}"}, "a[i] = 1 {id=one}\nb[i] = 2 {id=two}", "t");
  Kernel all = tag_instructions(k, parse_match("*"), "x");
  for (const auto& insn : all.instructions) EXPECT_TRUE(insn.tags.count("x"));
  Kernel one = tag_instructions(k, parse_match("two"), "y");
  EXPECT_FALSE(one.find_instruction("one")->tags.count("y"));
  EXPECT_TRUE(one.find_instruction("two")->tags.count("y"));
  TransformLog log;
  tag_instructions(k, parse_match("none*"), "z", &log);
  EXPECT_EQ(log.warnings.size(), 1u);
}

TEST(TemporaryToSubst, TwoLoops) {
  Kernel k = parse_knl(R"(kernel two
domain {[i]: 0<=i<n}
domain {[i_0]: 0<=i_0<n}
arg inp: f64[n]
arg out: f64[n] out
arg n: i32
temp a: f64[n]
---
a[i] = 6*inp[i]
out[i_0] = 5*a[i_0]
)");
  k = temporary_to_subst(k, "a");
  EXPECT_IR_HAS(k, "  a_subst(i) := 6*inp[i]\n");
  EXPECT_IR_HAS(k, "  out[i_0] = 5*a_subst(i_0)  {id=insn_1, inames=i_0}\n");
  EXPECT_EQ(k.find_temporary("a"), nullptr);
  EXPECT_EQ(k.instructions.size(), 1u);
}

TEST(TemporaryToSubst, ScalarAndErrors) {
  Kernel k = make_kernel({"{[i]: 0<=i<n}"}, "<> t = 2*x\nout[i] = t*u[i]", "s");
  Kernel r = temporary_to_subst(k, "t");
  EXPECT_IR_HAS(r, "  t_subst() := 2*x\n");
  EXPECT_IR_HAS(r, "out[i] = t_subst()*u[i]");
  EXPECT_TRUE(r.instructions[0].depends_on.empty());
  Kernel two = make_kernel({"{[i]: 0<=i<n}"}, "<> t = 2*x\nt = 3*x {id=again}\nout[i] = t*u[i]", "s");
  EXPECT_THROW(temporary_to_subst(two, "t"), TransformError);
  EXPECT_THROW(temporary_to_subst(k, "out"), TransformError);
}

TEST(Precompute, ForwardDifference) {
  Kernel k = precompute(forward_diff_prepared(), "u_acc", {"i_inner"});
  const auto* t = k.find_temporary("u_acc_0");
  ASSERT_NE(t, nullptr);
  ASSERT_EQ(t->shape.size(), 1u);
  EXPECT_EQ(t->shape[0].str(), "17");
  EXPECT_EQ(t->base_offsets[0].str(), "16*i_outer");
  EXPECT_EQ(t->space, AddressSpace::private_);
  EXPECT_EQ(t->dtype, DType::f32);
  EXPECT_IR_HAS(k, "  u_acc_0[j] = u[16*i_outer + j]  {id=insn_1, inames=i_outer:j}\n");
  EXPECT_IR_HAS(k, "result[i_outer*16 + i_inner] = u_acc_0[1 + i_inner] - u_acc_0[i_inner]  {id=insn_0, "
                   "inames=i_inner:i_outer, dep=insn_1}");
  EXPECT_EQ(k.tag_of("j").kind, IndexTag::Kind::sequential);
  EXPECT_TRUE(contains(render_ir(k), "  1: {[j]: j <= 16 and 0 <= j}\n")) << render_ir(k);
}

TEST(Precompute, TwoSweepInamesFollowSweepOrder) {
  Kernel k = make_kernel({"{[i,k]: 0<=i<m and 0<=k<l}"}, "out[i,k] = 2*a[i,k]", "tile");
  k = split_iname(k, "i", 16, "g.0", "l.1");
  k = split_iname(k, "k", 32);
  k = assume(k, "m mod 16 = 0");
  k = assume(k, "l mod 32 = 0");
  k = extract_subst(k, "a_acc", "a[i1,i2]", {"i1", "i2"});
  k = precompute(k, "a_acc", {"k_inner,i_inner"});
  const auto* t = k.find_temporary("a_acc_0");
  ASSERT_NE(t, nullptr);
  ASSERT_EQ(t->shape.size(), 2u);
  EXPECT_EQ(t->shape[0].str(), "32");
  EXPECT_EQ(t->shape[1].str(), "16");
  EXPECT_EQ(t->space, AddressSpace::workgroup);
}

TEST(Precompute, ScalarRule) {
  Kernel k = make_kernel({"{[i]: 0<=i<n}"}, "c := 2*x\nout[i] = c*u[i]", "s");
  k = precompute(k, "c", {});
  const auto* t = k.find_temporary("c_0");
  ASSERT_NE(t, nullptr);
  EXPECT_TRUE(t->shape.empty());
  EXPECT_IR_HAS(k, "  c_0 = 2*x  {id=insn_1}\n");
  EXPECT_IR_HAS(k, "out[i] = c_0*u[i]");
}

TEST(Precompute, Errors) {
  Kernel k = make_kernel({"{[i]: 0<=i<n}"}, "sq(x) := x*x\nout[i] = sq(u[i])", "s");
  EXPECT_THROW(precompute(k, "sq", {"i"}), TransformError);
  EXPECT_THROW(precompute(forward_diff_prepared(), "u_acc", {"nope"}), TransformError);
  TransformLog log;
  Kernel same = precompute(forward_diff_prepared(), "zz", {"i_inner"}, std::nullopt, &log);
  EXPECT_EQ(log.warnings.size(), 1u);
  EXPECT_EQ(render_ir(same), render_ir(forward_diff_prepared()));
}
