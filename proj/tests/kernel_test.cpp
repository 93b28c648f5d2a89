// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "loopforge/error.hpp"
#include "loopforge/kernel.hpp"

using namespace loopforge;

namespace {

const char* kGravityDomain = "{[i,j,n,n2]: 0<=i,j<npart and 0<=n,n2<3}";
const char* kGravityBody = R"(
grav_force(m, M, r) := -66.742*m*M/r**2
<> radc = sqrt(sum(n, (x[i,n]-center[n])**2))
<> rad_j = sqrt(sum(n2, (x[i,n2]-x[j,n2])**2))
force[i] = grav_force(mass[i], massc, radc) + sum(j, grav_force(mass[i], mass[j], rad_j))
)";

const Instruction& writer_of(const Kernel& k, const std::string& name) {
  for (const auto& insn : k.instructions)
    if (insn.assignee() == name) return insn;
  throw std::runtime_error("no writer of " + name);
}

std::string shape_of(const ArgDecl& a) {
  std::string s;
  for (const auto& x : a.shape) s += (s.empty() ? "" : ",") + x.str();
  return s;
}

}  // namespace

TEST(MakeKernel, ScaledCopy) {
  Kernel k = make_kernel({"{[i]: 0<=i<n}"}, "out[i] = 2*a[i]", "scale");
  ASSERT_EQ(k.instructions.size(), 1u);
  const auto& insn = k.instructions[0];
  EXPECT_EQ(insn.id, "insn_0");
  EXPECT_EQ(insn.within, std::set<std::string>{"i"});
  EXPECT_TRUE(insn.depends_on.empty());
  ASSERT_EQ(k.args.size(), 3u);
  EXPECT_EQ(k.args[0].name, "out");
  EXPECT_TRUE(k.args[0].is_output);
  EXPECT_EQ(shape_of(k.args[0]), "n");
  EXPECT_EQ(k.args[1].name, "a");
  EXPECT_FALSE(k.args[1].is_output);
  EXPECT_EQ(k.args[2].name, "n");
  EXPECT_EQ(k.args[2].kind, ArgKind::scalar);
  EXPECT_EQ(k.args[2].dtype, DType::i32);
}

TEST(MakeKernel, ShapeFromLargestIndex) {
  Kernel k = make_kernel({"{[i]: 0<=i<n}"}, "result[i] = u[i+1]-u[i]", "diff");
  EXPECT_EQ(shape_of(*k.find_arg("u")), "n + 1");
  EXPECT_EQ(shape_of(*k.find_arg("result")), "n");
  EXPECT_THROW(make_kernel({"{[i]: 0<=i<n}"}, "out[i] = a[i*i]", "bad"), Error);
}

TEST(MakeKernel, Gravity) {
  Kernel k = make_kernel({kGravityDomain}, kGravityBody, "gravity");
  ASSERT_EQ(k.rules.size(), 1u);
  ASSERT_EQ(k.instructions.size(), 3u);
  const auto& radc = writer_of(k, "radc");
  const auto& rad_j = writer_of(k, "rad_j");
  const auto& force = writer_of(k, "force");
  EXPECT_EQ(radc.within, std::set<std::string>{"i"});
  EXPECT_EQ(rad_j.within, (std::set<std::string>{"i", "j"}));
  EXPECT_EQ(force.within, std::set<std::string>{"i"});
  EXPECT_EQ(force.depends_on, (std::set<std::string>{radc.id, rad_j.id}));
  EXPECT_EQ(k.find_temporary("radc")->dtype, DType::f32);
  EXPECT_EQ(shape_of(*k.find_arg("x")), "npart,3");
  EXPECT_EQ(shape_of(*k.find_arg("center")), "3");
  EXPECT_EQ(k.find_arg("massc")->kind, ArgKind::scalar);
  // The rule call was resolved into an invocation.
  EXPECT_EQ(force.rhs->args[0]->kind, ExprKind::rule);
}

TEST(MakeKernel, EmptyBody) {
  Kernel k = make_kernel({"{[i]: 0<=i<n}"}, "", "empty");
  EXPECT_TRUE(k.instructions.empty());
  EXPECT_NO_THROW(validate(k));
}

TEST(MakeKernel, NestedDomains) {
  Kernel k = make_kernel({"{[i]: 0<=i<n}", "{[j]: 0<=j<=i}"}, "out[i] = sum(j, a[i,j])", "tri");
  ASSERT_EQ(k.domains.size(), 2u);
  EXPECT_EQ(k.domains.parent(1), std::optional<std::size_t>(0));
  EXPECT_EQ(shape_of(*k.find_arg("a")), "n,n");
}

TEST(MakeKernel, Errors) {
  EXPECT_THROW(make_kernel({"{[i]: 0<=i<n}"}, "a[i] = b[i] {id=x, dep=y}\nb[i] = a[i] {id=y, dep=x}", "c"),
               Error);
  try {
    make_kernel({"{[i]: 0<=i<n}"}, "a[i] = b[i] {id=x, dep=y}\nb[i] = a[i] {id=y, dep=x}", "c");
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("cycle"), std::string::npos);
  }
  KernelOptions strict;
  ArgDecl out;
  out.name = "out";
  out.shape = {poly::AffineExpr::variable("n")};
  out.strides = contiguous_strides(out.shape, false);
  strict.args = {out};
  EXPECT_THROW(make_kernel({"{[i]: 0<=i<n}"}, "out[i] = a[i]", "strict", strict), Error);
  EXPECT_THROW(make_kernel({"{[i]: 0<=i<n}"}, "i = 1", "iname"), Error);
  EXPECT_THROW(make_kernel({"{[i]: 0<=i<n}"}, "out[i] = frob(i)", "fn"), Error);
  EXPECT_THROW(make_kernel({"{[i]: 0<=i<n}"}, "out[i] = 1 {id=x}\nout[i] = 2 {id=x}", "dup"), Error);
  try {
    make_kernel({"{[i]: 0<=i<n}"}, "out[i] = 1\nout[i] = 2 +", "syntax");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.span().line, 2);
  }
}

TEST(MakeKernel, PredicatesNeedWriterDependency) {
  const char* ok = "c = a[i] > 3 {id=w}\nout[i] = 1 {id=s, if=c}";
  Kernel k = make_kernel({"{[i]: 0<=i<n}"}, ok, "p");
  EXPECT_EQ(k.find_instruction("s")->depends_on, std::set<std::string>{"w"});
  EXPECT_EQ(k.find_temporary("c")->dtype, DType::i32);
  const char* bad = "c = a[i] > 3 {id=w}\nout[i] = 1 {id=s, dep=, if=c}";
  EXPECT_THROW(make_kernel({"{[i]: 0<=i<n}"}, bad, "p"), Error);
}

TEST(FreshName, Counters) {
  Kernel k = make_kernel({"{[i]: 0<=i<n}"}, "h(x) := x\nu_acc(j) := u[j]\nout[i] = h(i) + u_acc(i)", "f");
  EXPECT_EQ(fresh_name(k, "h"), "h_0");
  EXPECT_EQ(fresh_name(k, "u_acc"), "u_acc_0");
  EXPECT_EQ(fresh_name(k, "g"), "g");
  EXPECT_EQ(fresh_name(k, "n"), "n_0");
  EXPECT_EQ(fresh_instruction_id(k, "insn"), "insn_1");
}

TEST(IndexTag, ParseAndPrint) {
  EXPECT_EQ(IndexTag::parse("g.0").str(), "g.0");
  EXPECT_EQ(IndexTag::parse("l.1").str(), "l.1");
  EXPECT_TRUE(IndexTag::parse("l.1").is_parallel());
  EXPECT_EQ(IndexTag::parse("unroll").kind, IndexTag::Kind::unroll);
  EXPECT_THROW(IndexTag::parse("g.7"), TransformError);
  EXPECT_THROW(IndexTag::parse("vec"), TransformError);
}

TEST(Strides, RowAndColumnMajor) {
  std::vector<poly::AffineExpr> shape{poly::AffineExpr::variable("m"), poly::AffineExpr(3)};
  auto row = contiguous_strides(shape, false);
  EXPECT_EQ(row[0].str(), "3");
  EXPECT_EQ(row[1].str(), "1");
  auto col = contiguous_strides(shape, true);
  EXPECT_EQ(col[0].str(), "1");
  EXPECT_EQ(col[1].str(), "m");
  std::vector<poly::AffineExpr> both{poly::AffineExpr::variable("m"), poly::AffineExpr::variable("l"),
                                     poly::AffineExpr::variable("k")};
  EXPECT_THROW(contiguous_strides(both, false), Error);
}

TEST(Typing, WeakLiterals) {
  Kernel k = make_kernel({"{[i]: 0<=i<n}"}, "out[i] = 2*a[i] + i/2", "t");
  auto t = type_rhs(k, k.instructions[0]);
  EXPECT_EQ(t.type, DType::f64);  // i/2 divides in double
  const auto& scaled = t.args[0];
  EXPECT_EQ(scaled.type, DType::f32);
  EXPECT_EQ(scaled.args[0].type, DType::f32);  // the literal adopts f32
  EXPECT_EQ(natural_type(k, parse_expr("i + 1")), DType::i32);
  EXPECT_EQ(natural_type(k, parse_expr("1.5")), DType::f64);
  EXPECT_EQ(natural_type(k, parse_expr("a[i]*1.5")), DType::f32);
  EXPECT_EQ(natural_type(k, parse_expr("a[i] > 3")), DType::i32);
  auto cmp = type_expr(k, parse_expr("a[i] >= 3"), std::nullopt, DType::f64);
  EXPECT_EQ(cmp.operand, DType::f32);
  auto pw = type_expr(k, parse_expr("a[i]**2"), std::nullopt, DType::f64);
  EXPECT_EQ(pw.int_power, 2);
  EXPECT_EQ(pw.type, DType::f32);
  auto fp = type_expr(k, parse_expr("a[i]**0.5"), std::nullopt, DType::f64);
  EXPECT_EQ(fp.int_power, -1);
  EXPECT_EQ(fp.type, DType::f32);
}

TEST(Ir, DumpSections) {
  KernelOptions opts;
  opts.assumptions = {"n mod 16 = 0"};
  Kernel k = make_kernel({"{[i]: 0<=i<n}"}, "out[i] = 2*a[i]", "scale", opts);
  std::string ir = render_ir(k);
  EXPECT_NE(ir.find("kernel scale\n"), std::string::npos);
  EXPECT_NE(ir.find("  out: f32[n] out\n"), std::string::npos);
  EXPECT_NE(ir.find("  n: i32\n"), std::string::npos);
  EXPECT_NE(ir.find("assumptions:\n"), std::string::npos);
  EXPECT_NE(ir.find("  out[i] = 2*a[i]  {id=insn_0, inames=i}\n"), std::string::npos);
}

TEST(Ir, KnlRoundTrip) {
  const char* text = R"(kernel fill
domain {[i]: 0<=i<n}
arg out: f64[n] out
arg a: f64
arg n: i32
tag i l.0
---
out[i] = a
)";
  Kernel k = parse_knl(text);
  EXPECT_EQ(k.name, "fill");
  EXPECT_EQ(k.tag_of("i").str(), "l.0");
  EXPECT_EQ(k.find_arg("a")->kind, ArgKind::scalar);
  std::string ir = render_ir(k);
  EXPECT_NE(ir.find("  i: l.0\n"), std::string::npos);
  EXPECT_THROW(parse_knl("kernel x\nout[i] = 1\n"), ParseError);
  EXPECT_THROW(parse_knl("bogus line\n---\n"), ParseError);
}

TEST(Property, RenderedInstructionsReparse) {
  Kernel k = make_kernel({kGravityDomain}, kGravityBody, "gravity");
  for (const auto& insn : k.instructions) {
    auto s = parse_statement(render_instruction(insn));
    ASSERT_TRUE(s.instruction);
    EXPECT_EQ(render(s.instruction->lhs), render(insn.lhs));
    EXPECT_EQ(render(s.instruction->rhs), render(insn.rhs));
    EXPECT_EQ(s.instruction->options.id, insn.id);
    EXPECT_EQ(s.instruction->options.inames, insn.within);
  }
  for (const auto& r : k.rules) {
    auto s = parse_statement(render_rule(r));
    ASSERT_TRUE(s.rule);
    EXPECT_EQ(render_rule(s.rule->rule), render_rule(r));
  }
}
