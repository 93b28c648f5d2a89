// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "loopforge/error.hpp"
#include "loopforge/polyset.hpp"
#include "support/set_oracle.hpp"

using namespace loopforge;
using namespace loopforge::poly;
using loopforge::testing::brute_points;
using loopforge::testing::Point;
using loopforge::testing::eval_max;
using loopforge::testing::eval_min;

namespace {

AffineExpr var(const std::string& n, std::int64_t k = 1) { return AffineExpr::variable(n, k); }
AffineExpr lit(std::int64_t c) { return AffineExpr(c); }

std::set<Constraint> as_set(const std::vector<Constraint>& cs) { return {cs.begin(), cs.end()}; }

}  // namespace

TEST(Parse, SimpleRange) {
  BasicSet s = parse_set("{[i]: 0<=i<n}");
  EXPECT_EQ(s.dims(), std::vector<std::string>{"i"});
  EXPECT_EQ(s.params(), std::vector<std::string>{"n"});
  std::set<Constraint> want{Constraint::ge0(var("i")),
                            Constraint::ge0(var("n") - var("i") - lit(1))};
  EXPECT_EQ(as_set(s.constraints()), want);
}

TEST(Parse, CommaGroupsExpandPairwise) {
  BasicSet s = parse_set("{[i,j,n,n2]: 0<=i,j<npart and 0<=n,n2<3}");
  EXPECT_EQ(s.dims(), (std::vector<std::string>{"i", "j", "n", "n2"}));
  EXPECT_EQ(s.params(), std::vector<std::string>{"npart"});
  EXPECT_EQ(s.constraints().size(), 8u);
  for (const auto& c : s.constraints()) EXPECT_FALSE(c.is_equality());
  // Spot-check against points.
  EXPECT_TRUE(s.contains({{"i", 0}, {"j", 4}, {"n", 2}, {"n2", 0}, {"npart", 5}}));
  EXPECT_FALSE(s.contains({{"i", 0}, {"j", 5}, {"n", 2}, {"n2", 0}, {"npart", 5}}));
  EXPECT_FALSE(s.contains({{"i", 0}, {"j", 0}, {"n", 3}, {"n2", 0}, {"npart", 5}}));
}

TEST(Parse, ContradictoryBoundsAreEmpty) {
  EXPECT_TRUE(parse_set("{[i]: 0<=i<0}").is_empty());
  EXPECT_FALSE(parse_set("{[i]: 0<=i<1}").is_empty());
  EXPECT_TRUE(parse_set("{[i,j]: 0<=i<=j and j<=i-1}").is_empty());
}

TEST(Parse, ChainsAndImplicitProducts) {
  BasicSet a = parse_set("{[i]: 0 <= 2i < n}");
  BasicSet b = parse_set("{[i]: 0 <= 2*i and 2*i <= n - 1}");
  EXPECT_EQ(a, b);
  BasicSet e = parse_set("{[i, j]: i = j + 1 and 0 <= j < 4}");
  EXPECT_EQ(enumerate_points(e, {}).size(), 4u);
}

TEST(Parse, Errors) {
  try {
    parse_set("{[i]: 0<=i*j<n}");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("non-affine"), std::string::npos);
    EXPECT_EQ(e.offset(), 9u);
  }
  EXPECT_THROW(parse_set("{[i]: 0<=i<n or i > 3}"), ParseError);
  EXPECT_THROW(parse_set("{[i]: 0<=i<n"), ParseError);
  EXPECT_THROW(parse_set("{[i,i]: 0<=i<n}"), ParseError);
  EXPECT_THROW(parse_set("{[i]: 0<=i<n} extra"), ParseError);
  EXPECT_THROW(parse_set("{[i]: 0 <= i ; i < n}"), ParseError);
}

TEST(Parse, RenderRoundTripIsFixpoint) {
  for (const char* text : {"{[i]: 0<=i<n}", "{[i,j,n,n2]: 0<=i,j<npart and 0<=n,n2<3}",
                           "{[i,j]: 0<=i<n and i<=j<m}", "{[k]: 3 <= 2k + 1 <= 17}",
                           "{[a, b]: a = 2b and 0 <= b < 5}"}) {
    BasicSet once = parse_set(parse_set(text).str());
    BasicSet twice = parse_set(once.str());
    EXPECT_EQ(once.str(), twice.str()) << text;
    EXPECT_EQ(once, twice) << text;
  }
}

TEST(Canonical, ContentAndTightening) {
  // 2i - 3 >= 0 tightens to i - 2 >= 0.
  Constraint c = Constraint::ge0(var("i", 2) - lit(3));
  EXPECT_EQ(c.expr, var("i") - lit(2));
  Constraint e = Constraint::eq0(var("i", -4) + var("j", 6));
  EXPECT_EQ(e.expr, var("i", 2) - var("j", 3));
  BasicSet s({"i"}, {}, {Constraint::eq0(var("i", 2) - lit(3))});
  EXPECT_TRUE(s.is_empty());
}

TEST(Split, SplitBy16) {
  BasicSet s = split_dim(parse_set("{[i]: 0<=i<n}"), "i", 16, "i_outer", "i_inner");
  EXPECT_EQ(s.dims(), (std::vector<std::string>{"i_outer", "i_inner"}));
  EXPECT_EQ(s, parse_set("{[i_outer,i_inner]: 0<=16i_outer+i_inner<n and 0<=i_inner<16}"));
}

TEST(Split, FactorEqualToExtentCollapsesOuter) {
  BasicSet s = split_dim(parse_set("{[i]: 0<=i<16}"), "i", 16, "i_outer", "i_inner");
  Bounds b = bounds_for(s, "i_outer", {}, {});
  ASSERT_EQ(b.lower.size(), 1u);
  ASSERT_EQ(b.upper.size(), 1u);
  EXPECT_EQ(b.lower[0].evaluate({}), 0);
  EXPECT_EQ(b.upper[0].evaluate({}), 0);
}

TEST(Split, SplitOf37By8IsBijective) {
  BasicSet orig = parse_set("{[i]: 0<=i<37}");
  BasicSet s = split_dim(orig, "i", 8, "io", "ii");
  auto pts = brute_points(s, {}, -2, 40);
  EXPECT_EQ(pts.size(), 37u);
  std::set<std::int64_t> images;
  for (const auto& p : pts) images.insert(8 * p[0] + p[1]);
  EXPECT_EQ(images.size(), 37u);
  EXPECT_EQ(*images.begin(), 0);
  EXPECT_EQ(*images.rbegin(), 36);
}

TEST(Split, Errors) {
  BasicSet s = parse_set("{[i,j]: 0<=i,j<n}");
  EXPECT_THROW(split_dim(s, "k", 4, "a", "b"), Error);
  EXPECT_THROW(split_dim(s, "i", 4, "j", "b"), Error);
  EXPECT_THROW(split_dim(s, "i", 4, "n", "b"), Error);
  EXPECT_THROW(split_dim(s, "i", 0, "a", "b"), Error);
}

TEST(Project, InnerOfSplitSet) {
  BasicSet s = split_dim(parse_set("{[i]: 0<=i<n}"), "i", 16, "i_outer", "i_inner");
  bool exact = false;
  BasicSet p = project_out(s, "i_inner", &exact);
  std::set<Constraint> want{Constraint::ge0(var("i_outer")),
                            Constraint::ge0(var("n") - lit(1) - var("i_outer", 16))};
  EXPECT_EQ(as_set(p.constraints()), want);
  // Cross-check against the integer projection for n = 1..64.
  for (std::int64_t n = 1; n <= 64; ++n) {
    std::set<std::int64_t> proj;
    for (const auto& pt : brute_points(s, {{"n", n}}, -1, 70)) proj.insert(pt[0]);
    auto got = brute_points(p, {{"n", n}}, -1, 70);
    ASSERT_EQ(got.size(), proj.size()) << n;
    for (const auto& g : got) EXPECT_TRUE(proj.count(g[0]));
  }
}

TEST(Project, OnlyDimLeavesParameterCondition) {
  BasicSet p = project_out(parse_set("{[i]: 0<=i<n}"), "i");
  EXPECT_TRUE(p.dims().empty());
  ASSERT_EQ(p.constraints().size(), 1u);
  EXPECT_EQ(p.constraints()[0], Constraint::ge0(var("n") - lit(1)));
}

TEST(Project, TriangularDropsJ) {
  BasicSet s = parse_set("{[i,j]: 0<=i<n and i<=j<n}");
  BasicSet p = project_out(s, "j");
  EXPECT_EQ(p, parse_set("{[i]: 0<=i<n}"));
  for (std::int64_t n = 1; n <= 8; ++n) {
    std::set<std::int64_t> proj;
    for (const auto& pt : brute_points(s, {{"n", n}}, -1, 10)) proj.insert(pt[0]);
    EXPECT_EQ(brute_points(p, {{"n", n}}, -1, 10).size(), proj.size());
  }
}

TEST(Bounds, SimpleRange) {
  Bounds b = bounds_for(parse_set("{[i]: 0<=i<n}"), "i", {}, {});
  ASSERT_EQ(b.lower.size(), 1u);
  ASSERT_EQ(b.upper.size(), 1u);
  EXPECT_EQ(b.lower[0].affine(), lit(0));
  EXPECT_TRUE(b.upper[0].is_affine());
  EXPECT_EQ(b.upper[0].affine(), var("n") - lit(1));
}

TEST(Bounds, SplitOuterUsesFloor) {
  BasicSet s = split_dim(parse_set("{[i]: 0<=i<n}"), "i", 16, "i_outer", "i_inner");
  Bounds b = bounds_for(s, "i_outer", {}, {});
  ASSERT_EQ(b.upper.size(), 1u);
  EXPECT_EQ(b.upper[0].base, lit(-1));
  EXPECT_EQ(b.upper[0].numerator, var("n") + lit(15));
  EXPECT_EQ(b.upper[0].divisor, 16);
  for (std::int64_t n = 0; n <= 100; ++n)
    EXPECT_EQ(b.upper[0].evaluate({{"n", n}}), (n + 15) / 16 - 1) << n;
}

TEST(Bounds, DivisibilityGivesExactQuotient) {
  BasicSet s = split_dim(parse_set("{[i]: 0<=i<n}"), "i", 16, "i_outer", "i_inner");
  Assumptions asm_;
  asm_.divisibility.push_back(parse_divisibility("n mod 16 = 0"));
  Bounds b = bounds_for(s, "i_outer", {}, asm_);
  ASSERT_EQ(b.upper.size(), 1u);
  EXPECT_TRUE(b.upper[0].is_affine());
  std::string q = Assumptions::quotient_name("n", 16);
  EXPECT_EQ(b.upper[0].affine(), var(q) - lit(1));
  for (std::int64_t n : {16, 32, 48}) {
    auto pts = enumerate_points(s, {{"n", n}});
    std::int64_t hi = 0;
    for (const auto& p : pts) hi = std::max(hi, p[0]);
    EXPECT_EQ(b.upper[0].evaluate(asm_.extend_valuation({{"n", n}})), hi);
  }
  // Inner bounds need no guard once divisibility is known.
  std::vector<std::string> fixed{"i_outer"};
  Bounds inner = bounds_for(s, "i_inner", fixed, asm_);
  ASSERT_EQ(inner.upper.size(), 1u);
  EXPECT_EQ(inner.upper[0].affine(), lit(15));
}

TEST(Bounds, UnboundedIsError) {
  BasicSet s({"i"}, {}, {Constraint::ge0(var("i"))});
  try {
    bounds_for(s, "i", {}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("'i'"), std::string::npos);
  }
  EXPECT_THROW(enumerate_points(s, {}), Error);
}

TEST(Assume, ChecksBindings) {
  Assumptions a;
  a.divisibility.push_back(parse_divisibility("n mod 16 = 0"));
  a.param_constraints = parse_constraint_text("n >= 1");
  EXPECT_NO_THROW(a.check({{"n", 32}}));
  EXPECT_THROW(a.check({{"n", 33}}), Error);
  EXPECT_THROW(a.check({{"n", 0}}), Error);
  EXPECT_EQ(a.modulus_of("n"), 16);
  EXPECT_EQ(a.modulus_of("m"), 1);
  EXPECT_FALSE(try_parse_divisibility("n >= 1").has_value());
  EXPECT_THROW(parse_divisibility("n mod 16 = 1"), ParseError);
}

TEST(Enumerate, Examples) {
  BasicSet s = parse_set("{[i]: 0<=i<n}");
  auto pts = enumerate_points(s, {{"n", 3}});
  EXPECT_EQ(pts, (std::vector<Point>{{0}, {1}, {2}}));
  BasicSet sp = split_dim(s, "i", 16, "i_outer", "i_inner");
  auto sp_pts = enumerate_points(sp, {{"n", 32}});
  EXPECT_EQ(sp_pts.size(), 32u);
  for (const auto& p : sp_pts) {
    EXPECT_TRUE(p[0] == 0 || p[0] == 1);
    EXPECT_TRUE(p[1] >= 0 && p[1] <= 15);
  }
  EXPECT_TRUE(enumerate_points(parse_set("{[i]: 0<=i<0}"), {}).empty());
  EXPECT_THROW(enumerate_points(s, {}), Error);
}

TEST(Enumerate, MatchesBruteForce) {
  BasicSet s = parse_set("{[i,j,k]: 0<=i<n and i<=j<=i+3 and 0<=k<=j and 2k <= i + 5}");
  for (std::int64_t n : {0, 1, 5, 9}) {
    auto fast = enumerate_points(s, {{"n", n}});
    auto slow = brute_points(s, {{"n", n}}, -1, 15);
    EXPECT_EQ(fast, slow) << n;
  }
}

TEST(DomainTree, PathsAndValidation) {
  DomainTree t;
  auto root = t.add(parse_set("{[i]: 0<=i<n}"), std::nullopt);
  auto child = t.add(parse_set("{[j]: 0<=j<=i}"), root);
  EXPECT_EQ(t.path(child), (std::vector<std::size_t>{root, child}));
  EXPECT_NO_THROW(t.validate());
  BasicSet ps = t.path_set("j");
  EXPECT_EQ(ps.dims(), (std::vector<std::string>{"i", "j"}));
  EXPECT_EQ(ps.params(), std::vector<std::string>{"n"});
  EXPECT_EQ(t.all_params(), std::vector<std::string>{"n"});
  EXPECT_THROW(t.add(parse_set("{[i]: 0<=i<3}"), std::nullopt), Error);

  DomainTree bad;
  bad.add(parse_set("{[i]: 0<=i<n}"), std::nullopt);
  bad.add(parse_set("{[j]: 0<=j<=i}"), std::nullopt);
  EXPECT_THROW(bad.validate(), Error);
}

// Random-set properties; the acceptance suite runs the full-size version.
TEST(Property, SplitIsBijection) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    auto rs = loopforge::testing::random_set(rng);
    const auto& dims = rs.set.dims();
    std::string target = dims[rng() % dims.size()];
    std::int64_t factor = std::vector<std::int64_t>{2, 3, 8, 16}[rng() % 4];
    BasicSet sp = split_dim(rs.set, target, factor, target + "_o", target + "_i");
    for (const auto& params : rs.param_grid) {
      auto orig = brute_points(rs.set, params, -1, 46);
      auto split = enumerate_points(sp, params);
      ASSERT_EQ(orig.size(), split.size());
      std::set<Point> images;
      for (const auto& p : split) {
        Valuation v;
        for (std::size_t k = 0; k < p.size(); ++k) v[sp.dims()[k]] = p[k];
        Point back;
        for (const auto& d : dims)
          back.push_back(d == target ? factor * v[target + "_o"] + v[target + "_i"] : v[d]);
        images.insert(back);
      }
      EXPECT_EQ(images, std::set<Point>(orig.begin(), orig.end()));
    }
  }
}

TEST(Property, BoundsAreTight) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    auto rs = loopforge::testing::random_set(rng);
    const auto& dims = rs.set.dims();
    for (std::size_t k = 0; k < dims.size(); ++k) {
      Bounds b = bounds_for(rs.set, dims[k], {}, {});
      for (const auto& params : rs.param_grid) {
        auto pts = brute_points(rs.set, params, -1, 46);
        if (pts.empty()) continue;
        std::int64_t lo = pts[0][k], hi = pts[0][k];
        for (const auto& p : pts) {
          lo = std::min(lo, p[k]);
          hi = std::max(hi, p[k]);
        }
        EXPECT_EQ(eval_max(b.lower, params), lo) << rs.set.str();
        EXPECT_EQ(eval_min(b.upper, params), hi) << rs.set.str();
      }
    }
  }
}
