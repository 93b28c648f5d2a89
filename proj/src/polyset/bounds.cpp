// SPDX-License-Identifier: Apache-2.0
//
// Assumptions, loop-bound derivation and point enumeration.

#include <algorithm>
#include <functional>
#include <set>
#include <numeric>
#include <sstream>

#include "loopforge/error.hpp"
#include "loopforge/polyset.hpp"
#include "polyset_internal.hpp"

namespace loopforge::poly {

std::int64_t Assumptions::modulus_of(std::string_view param) const {
  std::int64_t m = 1;
  for (const auto& d : divisibility) {
    if (d.expr.constant() == 0 && d.expr.terms().size() == 1 &&
        d.expr.terms().begin()->first == param && d.expr.terms().begin()->second == 1)
      m = std::lcm(m, d.modulus);
  }
  return m;
}

std::string Assumptions::quotient_name(std::string_view param, std::int64_t modulus) {
  return std::string(param) + "/" + std::to_string(modulus);
}

bool Assumptions::is_quotient_name(std::string_view name) {
  return name.find('/') != std::string_view::npos;
}

std::pair<std::string, std::int64_t> Assumptions::split_quotient_name(std::string_view name) {
  auto slash = name.find('/');
  return {std::string(name.substr(0, slash)), std::stoll(std::string(name.substr(slash + 1)))};
}

BasicSet Assumptions::apply(const BasicSet& s) const {
  std::vector<Constraint> cs = s.constraints();
  cs.insert(cs.end(), param_constraints.begin(), param_constraints.end());
  std::vector<std::string> params = s.params();
  for (const auto& c : param_constraints)
    for (const auto& [name, _] : c.expr.terms())
      if (!s.has_dim(name) && std::find(params.begin(), params.end(), name) == params.end())
        params.push_back(name);

  for (auto& p : params) {
    std::int64_t m = modulus_of(p);
    if (m == 1) continue;
    std::string q = quotient_name(p, m);
    for (auto& c : cs) c.expr = c.expr.substitute(p, AffineExpr::variable(q, m));
    p = q;
  }
  return BasicSet(s.dims(), std::move(params), std::move(cs));
}

Valuation Assumptions::extend_valuation(const Valuation& params) const {
  check(params);
  Valuation out = params;
  for (const auto& [name, value] : params) {
    std::int64_t m = modulus_of(name);
    if (m > 1) out[quotient_name(name, m)] = value / m;
  }
  return out;
}

void Assumptions::check(const Valuation& params) const {
  auto bound = [&](const AffineExpr& e) {
    return std::all_of(e.terms().begin(), e.terms().end(),
                       [&](const auto& t) { return params.count(t.first) > 0; });
  };
  for (const auto& d : divisibility) {
    if (!bound(d.expr)) continue;
    std::int64_t v = d.expr.evaluate(params);
    if (v % d.modulus != 0)
      throw Error("assumption violated: " + d.expr.str() + " mod " + std::to_string(d.modulus) +
                  " = 0 (value " + std::to_string(v) + ")");
  }
  for (const auto& c : param_constraints) {
    if (!bound(c.expr)) continue;
    if (!c.holds(params)) throw Error("assumption violated: " + c.str());
  }
}

std::vector<std::string> Assumptions::lines() const {
  std::vector<std::string> out;
  for (const auto& d : divisibility)
    out.push_back(d.expr.str() + " mod " + std::to_string(d.modulus) + " = 0");
  for (const auto& c : param_constraints) out.push_back(c.str());
  return out;
}

QuasiAffineBound make_floor_bound(AffineExpr numerator, std::int64_t divisor) {
  if (divisor <= 0) throw InternalError("floor bound with non-positive divisor");
  QuasiAffineBound b;
  if (divisor == 1) {
    b.base = std::move(numerator);
    return b;
  }
  AffineExpr rest;
  for (const auto& [name, c] : numerator.terms()) {
    std::int64_t q = floor_div(c, divisor);
    b.base.set_coeff(name, q);
    rest.set_coeff(name, c - q * divisor);
  }
  std::int64_t q = floor_div(numerator.constant(), divisor);
  b.base.set_constant(q);
  rest.set_constant(numerator.constant() - q * divisor);
  if (rest.is_constant()) return b;  // floor(r / d) == 0 for 0 <= r < d
  b.numerator = std::move(rest);
  b.divisor = divisor;
  return b;
}

QuasiAffineBound make_ceil_bound(AffineExpr numerator, std::int64_t divisor) {
  return make_floor_bound(numerator + AffineExpr(divisor - 1), divisor);
}

std::int64_t QuasiAffineBound::evaluate(const Valuation& values) const {
  std::int64_t v = base.evaluate(values);
  if (divisor != 1) v += floor_div(numerator.evaluate(values), divisor);
  return v;
}

std::string QuasiAffineBound::str() const {
  if (divisor == 1) return base.str();
  std::string floor_part =
      "floor((" + numerator.str() + ")/" + std::to_string(divisor) + ")";
  if (base.is_zero()) return floor_part;
  return base.str() + " + " + floor_part;
}

namespace {

// True when `a <= b` on every point of the context. Only decidable here
// when `a` is affine.
bool provably_le(const std::vector<Constraint>& context, const QuasiAffineBound& a,
                 const QuasiAffineBound& b) {
  if (!a.is_affine()) return false;
  // a <= b.base + floor(N/d)  <=>  d*(a - b.base) <= N
  AffineExpr lhs = (a.affine() - b.base) * b.divisor;
  AffineExpr rhs = b.is_affine() ? AffineExpr() : b.numerator;
  auto cs = context;
  cs.push_back(Constraint{ConstraintKind::inequality, lhs - rhs - AffineExpr(1)});
  return detail::empty(std::move(cs));
}

// True when `a >= b` everywhere, `a` affine, `b` a floor bound.
bool provably_ge(const std::vector<Constraint>& context, const QuasiAffineBound& a,
                 const QuasiAffineBound& b) {
  if (!a.is_affine()) return false;
  // b.base + floor(N/d) <= a  <=>  N <= d*(a - b.base + 1) - 1
  AffineExpr limit = (a.affine() - b.base + AffineExpr(1)) * b.divisor - AffineExpr(1);
  AffineExpr n = b.is_affine() ? AffineExpr() : b.numerator;
  auto cs = context;
  cs.push_back(Constraint{ConstraintKind::inequality, n - limit - AffineExpr(1)});
  return detail::empty(std::move(cs));
}

void drop_redundant(std::vector<QuasiAffineBound>& bounds, const std::vector<Constraint>& context,
                    bool upper) {
  std::sort(bounds.begin(), bounds.end(), [](const auto& x, const auto& y) {
    if (x.divisor != y.divisor) return x.divisor < y.divisor;
    if (x.base != y.base) return x.base < y.base;
    return x.numerator < y.numerator;
  });
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());
  for (std::size_t j = 0; j < bounds.size();) {
    bool redundant = false;
    for (std::size_t i = 0; i < bounds.size() && !redundant; ++i) {
      if (i == j) continue;
      redundant = upper ? provably_le(context, bounds[i], bounds[j])
                        : provably_ge(context, bounds[i], bounds[j]);
    }
    if (redundant)
      bounds.erase(bounds.begin() + static_cast<std::ptrdiff_t>(j));
    else
      ++j;
  }
}

}  // namespace

Bounds bounds_for(const BasicSet& s, std::string_view iname,
                  std::span<const std::string> fixed_order, const Assumptions& assumptions) {
  if (!s.has_dim(iname)) throw Error("bounds: unknown iname '" + std::string(iname) + "'");
  BasicSet t = assumptions.apply(s);
  for (const auto& d : s.dims()) {
    if (d == iname) continue;
    if (std::find(fixed_order.begin(), fixed_order.end(), d) != fixed_order.end()) continue;
    t = project_out(t, d);
  }

  Bounds out;
  std::vector<Constraint> context;
  for (const auto& c : t.constraints()) {
    std::int64_t a = c.expr.coeff(iname);
    if (a == 0) {
      context.push_back(c);
      continue;
    }
    AffineExpr rest = c.expr;
    rest.set_coeff(iname, 0);
    // a*x + rest >= 0 (or = 0)
    if (a > 0 || c.is_equality()) {
      if (a > 0)
        out.lower.push_back(make_ceil_bound(-rest, a));
      else
        out.lower.push_back(make_ceil_bound(rest, -a));
    }
    if (a < 0 || c.is_equality()) {
      if (a < 0)
        out.upper.push_back(make_floor_bound(rest, -a));
      else
        out.upper.push_back(make_floor_bound(-rest, a));
    }
  }
  if (t.constraints().size() == 1 && t.constraints()[0].is_contradiction()) {
    // Empty set: any bounds that produce no iterations will do.
    out.lower = {make_floor_bound(AffineExpr(0), 1)};
    out.upper = {make_floor_bound(AffineExpr(-1), 1)};
    return out;
  }
  if (out.lower.empty() || out.upper.empty())
    throw Error("iname '" + std::string(iname) + "' is unbounded " +
                (out.lower.empty() ? "below" : "above"));
  // Outer loops only run where the projection of iname is nonempty.
  auto outer = detail::eliminate(t.constraints(), iname, nullptr);
  context.insert(context.end(), outer.begin(), outer.end());
  drop_redundant(out.lower, context, false);
  drop_redundant(out.upper, context, true);
  return out;
}

std::vector<std::vector<std::int64_t>> enumerate_points(const BasicSet& s,
                                                        const Valuation& param_values) {
  BasicSet t = s.fix_params(param_values);
  if (!t.params().empty()) throw Error("parameter '" + t.params().front() + "' is not bound");
  std::vector<std::vector<std::int64_t>> points;
  const auto& dims = t.dims();
  if (t.constraints().size() == 1 && t.constraints()[0].is_contradiction()) return points;

  // levels[k]: the set projected onto dims[0..k].
  std::vector<std::vector<Constraint>> levels(dims.size());
  std::vector<Constraint> cs = t.constraints();
  for (std::size_t k = dims.size(); k-- > 0;) {
    levels[k] = cs;
    cs = detail::eliminate(cs, dims[k], nullptr);
  }
  if (dims.empty()) {
    if (t.constraints().empty()) points.emplace_back();
    return points;
  }
  for (const auto& c : cs)
    if (c.is_contradiction()) return points;

  Valuation point;
  std::vector<std::int64_t> current(dims.size());
  std::function<void(std::size_t)> walk = [&](std::size_t k) {
    const std::string& x = dims[k];
    bool has_lo = false, has_hi = false;
    std::int64_t lo = 0, hi = 0;
    for (const auto& c : levels[k]) {
      std::int64_t a = c.expr.coeff(x);
      if (a == 0) continue;
      AffineExpr rest = c.expr;
      rest.set_coeff(x, 0);
      std::int64_t r = rest.evaluate(point);
      auto lower = [&](std::int64_t v) {
        lo = has_lo ? std::max(lo, v) : v;
        has_lo = true;
      };
      auto upper = [&](std::int64_t v) {
        hi = has_hi ? std::min(hi, v) : v;
        has_hi = true;
      };
      if (c.is_equality()) {
        lower(a > 0 ? ceil_div(-r, a) : ceil_div(r, -a));
        upper(a > 0 ? floor_div(-r, a) : floor_div(r, -a));
      } else if (a > 0) {
        lower(ceil_div(-r, a));
      } else {
        upper(floor_div(r, -a));
      }
    }
    if (!has_lo || !has_hi) throw Error("cannot enumerate: dimension '" + x + "' is unbounded");
    for (std::int64_t v = lo; v <= hi; ++v) {
      point[x] = v;
      current[k] = v;
      if (k + 1 == dims.size())
        points.push_back(current);
      else
        walk(k + 1);
    }
    point.erase(x);
  };
  walk(0);
  return points;
}

std::size_t DomainTree::add(BasicSet node, std::optional<std::size_t> parent) {
  if (parent && *parent >= nodes_.size()) throw InternalError("domain parent out of range");
  for (const auto& d : node.dims())
    if (has_iname(d)) throw Error("iname '" + d + "' is introduced twice");
  nodes_.push_back(std::move(node));
  parents_.push_back(parent);
  return nodes_.size() - 1;
}

void DomainTree::replace(std::size_t index, BasicSet node) { nodes_.at(index) = std::move(node); }

std::optional<std::size_t> DomainTree::node_of(std::string_view iname) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].has_dim(iname)) return i;
  return std::nullopt;
}

std::vector<std::size_t> DomainTree::path(std::size_t index) const {
  std::vector<std::size_t> out;
  std::optional<std::size_t> cur = index;
  while (cur) {
    out.push_back(*cur);
    cur = parents_.at(*cur);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

namespace {

BasicSet combine(const DomainTree& tree, const std::vector<std::size_t>& nodes) {
  std::vector<std::string> dims, params;
  std::vector<Constraint> cs;
  for (auto i : nodes)
    for (const auto& d : tree.node(i).dims()) dims.push_back(d);
  for (auto i : nodes) {
    const auto& n = tree.node(i);
    for (const auto& p : n.params())
      if (std::find(dims.begin(), dims.end(), p) == dims.end() &&
          std::find(params.begin(), params.end(), p) == params.end())
        params.push_back(p);
    cs.insert(cs.end(), n.constraints().begin(), n.constraints().end());
  }
  return BasicSet(std::move(dims), std::move(params), std::move(cs));
}

}  // namespace

BasicSet DomainTree::path_set(std::string_view iname) const {
  auto n = node_of(iname);
  if (!n) throw Error("unknown iname '" + std::string(iname) + "'");
  return combine(*this, path(*n));
}

BasicSet DomainTree::combined_set(std::span<const std::string> inames) const {
  std::vector<std::size_t> nodes;
  for (const auto& i : inames) {
    auto n = node_of(i);
    if (!n) throw Error("unknown iname '" + i + "'");
    for (auto p : path(*n))
      if (std::find(nodes.begin(), nodes.end(), p) == nodes.end()) nodes.push_back(p);
  }
  std::sort(nodes.begin(), nodes.end());
  return combine(*this, nodes);
}

std::vector<std::string> DomainTree::all_inames() const {
  std::vector<std::string> out;
  for (const auto& n : nodes_) out.insert(out.end(), n.dims().begin(), n.dims().end());
  return out;
}

std::vector<std::string> DomainTree::all_params() const {
  auto inames = all_inames();
  std::vector<std::string> out;
  for (const auto& n : nodes_)
    for (const auto& p : n.params())
      if (std::find(inames.begin(), inames.end(), p) == inames.end() &&
          std::find(out.begin(), out.end(), p) == out.end())
        out.push_back(p);
  return out;
}

void DomainTree::validate() const {
  auto inames = all_inames();
  std::set<std::string> seen;
  for (const auto& i : inames)
    if (!seen.insert(i).second) throw Error("iname '" + i + "' is introduced twice");
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    auto p = path(k);
    std::set<std::string> visible;
    for (auto i : p)
      for (const auto& d : nodes_[i].dims()) visible.insert(d);
    for (const auto& param : nodes_[k].params())
      if (seen.count(param) && !visible.count(param))
        throw Error("domain " + std::to_string(k) + " references iname '" + param +
                    "' that is not introduced by an ancestor");
  }
}

}  // namespace loopforge::poly
