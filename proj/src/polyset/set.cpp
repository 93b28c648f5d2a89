// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <set>
#include <sstream>

#include "loopforge/error.hpp"
#include "loopforge/polyset.hpp"
#include "polyset_internal.hpp"

namespace loopforge::poly {

namespace detail {

std::vector<Constraint> normalize(std::vector<Constraint> cs) {
  std::vector<Constraint> out;
  out.reserve(cs.size());
  for (auto& c : cs) {
    Constraint k = canonicalize(std::move(c));
    if (k.is_tautology()) continue;
    if (k.is_contradiction()) return {Constraint::contradiction()};
    out.push_back(std::move(k));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());

  // Among inequalities with identical linear parts keep the tightest.
  std::map<AffineExpr::Terms, std::int64_t> tightest;
  std::vector<Constraint> eqs;
  for (const auto& c : out) {
    if (c.is_equality()) {
      eqs.push_back(c);
      continue;
    }
    auto [it, inserted] = tightest.emplace(c.expr.terms(), c.expr.constant());
    if (!inserted) it->second = std::min(it->second, c.expr.constant());
  }
  // e + c1 >= 0 and -e + c2 >= 0 conflict when c1 + c2 < 0.
  for (const auto& [terms, c] : tightest) {
    AffineExpr::Terms negated;
    for (const auto& [name, k] : terms) negated.emplace(name, -k);
    auto it = tightest.find(negated);
    if (it != tightest.end() && c + it->second < 0) return {Constraint::contradiction()};
  }
  std::vector<Constraint> result = std::move(eqs);
  for (const auto& [terms, c] : tightest) {
    AffineExpr e;
    for (const auto& [name, k] : terms) e.set_coeff(name, k);
    e.set_constant(c);
    result.push_back(Constraint{ConstraintKind::inequality, std::move(e)});
  }
  std::sort(result.begin(), result.end());
  return result;
}

std::vector<Constraint> eliminate(const std::vector<Constraint>& cs, std::string_view var,
                                  bool* exact) {
  if (exact) *exact = true;
  // Unit-coefficient equality: substitute exactly.
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const auto& c = cs[i];
    std::int64_t a = c.expr.coeff(var);
    if (!c.is_equality() || (a != 1 && a != -1)) continue;
    AffineExpr rest = c.expr;
    rest.set_coeff(var, 0);
    AffineExpr value = rest * (-a);  // var = -rest / a
    std::vector<Constraint> out;
    for (std::size_t j = 0; j < cs.size(); ++j) {
      if (j == i) continue;
      out.push_back(Constraint{cs[j].kind, cs[j].expr.substitute(var, value)});
    }
    return normalize(std::move(out));
  }

  std::vector<Constraint> keep, lower, upper;
  for (const auto& c : cs) {
    std::int64_t a = c.expr.coeff(var);
    if (a == 0) {
      keep.push_back(c);
    } else if (c.is_equality()) {
      if (exact) *exact = false;
      (a > 0 ? lower : upper).push_back(Constraint{ConstraintKind::inequality, c.expr});
      (a > 0 ? upper : lower).push_back(Constraint{ConstraintKind::inequality, -c.expr});
    } else {
      (a > 0 ? lower : upper).push_back(c);
    }
  }
  for (const auto& l : lower) {
    std::int64_t a = l.expr.coeff(var);
    for (const auto& u : upper) {
      std::int64_t b = -u.expr.coeff(var);
      if (a != 1 && b != 1 && exact) *exact = false;
      AffineExpr combined = l.expr * b + u.expr * a;
      combined.set_coeff(var, 0);
      keep.push_back(Constraint{ConstraintKind::inequality, std::move(combined)});
    }
  }
  return normalize(std::move(keep));
}

bool empty(std::vector<Constraint> cs) {
  cs = normalize(std::move(cs));
  while (true) {
    if (cs.size() == 1 && cs[0].is_contradiction()) return true;
    // Pick the variable with the cheapest elimination.
    std::map<std::string, std::pair<std::size_t, std::size_t>, std::less<>> counts;
    bool has_eq_var = false;
    std::string eq_var;
    for (const auto& c : cs) {
      for (const auto& [name, k] : c.expr.terms()) {
        auto& [lo, hi] = counts[name];
        if (c.is_equality()) {
          ++lo;
          ++hi;
          if (!has_eq_var && (k == 1 || k == -1)) {
            has_eq_var = true;
            eq_var = name;
          }
        } else {
          (k > 0 ? lo : hi)++;
        }
      }
    }
    if (counts.empty()) return false;
    std::string best;
    if (has_eq_var) {
      best = eq_var;
    } else {
      std::size_t best_cost = SIZE_MAX;
      for (const auto& [name, lh] : counts) {
        std::size_t cost = lh.first * lh.second;
        if (cost < best_cost) {
          best_cost = cost;
          best = name;
        }
      }
    }
    cs = eliminate(cs, best, nullptr);
  }
}

std::vector<std::string> variables_of(const std::vector<Constraint>& cs) {
  std::set<std::string> seen;
  for (const auto& c : cs)
    for (const auto& [name, _] : c.expr.terms()) seen.insert(name);
  return {seen.begin(), seen.end()};
}

}  // namespace detail

BasicSet::BasicSet(std::vector<std::string> dims, std::vector<std::string> params,
                   std::vector<Constraint> constraints)
    : dims_(std::move(dims)), params_(std::move(params)) {
  std::set<std::string> names;
  for (const auto& d : dims_) {
    if (d.empty()) throw Error("empty dimension name");
    if (!names.insert(d).second) throw Error("duplicate dimension '" + d + "'");
  }
  for (const auto& p : params_) {
    if (p.empty()) throw Error("empty parameter name");
    if (!names.insert(p).second)
      throw Error("name '" + p + "' is both a dimension and a parameter");
  }
  for (const auto& c : constraints)
    for (const auto& [name, _] : c.expr.terms())
      if (!names.count(name))
        throw Error("constraint mentions '" + name + "', which is neither a dimension nor a parameter");
  constraints_ = detail::normalize(std::move(constraints));
}

bool BasicSet::has_dim(std::string_view name) const {
  return std::find(dims_.begin(), dims_.end(), name) != dims_.end();
}

bool BasicSet::has_param(std::string_view name) const {
  return std::find(params_.begin(), params_.end(), name) != params_.end();
}

bool BasicSet::is_empty() const { return detail::empty(constraints_); }

bool BasicSet::contains(const Valuation& point) const {
  return std::all_of(constraints_.begin(), constraints_.end(),
                     [&](const Constraint& c) { return c.holds(point); });
}

BasicSet BasicSet::add_constraints(std::span<const Constraint> extra) const {
  std::vector<Constraint> cs = constraints_;
  std::vector<std::string> params = params_;
  for (const auto& c : extra) {
    cs.push_back(c);
    for (const auto& [name, _] : c.expr.terms())
      if (!has_dim(name) && std::find(params.begin(), params.end(), name) == params.end())
        params.push_back(name);
  }
  return BasicSet(dims_, std::move(params), std::move(cs));
}

BasicSet BasicSet::add_constraint(const Constraint& extra) const {
  return add_constraints(std::span<const Constraint>(&extra, 1));
}

BasicSet BasicSet::rename(std::string_view from, const std::string& to) const {
  auto ren = [&](std::vector<std::string> v) {
    for (auto& n : v)
      if (n == from) n = to;
    return v;
  };
  std::vector<Constraint> cs;
  for (const auto& c : constraints_) cs.push_back(Constraint{c.kind, c.expr.rename(from, to)});
  return BasicSet(ren(dims_), ren(params_), std::move(cs));
}

BasicSet BasicSet::fix_params(const Valuation& values) const {
  std::vector<std::string> params;
  for (const auto& p : params_)
    if (!values.count(p)) params.push_back(p);
  std::vector<Constraint> cs;
  for (const auto& c : constraints_) {
    AffineExpr e = c.expr;
    for (const auto& p : params_) {
      auto it = values.find(p);
      if (it != values.end()) e = e.substitute(p, AffineExpr(it->second));
    }
    cs.push_back(Constraint{c.kind, std::move(e)});
  }
  return BasicSet(dims_, std::move(params), std::move(cs));
}

BasicSet BasicSet::with_dims_as_params(std::span<const std::string> names) const {
  std::vector<std::string> dims, params = params_;
  for (const auto& d : dims_) {
    if (std::find(names.begin(), names.end(), d) != names.end())
      params.push_back(d);
    else
      dims.push_back(d);
  }
  return BasicSet(std::move(dims), std::move(params), constraints_);
}

std::string BasicSet::str() const {
  std::ostringstream os;
  os << "{[";
  for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? ", " : "") << dims_[i];
  os << "]";
  if (!constraints_.empty()) {
    os << ": ";
    for (std::size_t i = 0; i < constraints_.size(); ++i)
      os << (i ? " and " : "") << constraints_[i].str();
  }
  os << "}";
  return os.str();
}

BasicSet split_dim(const BasicSet& s, std::string_view iname, std::int64_t factor,
                   const std::string& outer, const std::string& inner) {
  if (!s.has_dim(iname)) throw Error("split: unknown iname '" + std::string(iname) + "'");
  if (factor <= 0) throw Error("split: factor must be positive");
  for (const auto& n : {outer, inner})
    if (s.has_dim(n) || s.has_param(n) || n == iname)
      throw Error("split: name '" + n + "' is already in use");
  if (outer == inner) throw Error("split: outer and inner names coincide");

  AffineExpr replacement = AffineExpr::variable(outer, factor) + AffineExpr::variable(inner);
  std::vector<Constraint> cs;
  for (const auto& c : s.constraints())
    cs.push_back(Constraint{c.kind, c.expr.substitute(iname, replacement)});
  cs.push_back(Constraint::ge0(AffineExpr::variable(inner)));
  cs.push_back(Constraint::ge0(AffineExpr(factor - 1) - AffineExpr::variable(inner)));

  std::vector<std::string> dims;
  for (const auto& d : s.dims())
    if (d != iname) dims.push_back(d);
  dims.push_back(outer);
  dims.push_back(inner);
  return BasicSet(std::move(dims), s.params(), std::move(cs));
}

BasicSet project_out(const BasicSet& s, std::string_view iname, bool* exact) {
  if (!s.has_dim(iname)) throw Error("project_out: unknown iname '" + std::string(iname) + "'");
  std::vector<std::string> dims;
  for (const auto& d : s.dims())
    if (d != iname) dims.push_back(d);
  auto cs = detail::eliminate(s.constraints(), iname, exact);
  // Drop inequalities implied by the others.
  for (std::size_t j = 0; j < cs.size();) {
    if (cs[j].is_equality() || cs[j].is_contradiction()) {
      ++j;
      continue;
    }
    std::vector<Constraint> rest;
    for (std::size_t k = 0; k < cs.size(); ++k)
      if (k != j) rest.push_back(cs[k]);
    rest.push_back(Constraint{ConstraintKind::inequality, -cs[j].expr - AffineExpr(1)});
    if (detail::empty(std::move(rest)))
      cs.erase(cs.begin() + static_cast<std::ptrdiff_t>(j));
    else
      ++j;
  }
  return BasicSet(std::move(dims), s.params(), std::move(cs));
}

bool implies(const BasicSet& context, const Constraint& c) {
  if (c.is_tautology()) return true;
  std::vector<Constraint> cs = context.constraints();
  if (c.is_equality()) {
    auto a = cs, b = cs;
    a.push_back(Constraint{ConstraintKind::inequality, c.expr - AffineExpr(1)});
    b.push_back(Constraint{ConstraintKind::inequality, -c.expr - AffineExpr(1)});
    return detail::empty(std::move(a)) && detail::empty(std::move(b));
  }
  cs.push_back(Constraint{ConstraintKind::inequality, -c.expr - AffineExpr(1)});
  return detail::empty(std::move(cs));
}

}  // namespace loopforge::poly
