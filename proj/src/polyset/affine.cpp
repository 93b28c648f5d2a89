// SPDX-License-Identifier: Apache-2.0

#include <numeric>
#include <sstream>

#include "loopforge/error.hpp"
#include "loopforge/polyset.hpp"

namespace loopforge::poly {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

AffineExpr AffineExpr::variable(std::string name, std::int64_t coeff) {
  AffineExpr e;
  if (coeff != 0) e.terms_.emplace(std::move(name), coeff);
  return e;
}

std::int64_t AffineExpr::coeff(std::string_view name) const {
  auto it = terms_.find(name);
  return it == terms_.end() ? 0 : it->second;
}

std::int64_t AffineExpr::coeff_gcd() const {
  std::int64_t g = 0;
  for (const auto& [_, c] : terms_) g = std::gcd(g, c);
  return g;
}

void AffineExpr::set_coeff(std::string_view name, std::int64_t value) {
  auto it = terms_.find(name);
  if (value == 0) {
    if (it != terms_.end()) terms_.erase(it);
  } else if (it == terms_.end()) {
    terms_.emplace(std::string(name), value);
  } else {
    it->second = value;
  }
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& other) {
  for (const auto& [name, c] : other.terms_) set_coeff(name, coeff(name) + c);
  constant_ += other.constant_;
  return *this;
}

AffineExpr AffineExpr::operator+(const AffineExpr& other) const {
  AffineExpr r = *this;
  r += other;
  return r;
}

AffineExpr AffineExpr::operator-() const { return *this * -1; }

AffineExpr AffineExpr::operator-(const AffineExpr& other) const { return *this + (-other); }

AffineExpr AffineExpr::operator*(std::int64_t factor) const {
  AffineExpr r;
  if (factor == 0) return r;
  for (const auto& [name, c] : terms_) r.terms_.emplace(name, c * factor);
  r.constant_ = constant_ * factor;
  return r;
}

AffineExpr AffineExpr::substitute(std::string_view name, const AffineExpr& replacement) const {
  std::int64_t c = coeff(name);
  if (c == 0) return *this;
  AffineExpr r = *this;
  r.set_coeff(name, 0);
  return r + replacement * c;
}

AffineExpr AffineExpr::rename(std::string_view from, const std::string& to) const {
  return substitute(from, variable(to));
}

std::int64_t AffineExpr::evaluate(const Valuation& values) const {
  std::int64_t r = constant_;
  for (const auto& [name, c] : terms_) {
    auto it = values.find(name);
    if (it == values.end()) throw Error("unbound variable '" + name + "' in affine expression");
    r += c * it->second;
  }
  return r;
}

std::string AffineExpr::str() const {
  std::ostringstream os;
  bool first = true;
  auto emit = [&](std::int64_t c, const std::string* name) {
    std::int64_t mag = c < 0 ? -c : c;
    if (first) {
      if (c < 0) os << "-";
    } else {
      os << (c < 0 ? " - " : " + ");
    }
    if (name == nullptr) {
      os << mag;
    } else {
      if (mag != 1) os << mag << "*";
      os << *name;
    }
    first = false;
  };
  for (const auto& [name, c] : terms_) emit(c, &name);
  if (constant_ != 0 || first) emit(constant_, nullptr);
  return os.str();
}

std::strong_ordering operator<=>(const AffineExpr& a, const AffineExpr& b) {
  if (auto cmp = a.terms_ <=> b.terms_; cmp != 0) return cmp;
  return a.constant_ <=> b.constant_;
}

Constraint Constraint::ge0(AffineExpr e) {
  return canonicalize(Constraint{ConstraintKind::inequality, std::move(e)});
}

Constraint Constraint::eq0(AffineExpr e) {
  return canonicalize(Constraint{ConstraintKind::equality, std::move(e)});
}

Constraint Constraint::contradiction() {
  return Constraint{ConstraintKind::inequality, AffineExpr(-1)};
}

bool Constraint::is_tautology() const {
  if (!expr.is_constant()) return false;
  return is_equality() ? expr.constant() == 0 : expr.constant() >= 0;
}

bool Constraint::is_contradiction() const { return expr.is_constant() && !is_tautology(); }

bool Constraint::holds(const Valuation& values) const {
  std::int64_t v = expr.evaluate(values);
  return is_equality() ? v == 0 : v >= 0;
}

namespace {

// Splits e into (negative part, positive part) with positive coefficients
// on both sides, so that e >= 0 reads "neg <= pos".
std::pair<AffineExpr, AffineExpr> split_sides(const AffineExpr& e) {
  AffineExpr pos, neg;
  for (const auto& [name, c] : e.terms()) {
    if (c > 0)
      pos.set_coeff(name, c);
    else
      neg.set_coeff(name, -c);
  }
  if (e.constant() > 0) pos.set_constant(e.constant());
  if (e.constant() < 0) neg.set_constant(-e.constant());
  return {neg, pos};
}

}  // namespace

std::string Constraint::str() const {
  auto [neg, pos] = split_sides(expr);
  return neg.str() + (is_equality() ? " = " : " <= ") + pos.str();
}

std::strong_ordering operator<=>(const Constraint& a, const Constraint& b) {
  if (a.kind != b.kind) return a.kind <=> b.kind;
  return a.expr <=> b.expr;
}

Constraint canonicalize(Constraint c) {
  std::int64_t g = c.expr.coeff_gcd();
  if (g == 0) {
    if (c.is_tautology()) return Constraint{ConstraintKind::inequality, AffineExpr()};
    return Constraint::contradiction();
  }
  AffineExpr out;
  if (c.is_equality()) {
    if (c.expr.constant() % g != 0) return Constraint::contradiction();
    std::int64_t sign = c.expr.terms().begin()->second < 0 ? -1 : 1;
    for (const auto& [name, k] : c.expr.terms()) out.set_coeff(name, sign * k / g);
    out.set_constant(sign * c.expr.constant() / g);
  } else {
    for (const auto& [name, k] : c.expr.terms()) out.set_coeff(name, k / g);
    out.set_constant(floor_div(c.expr.constant(), g));
  }
  return Constraint{c.kind, std::move(out)};
}

}  // namespace loopforge::poly
