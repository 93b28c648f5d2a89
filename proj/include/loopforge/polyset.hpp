// SPDX-License-Identifier: Apache-2.0
//
// A restricted integer-set engine: conjunctions of affine constraints over
// named set dimensions ("inames") and parameters. It covers what loop
// domains need: parsing, splitting, Fourier-Motzkin projection, loop-bound
// derivation with divisibility assumptions, and point enumeration.

#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace loopforge::poly {

using Valuation = std::map<std::string, std::int64_t, std::less<>>;

/// Floor division for any sign of numerator, positive denominator.
std::int64_t floor_div(std::int64_t a, std::int64_t b);
std::int64_t ceil_div(std::int64_t a, std::int64_t b);

/// sum(coeff * var) + constant, with zero coefficients never stored.
class AffineExpr {
 public:
  using Terms = std::map<std::string, std::int64_t, std::less<>>;

  AffineExpr() = default;
  explicit AffineExpr(std::int64_t constant) : constant_(constant) {}
  static AffineExpr variable(std::string name, std::int64_t coeff = 1);

  const Terms& terms() const { return terms_; }
  std::int64_t constant() const { return constant_; }
  std::int64_t coeff(std::string_view name) const;
  bool is_constant() const { return terms_.empty(); }
  bool is_zero() const { return terms_.empty() && constant_ == 0; }
  bool depends_on(std::string_view name) const { return coeff(name) != 0; }

  /// gcd of all variable coefficients (0 for a constant).
  std::int64_t coeff_gcd() const;

  void set_coeff(std::string_view name, std::int64_t value);
  void set_constant(std::int64_t value) { constant_ = value; }

  AffineExpr operator+(const AffineExpr& other) const;
  AffineExpr operator-(const AffineExpr& other) const;
  AffineExpr operator-() const;
  AffineExpr operator*(std::int64_t factor) const;
  AffineExpr& operator+=(const AffineExpr& other);

  AffineExpr substitute(std::string_view name, const AffineExpr& replacement) const;
  AffineExpr rename(std::string_view from, const std::string& to) const;

  /// Throws Error when a variable is unbound.
  std::int64_t evaluate(const Valuation& values) const;

  /// Renders as e.g. "i + 16*j - 1"; used in set text and IR dumps.
  std::string str() const;

  friend bool operator==(const AffineExpr&, const AffineExpr&) = default;
  friend std::strong_ordering operator<=>(const AffineExpr& a, const AffineExpr& b);

 private:
  Terms terms_;
  std::int64_t constant_ = 0;
};

enum class ConstraintKind { equality, inequality };

/// expr = 0 or expr >= 0, kept in canonical form.
struct Constraint {
  ConstraintKind kind = ConstraintKind::inequality;
  AffineExpr expr;

  static Constraint ge0(AffineExpr e);
  static Constraint eq0(AffineExpr e);
  /// The canonical unsatisfiable constraint (-1 >= 0).
  static Constraint contradiction();

  bool is_equality() const { return kind == ConstraintKind::equality; }
  /// Constant constraint that always holds / never holds.
  bool is_tautology() const;
  bool is_contradiction() const;
  bool holds(const Valuation& values) const;
  std::string str() const;

  friend bool operator==(const Constraint&, const Constraint&) = default;
  friend std::strong_ordering operator<=>(const Constraint& a, const Constraint& b);
};

/// Divides by the integer content and, for inequalities, tightens the
/// constant (floor), which is valid on integer points. Equalities get a
/// positive leading coefficient.
Constraint canonicalize(Constraint c);

class BasicSet {
 public:
  BasicSet() = default;
  BasicSet(std::vector<std::string> dims, std::vector<std::string> params,
           std::vector<Constraint> constraints);

  const std::vector<std::string>& dims() const { return dims_; }
  const std::vector<std::string>& params() const { return params_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }

  bool has_dim(std::string_view name) const;
  bool has_param(std::string_view name) const;

  /// True when the set has no rational point for any parameter value
  /// (after integer tightening).
  bool is_empty() const;
  /// Membership for a fully bound point (dims and params).
  bool contains(const Valuation& point) const;

  BasicSet add_constraints(std::span<const Constraint> extra) const;
  BasicSet add_constraint(const Constraint& extra) const;
  BasicSet rename(std::string_view from, const std::string& to) const;
  /// Binds parameters to constants; bound parameters are dropped.
  BasicSet fix_params(const Valuation& values) const;
  /// Turns a dim into a parameter (or back), keeping constraints.
  BasicSet with_dims_as_params(std::span<const std::string> names) const;

  std::string str() const;

  friend bool operator==(const BasicSet&, const BasicSet&) = default;

 private:
  std::vector<std::string> dims_;
  std::vector<std::string> params_;
  std::vector<Constraint> constraints_;
};

/// Parses isl-style text such as "{[i,j]: 0<=i,j<n and i<=j}".
/// Throws ParseError.
BasicSet parse_set(std::string_view text);

/// Replaces iname by factor*outer + inner with 0 <= inner < factor.
BasicSet split_dim(const BasicSet& s, std::string_view iname, std::int64_t factor,
                   const std::string& outer, const std::string& inner);

/// Fourier-Motzkin elimination. Over-approximates the integer projection;
/// `exact` (when given) reports whether the elimination was known exact.
BasicSet project_out(const BasicSet& s, std::string_view iname, bool* exact = nullptr);

/// True when every point of `context` satisfies `c` (checked by refutation).
bool implies(const BasicSet& context, const Constraint& c);

/// Divisibility facts and parameter constraints on a kernel's parameters.
struct Assumptions {
  struct Divisibility {
    AffineExpr expr;
    std::int64_t modulus = 2;
    friend bool operator==(const Divisibility&, const Divisibility&) = default;
  };
  std::vector<Divisibility> divisibility;
  std::vector<Constraint> param_constraints;

  bool empty() const { return divisibility.empty() && param_constraints.empty(); }

  /// Largest modulus known to divide `param` (1 when none).
  std::int64_t modulus_of(std::string_view param) const;

  /// Name of the exact-quotient variable standing for param / modulus.
  static std::string quotient_name(std::string_view param, std::int64_t modulus);
  static bool is_quotient_name(std::string_view name);
  /// Splits "n/16" into ("n", 16).
  static std::pair<std::string, std::int64_t> split_quotient_name(std::string_view name);

  /// Rewrites each divisible parameter p as modulus*q and adds the
  /// parameter constraints, giving the set bound derivation works on.
  BasicSet apply(const BasicSet& s) const;
  /// Adds quotient-variable values for each divisible parameter; throws
  /// Error when a binding violates an assumption.
  Valuation extend_valuation(const Valuation& params) const;
  /// Throws Error naming the first violated assumption.
  void check(const Valuation& params) const;

  std::vector<std::string> lines() const;

  friend bool operator==(const Assumptions&, const Assumptions&) = default;
};

/// Parses "n mod 16 = 0" or an affine parameter constraint such as "n >= 1".
/// `inames` lists names that must not appear.
Assumptions::Divisibility parse_divisibility(std::string_view text);
std::optional<Assumptions::Divisibility> try_parse_divisibility(std::string_view text);
std::vector<Constraint> parse_constraint_text(std::string_view text);

/// base + floor(numerator / divisor). A divisor of 1 means purely affine.
/// Variables may include exact-quotient names from Assumptions.
struct QuasiAffineBound {
  AffineExpr base;
  AffineExpr numerator;
  std::int64_t divisor = 1;

  bool is_affine() const { return divisor == 1; }
  /// The affine value when is_affine().
  AffineExpr affine() const { return base + numerator; }
  std::int64_t evaluate(const Valuation& values) const;
  std::string str() const;

  friend bool operator==(const QuasiAffineBound&, const QuasiAffineBound&) = default;
};

/// floor(numerator / divisor) normalized so the numerator's coefficients
/// and constant lie in [0, divisor).
QuasiAffineBound make_floor_bound(AffineExpr numerator, std::int64_t divisor);
QuasiAffineBound make_ceil_bound(AffineExpr numerator, std::int64_t divisor);

struct Bounds {
  std::vector<QuasiAffineBound> lower;  // iname >= max(lower)
  std::vector<QuasiAffineBound> upper;  // iname <= min(upper)
};

/// Bounds of `iname` once the dims in `fixed_order` are fixed. Dims that
/// are neither fixed nor `iname` are projected out first. Redundant bounds
/// are dropped when the context proves them. Throws Error when unbounded.
Bounds bounds_for(const BasicSet& s, std::string_view iname,
                  std::span<const std::string> fixed_order, const Assumptions& assumptions);

/// Lexicographic list of all integer points. Throws Error when unbounded.
std::vector<std::vector<std::int64_t>> enumerate_points(const BasicSet& s,
                                                        const Valuation& param_values);

/// A tree of loop domains: children may reference their ancestors' dims.
class DomainTree {
 public:
  DomainTree() = default;

  std::size_t add(BasicSet node, std::optional<std::size_t> parent);
  void replace(std::size_t index, BasicSet node);

  std::size_t size() const { return nodes_.size(); }
  const BasicSet& node(std::size_t i) const { return nodes_.at(i); }
  std::optional<std::size_t> parent(std::size_t i) const { return parents_.at(i); }
  const std::vector<BasicSet>& nodes() const { return nodes_; }

  std::optional<std::size_t> node_of(std::string_view iname) const;
  bool has_iname(std::string_view iname) const { return node_of(iname).has_value(); }
  /// Node indices from the root down to `index`.
  std::vector<std::size_t> path(std::size_t index) const;
  /// Conjunction of all constraints on the path to the node owning iname.
  BasicSet path_set(std::string_view iname) const;
  /// Conjunction of the paths of all given inames.
  BasicSet combined_set(std::span<const std::string> inames) const;
  /// Every iname, in node order then dim order.
  std::vector<std::string> all_inames() const;
  std::vector<std::string> all_params() const;

  /// Throws Error when an invariant is violated.
  void validate() const;

  friend bool operator==(const DomainTree&, const DomainTree&) = default;

 private:
  std::vector<BasicSet> nodes_;
  std::vector<std::optional<std::size_t>> parents_;
};

}  // namespace loopforge::poly
