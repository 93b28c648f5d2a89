// SPDX-License-Identifier: Apache-2.0
//
// The kernel value: loop domains, instructions, substitution rules and
// declarations, plus the construction heuristics and closed-world checks.

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "loopforge/expr.hpp"
#include "loopforge/polyset.hpp"

namespace loopforge {

struct IndexTag {
  enum class Kind { none, sequential, unroll, group, local };
  Kind kind = Kind::none;
  int axis = 0;

  bool is_parallel() const { return kind == Kind::group || kind == Kind::local; }
  std::string str() const;
  /// Accepts g.N, l.N, unroll, sequential, none. Throws TransformError.
  static IndexTag parse(std::string_view text);

  friend bool operator==(const IndexTag&, const IndexTag&) = default;
};

struct Instruction {
  std::string id;
  std::set<std::string> tags;
  ExprPtr lhs;
  ExprPtr rhs;
  std::set<std::string> within;
  std::set<std::string> depends_on;
  std::set<Predicate> predicates;
  /// User-given sets survive the heuristics.
  bool within_given = false;
  bool deps_given = false;
  int source_line = 0;

  const std::string& assignee() const { return lhs->name; }
};

enum class ArgKind { array, scalar };

struct ArgDecl {
  std::string name;
  ArgKind kind = ArgKind::array;
  DType dtype = DType::f32;
  std::vector<poly::AffineExpr> shape;
  std::vector<poly::AffineExpr> strides;  // element units
  bool is_output = false;
};

/// Strides for a shape, row-major (C) or column-major (Fortran).
std::vector<poly::AffineExpr> contiguous_strides(const std::vector<poly::AffineExpr>& shape,
                                                 bool column_major);

enum class AddressSpace { private_, workgroup };

struct TemporaryDecl {
  std::string name;
  DType dtype = DType::f32;
  std::vector<poly::AffineExpr> shape;  // empty: scalar
  AddressSpace space = AddressSpace::private_;
  std::vector<poly::AffineExpr> base_offsets;
};

struct Kernel {
  std::string name;
  poly::DomainTree domains;
  std::vector<Instruction> instructions;
  std::vector<SubstitutionRule> rules;
  std::vector<ArgDecl> args;
  std::vector<TemporaryDecl> temporaries;
  poly::Assumptions assumptions;
  std::map<std::string, IndexTag> iname_tags;
  /// Preferred loop nesting, outermost first. Every iname appears once.
  std::vector<std::string> iname_order;

  const SubstitutionRule* find_rule(std::string_view n) const;
  const ArgDecl* find_arg(std::string_view n) const;
  const TemporaryDecl* find_temporary(std::string_view n) const;
  const Instruction* find_instruction(std::string_view id) const;
  bool is_iname(std::string_view n) const { return domains.has_iname(n); }
  IndexTag tag_of(std::string_view iname) const;
  /// Integer parameters: domain parameters and names used in shapes.
  std::vector<std::string> params() const;
  /// True when `n` names a rule, arg, temporary, iname or parameter.
  bool name_in_use(std::string_view n) const;
  /// Dtype of an arg or temporary; inames and parameters are i32.
  std::optional<DType> dtype_of(std::string_view n) const;
};

/// `base` when unused, else base_0, base_1, ...
std::string fresh_name(const Kernel& k, const std::string& base);
std::string fresh_instruction_id(const Kernel& k, const std::string& prefix);

struct KernelOptions {
  std::vector<ArgDecl> args;       // declared args; when non-empty no args are inferred
  std::vector<TemporaryDecl> temporaries;
  std::vector<std::string> assumptions;
  DType default_dtype = DType::f32;
};

/// Builds a kernel from domain texts and a native-language body.
Kernel make_kernel(const std::vector<std::string>& domain_texts, std::string_view body,
                   const std::string& name, const KernelOptions& options = {});

/// Adds each domain in order; a domain referencing inames of earlier ones
/// becomes the child of the latest such domain.
poly::DomainTree build_domain_tree(const std::vector<poly::BasicSet>& sets);

/// Rewrites provisional calls naming rules into rule invocations and
/// min/max over an iname into reductions.
ExprPtr resolve_calls(const Kernel& k, const ExprPtr& e);

/// Fills in missing arg declarations, shapes and output flags.
Kernel infer_args(Kernel k, DType default_dtype);
Kernel infer_temporary_types(Kernel k);
Kernel infer_within_inames(Kernel k);
Kernel infer_dependencies(Kernel k);

/// Rule expansion used only for analysis (no capture avoidance).
ExprPtr expand_for_analysis(const Kernel& k, const ExprPtr& e);

/// Variables read by an instruction (rhs, lhs indices, predicate flags),
/// with rules expanded.
std::set<std::string> reads_of(const Kernel& k, const Instruction& insn);
/// Inames referenced by an expression after rule expansion, excluding
/// reduction-bound ones.
std::set<std::string> inames_of(const Kernel& k, const ExprPtr& e);

/// Throws Error describing the first violated invariant.
void validate(const Kernel& k);
/// Returns one dependency cycle (ids in order) or empty.
std::vector<std::string> find_cycle(const Kernel& k);

/// Deterministic text dump of everything in the kernel.
std::string render_ir(const Kernel& k);
std::string render_instruction(const Instruction& insn);
std::string render_rule(const SubstitutionRule& r);

/// Native kernel file: header lines, a `---` line, then the body.
Kernel parse_knl(std::string_view text);

// Typing -------------------------------------------------------------------

/// An expression annotated with the type each node computes in.
/// `operand` is the type operands are converted to before the operation
/// (differs from `type` for comparisons and float intrinsics on ints).
struct TypedExpr {
  ExprPtr expr;
  DType type = DType::f32;
  DType operand = DType::f32;
  /// For `x**k` with a literal k >= 0: repeat count of the multiplication.
  int int_power = -1;
  std::vector<TypedExpr> args;
};

/// Types the right-hand side of an instruction; rules must be expanded.
TypedExpr type_rhs(const Kernel& k, const Instruction& insn);
/// Types an index or guard expression in integer context.
TypedExpr type_expr(const Kernel& k, const ExprPtr& e, std::optional<DType> expected,
                    DType float_context);
/// Dtype the value of `e` would take with nothing to adopt from.
DType natural_type(const Kernel& k, const ExprPtr& e);

bool is_float_function(std::string_view fn);
bool is_known_function(std::string_view fn);

}  // namespace loopforge
