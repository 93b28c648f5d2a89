// SPDX-License-Identifier: Apache-2.0
//
// Expression trees for instruction right-hand sides and rule bodies, plus
// the native statement language.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "loopforge/polyset.hpp"

namespace loopforge {

enum class DType { i32, f32, f64 };

std::string dtype_name(DType t);
/// Accepts f32/f64/i32 and the aliases float32, float64, int32, float, double, int.
std::optional<DType> parse_dtype(std::string_view text);
inline bool is_float(DType t) { return t != DType::i32; }

enum class ExprKind {
  int_lit,
  float_lit,
  var,
  subscript,
  call,
  rule,
  binop,
  unop,
  compare,
  reduction,
};

enum class BinOp { add, sub, mul, div, pow };
enum class UnOp { neg, lnot };
enum class CmpOp { lt, le, gt, ge, eq, ne };
enum class RedOp { sum, product, min, max };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// One node. `name` holds the variable, array, function or rule name, or the
/// reduction iname. `args` holds subscript indices, call/rule arguments,
/// binop/compare operands, the unop operand, or the reduction body.
struct Expr {
  ExprKind kind = ExprKind::int_lit;
  std::int64_t ival = 0;
  double fval = 0;
  std::optional<DType> lit_type;  // float literal with an explicit suffix
  std::string name;
  std::optional<std::string> tag;  // rule invocation tag
  int op = 0;                      // BinOp, UnOp, CmpOp or RedOp
  std::vector<ExprPtr> args;

  BinOp binop() const { return static_cast<BinOp>(op); }
  UnOp unop() const { return static_cast<UnOp>(op); }
  CmpOp cmpop() const { return static_cast<CmpOp>(op); }
  RedOp redop() const { return static_cast<RedOp>(op); }
};

ExprPtr int_lit(std::int64_t v);
ExprPtr float_lit(double v, std::optional<DType> type = std::nullopt);
ExprPtr var(std::string name);
ExprPtr subscript(std::string array, std::vector<ExprPtr> index);
ExprPtr call(std::string fn, std::vector<ExprPtr> args);
ExprPtr rule_call(std::string rule, std::optional<std::string> tag, std::vector<ExprPtr> args);
ExprPtr binop(BinOp op, ExprPtr l, ExprPtr r);
ExprPtr unop(UnOp op, ExprPtr x);
ExprPtr compare(CmpOp op, ExprPtr l, ExprPtr r);
ExprPtr reduction(RedOp op, std::string iname, ExprPtr body);
/// Copy of `e` with new children.
ExprPtr with_args(const ExprPtr& e, std::vector<ExprPtr> args);

bool equal(const ExprPtr& a, const ExprPtr& b);

/// Parses one expression. Throws ParseError with a byte offset.
ExprPtr parse_expr(std::string_view text);

/// IR rendering: minimal parentheses, `+ - <` family spaced, `* / **` tight.
std::string render(const ExprPtr& e);
std::string binop_symbol(BinOp op);
std::string cmpop_symbol(CmpOp op);
std::string redop_name(RedOp op);
/// Shortest text that reads back to the same double, always with a '.' or 'e'.
std::string format_double(double v);
std::string format_float(float v);

using Bindings = std::map<std::string, ExprPtr, std::less<>>;

/// Replaces free VarRefs named in `bindings`. Reduction inames shadow.
ExprPtr substitute(const ExprPtr& e, const Bindings& bindings);

/// Free arrays, scalars and inames (reduction inames excluded; function and
/// rule names excluded).
std::set<std::string> free_variables(const ExprPtr& e);

/// Post-order rewrite: `fn` sees nodes whose children were already rewritten
/// and returns a replacement or nullptr to keep the node.
ExprPtr rewrite(const ExprPtr& e, const std::function<ExprPtr(const ExprPtr&)>& fn);
/// Pre-order visit; return false to skip children.
void visit(const ExprPtr& e, const std::function<bool(const ExprPtr&)>& fn);

/// Affine view of integer-valued expressions built from int literals,
/// variables, + - and multiplication by constants.
std::optional<poly::AffineExpr> to_affine(const ExprPtr& e);
/// Constant first, then terms by variable name.
ExprPtr from_affine(const poly::AffineExpr& a);

struct Predicate {
  std::string flag;
  bool negated = false;
  friend auto operator<=>(const Predicate&, const Predicate&) = default;
};

/// Trailing `{id=..., tags=a:b, dep=x:y, inames=i:j, if=f:!g}` options.
struct InstructionOptions {
  std::optional<std::string> id;
  std::optional<std::set<std::string>> tags;
  std::optional<std::set<std::string>> deps;
  std::optional<std::set<std::string>> inames;
  std::optional<std::set<Predicate>> predicates;
};

struct SubstitutionRule {
  std::string name;
  std::vector<std::string> params;
  ExprPtr body;
  /// Free names in the body that stand for an expression at the invocation
  /// site (set up by rule extraction, e.g. i_0 -> i).
  Bindings implicit;
};

struct InstructionStmt {
  ExprPtr lhs;
  ExprPtr rhs;
  bool is_temporary_decl = false;
  std::optional<DType> temporary_type;  // `<f32> x = ...`
  InstructionOptions options;
};

struct RuleStmt {
  SubstitutionRule rule;
};

struct Statement {
  std::optional<InstructionStmt> instruction;
  std::optional<RuleStmt> rule;
};

/// Parses one logical line of the native kernel language.
Statement parse_statement(std::string_view text);

/// Splits a body into logical lines: strips `#` comments, joins `\`
/// continuations, drops blank lines. Each entry keeps its first line number.
std::vector<std::pair<int, std::string>> logical_lines(std::string_view body);

}  // namespace loopforge
