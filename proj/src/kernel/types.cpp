// SPDX-License-Identifier: Apache-2.0
//
// Expression typing. Literals are weak: an integer literal takes the type
// of whatever it meets, a float literal without a suffix takes any float
// type it meets.

#include <algorithm>
#include <array>

#include "loopforge/error.hpp"
#include "loopforge/kernel.hpp"

namespace loopforge {

namespace {

enum class Raw { weak_int, weak_float, i32, f32, f64 };

Raw strong(DType t) {
  switch (t) {
    case DType::i32: return Raw::i32;
    case DType::f32: return Raw::f32;
    case DType::f64: return Raw::f64;
  }
  return Raw::f64;
}

Raw combine(Raw a, Raw b) {
  if (a == Raw::weak_int) return b;
  if (b == Raw::weak_int) return a;
  if (a == Raw::weak_float && b == Raw::weak_float) return Raw::weak_float;
  if (a == Raw::weak_float) return b == Raw::i32 ? Raw::weak_float : b;
  if (b == Raw::weak_float) return a == Raw::i32 ? Raw::weak_float : a;
  return std::max(a, b);
}

Raw floatify(Raw r) {
  if (r == Raw::weak_int) return Raw::weak_float;
  if (r == Raw::i32) return Raw::f64;
  return r;
}

DType resolve(Raw r, std::optional<DType> expected, DType float_context) {
  switch (r) {
    case Raw::i32: return DType::i32;
    case Raw::f32: return DType::f32;
    case Raw::f64: return DType::f64;
    case Raw::weak_int: return expected ? *expected : DType::i32;
    case Raw::weak_float: return expected && is_float(*expected) ? *expected : float_context;
  }
  return DType::f64;
}

constexpr std::array<std::string_view, 19> kFloatFunctions = {
    "sqrt", "sin",  "cos",  "tan",   "asin", "acos", "atan", "atan2", "exp", "log",
    "log10", "pow", "fabs", "floor", "ceil", "sinh", "cosh", "tanh",  "fmod"};

Raw raw_type(const Kernel& k, const ExprPtr& e) {
  switch (e->kind) {
    case ExprKind::int_lit: return Raw::weak_int;
    case ExprKind::float_lit: return e->lit_type ? strong(*e->lit_type) : Raw::weak_float;
    case ExprKind::var:
    case ExprKind::subscript: {
      auto t = k.dtype_of(e->name);
      if (!t) throw Error("unknown variable '" + e->name + "'");
      return strong(*t);
    }
    case ExprKind::call: {
      Raw r = Raw::weak_int;
      for (const auto& a : e->args) r = combine(r, raw_type(k, a));
      return is_float_function(e->name) ? floatify(r) : r;
    }
    case ExprKind::rule:
      throw InternalError("typing an unexpanded rule invocation '" + e->name + "'");
    case ExprKind::binop: {
      Raw l = raw_type(k, e->args[0]);
      Raw r = raw_type(k, e->args[1]);
      switch (e->binop()) {
        case BinOp::div: return floatify(combine(l, r));
        case BinOp::pow:
          if (e->args[1]->kind == ExprKind::int_lit && e->args[1]->ival >= 0) return l;
          return floatify(combine(l, r));
        default: return combine(l, r);
      }
    }
    case ExprKind::unop:
      return e->unop() == UnOp::lnot ? Raw::i32 : raw_type(k, e->args[0]);
    case ExprKind::compare: return Raw::i32;
    case ExprKind::reduction: return raw_type(k, e->args[0]);
  }
  return Raw::f64;
}

TypedExpr type_node(const Kernel& k, const ExprPtr& e, std::optional<DType> expected,
                    DType fctx) {
  TypedExpr t;
  t.expr = e;
  t.type = resolve(raw_type(k, e), expected, fctx);
  t.operand = t.type;
  auto child = [&](const ExprPtr& c, std::optional<DType> exp) {
    t.args.push_back(type_node(k, c, exp, fctx));
  };
  switch (e->kind) {
    case ExprKind::subscript:
      for (const auto& idx : e->args) child(idx, DType::i32);
      break;
    case ExprKind::call:
      for (const auto& a : e->args) child(a, t.type);
      break;
    case ExprKind::binop:
      if (e->binop() == BinOp::pow && e->args[1]->kind == ExprKind::int_lit &&
          e->args[1]->ival >= 0) {
        t.int_power = static_cast<int>(e->args[1]->ival);
        child(e->args[0], t.type);
        child(e->args[1], DType::i32);
        break;
      }
      child(e->args[0], t.type);
      child(e->args[1], t.type);
      break;
    case ExprKind::unop:
      if (e->unop() == UnOp::lnot) {
        auto inner = resolve(raw_type(k, e->args[0]), std::nullopt, fctx);
        t.operand = inner;
        child(e->args[0], inner);
      } else {
        child(e->args[0], t.type);
      }
      break;
    case ExprKind::compare: {
      Raw both = combine(raw_type(k, e->args[0]), raw_type(k, e->args[1]));
      t.operand = resolve(both, std::nullopt, fctx);
      child(e->args[0], t.operand);
      child(e->args[1], t.operand);
      break;
    }
    case ExprKind::reduction:
      child(e->args[0], t.type);
      break;
    default:
      break;
  }
  return t;
}

}  // namespace

bool is_float_function(std::string_view fn) {
  return std::find(kFloatFunctions.begin(), kFloatFunctions.end(), fn) != kFloatFunctions.end();
}

bool is_known_function(std::string_view fn) {
  return is_float_function(fn) || fn == "abs" || fn == "min" || fn == "max";
}

TypedExpr type_expr(const Kernel& k, const ExprPtr& e, std::optional<DType> expected,
                    DType float_context) {
  return type_node(k, e, expected, float_context);
}

TypedExpr type_rhs(const Kernel& k, const Instruction& insn) {
  auto target = k.dtype_of(insn.assignee());
  if (!target) throw Error("unknown assignment target '" + insn.assignee() + "'");
  DType fctx = is_float(*target) ? *target : DType::f64;
  return type_node(k, insn.rhs, *target, fctx);
}

DType natural_type(const Kernel& k, const ExprPtr& e) {
  return resolve(raw_type(k, e), std::nullopt, DType::f64);
}

}  // namespace loopforge
