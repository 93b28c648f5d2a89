// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <cmath>

#include "loopforge/expr.hpp"

namespace loopforge {

std::string binop_symbol(BinOp op) {
  switch (op) {
    case BinOp::add: return "+";
    case BinOp::sub: return "-";
    case BinOp::mul: return "*";
    case BinOp::div: return "/";
    case BinOp::pow: return "**";
  }
  return "?";
}

std::string cmpop_symbol(CmpOp op) {
  switch (op) {
    case CmpOp::lt: return "<";
    case CmpOp::le: return "<=";
    case CmpOp::gt: return ">";
    case CmpOp::ge: return ">=";
    case CmpOp::eq: return "==";
    case CmpOp::ne: return "!=";
  }
  return "?";
}

std::string redop_name(RedOp op) {
  switch (op) {
    case RedOp::sum: return "sum";
    case RedOp::product: return "product";
    case RedOp::min: return "min";
    case RedOp::max: return "max";
  }
  return "?";
}

namespace {

template <typename T>
std::string shortest(T v) {
  if (std::isnan(v)) return "NAN";
  if (std::isinf(v)) return v < 0 ? "-INFINITY" : "INFINITY";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

}  // namespace

std::string format_double(double v) { return shortest(v); }
std::string format_float(float v) { return shortest(v); }

static int precedence(const ExprPtr& e) {
  switch (e->kind) {
    case ExprKind::int_lit: return e->ival < 0 ? 4 : 6;
    case ExprKind::float_lit: return std::signbit(e->fval) ? 4 : 6;
    case ExprKind::unop: return e->unop() == UnOp::neg ? 4 : 0;
    case ExprKind::compare: return 1;
    case ExprKind::binop:
      switch (e->binop()) {
        case BinOp::add:
        case BinOp::sub: return 2;
        case BinOp::mul:
        case BinOp::div: return 3;
        case BinOp::pow: return 5;
      }
      return 6;
    default: return 6;
  }
}

namespace {

void emit(const ExprPtr& e, int min_prec, std::string& out);

void emit_list(const std::vector<ExprPtr>& xs, std::string& out) {
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (k) out += ", ";
    emit(xs[k], 0, out);
  }
}

void emit(const ExprPtr& e, int min_prec, std::string& out) {
  int p = precedence(e);
  bool paren = p < min_prec;
  if (paren) out += '(';
  switch (e->kind) {
    case ExprKind::int_lit:
      out += std::to_string(e->ival);
      break;
    case ExprKind::float_lit:
      if (e->lit_type == DType::f32)
        out += format_float(static_cast<float>(e->fval)) + "f";
      else
        out += format_double(e->fval);
      break;
    case ExprKind::var:
      out += e->name;
      break;
    case ExprKind::subscript:
      out += e->name + "[";
      emit_list(e->args, out);
      out += "]";
      break;
    case ExprKind::call:
      out += e->name + "(";
      emit_list(e->args, out);
      out += ")";
      break;
    case ExprKind::rule:
      out += e->name;
      if (e->tag) out += "$" + *e->tag;
      out += "(";
      emit_list(e->args, out);
      out += ")";
      break;
    case ExprKind::reduction:
      out += redop_name(e->redop()) + "(" + e->name + ", ";
      emit(e->args[0], 0, out);
      out += ")";
      break;
    case ExprKind::unop:
      if (e->unop() == UnOp::neg) {
        out += "-";
        emit(e->args[0], 4, out);
      } else {
        out += "not ";
        emit(e->args[0], 0, out);
      }
      break;
    case ExprKind::compare:
      emit(e->args[0], 2, out);
      out += " " + cmpop_symbol(e->cmpop()) + " ";
      emit(e->args[1], 2, out);
      break;
    case ExprKind::binop: {
      BinOp op = e->binop();
      if (op == BinOp::pow) {
        emit(e->args[0], 6, out);
        out += "**";
        emit(e->args[1], 4, out);
      } else {
        emit(e->args[0], p, out);
        bool spaced = op == BinOp::add || op == BinOp::sub;
        out += spaced ? " " + binop_symbol(op) + " " : binop_symbol(op);
        emit(e->args[1], p + 1, out);
      }
      break;
    }
  }
  if (paren) out += ')';
}

}  // namespace

std::string render(const ExprPtr& e) {
  std::string out;
  emit(e, 0, out);
  return out;
}

}  // namespace loopforge
