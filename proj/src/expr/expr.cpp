// SPDX-License-Identifier: Apache-2.0

#include <cstring>

#include "loopforge/error.hpp"
#include "loopforge/expr.hpp"

namespace loopforge {

std::string dtype_name(DType t) {
  switch (t) {
    case DType::i32: return "i32";
    case DType::f32: return "f32";
    case DType::f64: return "f64";
  }
  return "?";
}

std::optional<DType> parse_dtype(std::string_view text) {
  if (text == "f32" || text == "float32" || text == "float") return DType::f32;
  if (text == "f64" || text == "float64" || text == "double") return DType::f64;
  if (text == "i32" || text == "int32" || text == "int") return DType::i32;
  return std::nullopt;
}

namespace {

ExprPtr make(Expr e) { return std::make_shared<const Expr>(std::move(e)); }

}  // namespace

ExprPtr int_lit(std::int64_t v) {
  Expr e;
  e.kind = ExprKind::int_lit;
  e.ival = v;
  return make(std::move(e));
}

ExprPtr float_lit(double v, std::optional<DType> type) {
  Expr e;
  e.kind = ExprKind::float_lit;
  e.fval = v;
  e.lit_type = type;
  return make(std::move(e));
}

ExprPtr var(std::string name) {
  Expr e;
  e.kind = ExprKind::var;
  e.name = std::move(name);
  return make(std::move(e));
}

ExprPtr subscript(std::string array, std::vector<ExprPtr> index) {
  if (index.empty()) throw Error("empty subscript on '" + array + "'");
  Expr e;
  e.kind = ExprKind::subscript;
  e.name = std::move(array);
  e.args = std::move(index);
  return make(std::move(e));
}

ExprPtr call(std::string fn, std::vector<ExprPtr> args) {
  Expr e;
  e.kind = ExprKind::call;
  e.name = std::move(fn);
  e.args = std::move(args);
  return make(std::move(e));
}

ExprPtr rule_call(std::string rule, std::optional<std::string> tag, std::vector<ExprPtr> args) {
  if (tag && tag->empty()) throw Error("empty invocation tag on '" + rule + "'");
  Expr e;
  e.kind = ExprKind::rule;
  e.name = std::move(rule);
  e.tag = std::move(tag);
  e.args = std::move(args);
  return make(std::move(e));
}

ExprPtr binop(BinOp op, ExprPtr l, ExprPtr r) {
  Expr e;
  e.kind = ExprKind::binop;
  e.op = static_cast<int>(op);
  e.args = {std::move(l), std::move(r)};
  return make(std::move(e));
}

ExprPtr unop(UnOp op, ExprPtr x) {
  if (op == UnOp::neg && x->kind == ExprKind::int_lit) return int_lit(-x->ival);
  if (op == UnOp::neg && x->kind == ExprKind::float_lit) return float_lit(-x->fval, x->lit_type);
  Expr e;
  e.kind = ExprKind::unop;
  e.op = static_cast<int>(op);
  e.args = {std::move(x)};
  return make(std::move(e));
}

ExprPtr compare(CmpOp op, ExprPtr l, ExprPtr r) {
  Expr e;
  e.kind = ExprKind::compare;
  e.op = static_cast<int>(op);
  e.args = {std::move(l), std::move(r)};
  return make(std::move(e));
}

ExprPtr reduction(RedOp op, std::string iname, ExprPtr body) {
  Expr e;
  e.kind = ExprKind::reduction;
  e.op = static_cast<int>(op);
  e.name = std::move(iname);
  e.args = {std::move(body)};
  return make(std::move(e));
}

ExprPtr with_args(const ExprPtr& e, std::vector<ExprPtr> args) {
  Expr copy = *e;
  copy.args = std::move(args);
  return make(std::move(copy));
}

bool equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->op != b->op || a->name != b->name || a->tag != b->tag ||
      a->ival != b->ival || a->lit_type != b->lit_type || a->args.size() != b->args.size())
    return false;
  if (a->kind == ExprKind::float_lit && std::memcmp(&a->fval, &b->fval, sizeof(double)) != 0)
    return false;
  for (std::size_t k = 0; k < a->args.size(); ++k)
    if (!equal(a->args[k], b->args[k])) return false;
  return true;
}

ExprPtr rewrite(const ExprPtr& e, const std::function<ExprPtr(const ExprPtr&)>& fn) {
  ExprPtr node = e;
  if (!e->args.empty()) {
    std::vector<ExprPtr> args;
    args.reserve(e->args.size());
    bool changed = false;
    for (const auto& a : e->args) {
      args.push_back(rewrite(a, fn));
      changed = changed || args.back() != a;
    }
    if (changed) node = with_args(e, std::move(args));
  }
  ExprPtr r = fn(node);
  return r ? r : node;
}

void visit(const ExprPtr& e, const std::function<bool(const ExprPtr&)>& fn) {
  if (!fn(e)) return;
  for (const auto& a : e->args) visit(a, fn);
}

namespace {

ExprPtr subst(const ExprPtr& e, const Bindings& b) {
  switch (e->kind) {
    case ExprKind::var: {
      auto it = b.find(e->name);
      return it == b.end() ? e : it->second;
    }
    case ExprKind::reduction: {
      if (b.count(e->name)) {
        Bindings inner = b;
        inner.erase(e->name);
        if (inner.empty()) return e;
        ExprPtr body = subst(e->args[0], inner);
        return body == e->args[0] ? e : with_args(e, {body});
      }
      break;
    }
    default:
      break;
  }
  if (e->args.empty()) return e;
  std::vector<ExprPtr> args;
  bool changed = false;
  for (const auto& a : e->args) {
    args.push_back(subst(a, b));
    changed = changed || args.back() != a;
  }
  return changed ? with_args(e, std::move(args)) : e;
}

void collect_free(const ExprPtr& e, std::multiset<std::string>& bound,
                  std::set<std::string>& out) {
  switch (e->kind) {
    case ExprKind::var:
      if (!bound.count(e->name)) out.insert(e->name);
      return;
    case ExprKind::subscript:
      if (!bound.count(e->name)) out.insert(e->name);
      break;
    case ExprKind::reduction: {
      auto it = bound.insert(e->name);
      collect_free(e->args[0], bound, out);
      bound.erase(it);
      return;
    }
    default:
      break;
  }
  for (const auto& a : e->args) collect_free(a, bound, out);
}

}  // namespace

ExprPtr substitute(const ExprPtr& e, const Bindings& bindings) {
  if (bindings.empty()) return e;
  return subst(e, bindings);
}

std::set<std::string> free_variables(const ExprPtr& e) {
  std::set<std::string> out;
  std::multiset<std::string> bound;
  collect_free(e, bound, out);
  return out;
}

std::optional<poly::AffineExpr> to_affine(const ExprPtr& e) {
  using poly::AffineExpr;
  switch (e->kind) {
    case ExprKind::int_lit:
      return AffineExpr(e->ival);
    case ExprKind::var:
      return AffineExpr::variable(e->name);
    case ExprKind::unop:
      if (e->unop() == UnOp::neg) {
        auto x = to_affine(e->args[0]);
        if (x) return -*x;
      }
      return std::nullopt;
    case ExprKind::binop: {
      auto l = to_affine(e->args[0]);
      if (!l) return std::nullopt;
      auto r = to_affine(e->args[1]);
      if (!r) return std::nullopt;
      switch (e->binop()) {
        case BinOp::add: return *l + *r;
        case BinOp::sub: return *l - *r;
        case BinOp::mul:
          if (l->is_constant()) return *r * l->constant();
          if (r->is_constant()) return *l * r->constant();
          return std::nullopt;
        default: return std::nullopt;
      }
    }
    default:
      return std::nullopt;
  }
}

ExprPtr from_affine(const poly::AffineExpr& a) {
  ExprPtr acc;
  if (a.constant() != 0 || a.is_constant()) acc = int_lit(a.constant());
  for (const auto& [name, c] : a.terms()) {
    std::int64_t mag = c < 0 ? -c : c;
    ExprPtr term = mag == 1 ? var(name) : binop(BinOp::mul, int_lit(mag), var(name));
    if (!acc)
      acc = c < 0 ? unop(UnOp::neg, term) : term;
    else
      acc = binop(c < 0 ? BinOp::sub : BinOp::add, acc, term);
  }
  return acc;
}

}  // namespace loopforge
