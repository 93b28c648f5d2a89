// SPDX-License-Identifier: Apache-2.0
//
// C and OpenCL source emission from a schedule.

#include <algorithm>
#include <array>
#include <cmath>

#include "loopforge/codegen.hpp"
#include "loopforge/error.hpp"

namespace loopforge {

std::string c_float_literal(double v, DType type) {
  if (std::isnan(v)) return "NAN";
  if (std::isinf(v)) return v < 0 ? "-INFINITY" : "INFINITY";
  if (type == DType::f32) return format_float(static_cast<float>(v)) + "f";
  return format_double(v);
}

namespace {

using Lines = std::vector<std::string>;

// Precedence levels of rendered C.
constexpr int kCompare = 1;
constexpr int kAdd = 2;
constexpr int kMul = 3;
constexpr int kUnary = 4;
constexpr int kAtom = 5;

struct Rendered {
  std::string text;
  int prec = kAtom;
};

std::string paren(const Rendered& r, int min_prec) {
  return r.prec < min_prec ? "(" + r.text + ")" : r.text;
}

std::string ctype(DType t) {
  switch (t) {
    case DType::i32: return "int";
    case DType::f32: return "float";
    case DType::f64: return "double";
  }
  return "double";
}

Lines indent(const Lines& body) {
  Lines out;
  for (const auto& l : body) out.push_back(l.empty() ? l : "  " + l);
  return out;
}

/// `head` followed by the body, braced unless the body is one line.
Lines block(const std::string& head, const Lines& body) {
  Lines out{head};
  if (body.size() == 1) {
    out.push_back("  " + body.front());
    return out;
  }
  out.push_back("{");
  for (auto& l : indent(body)) out.push_back(std::move(l));
  out.push_back("}");
  return out;
}

struct Emitter {
  const Kernel& k;
  Target target;
  std::vector<std::string> open;        // loop inames, outermost first
  std::map<std::string, std::int64_t> fixed;  // unrolled inames
  std::vector<std::set<std::string>> scopes{{}};
  std::set<std::string> helpers;
  int next_acc = 0;

  // Names ---------------------------------------------------------------

  std::string fresh(const std::string& base) {
    for (;;) {
      std::string cand = base + "_" + std::to_string(next_acc++);
      if (!k.name_in_use(cand)) return cand;
    }
  }

  bool scalar_output(const std::string& name) const {
    auto a = k.find_arg(name);
    return a && a->kind == ArgKind::scalar && a->is_output;
  }

  // Affine and bound rendering ---------------------------------------------

  std::string term_name(const std::string& n) const {
    if (poly::Assumptions::is_quotient_name(n)) {
      auto [p, m] = poly::Assumptions::split_quotient_name(n);
      return p + " / " + std::to_string(m);
    }
    return n;
  }

  Rendered affine(poly::AffineExpr a) const {
    for (const auto& [n, v] : fixed) a = a.substitute(n, poly::AffineExpr(v));
    std::vector<std::string> parts;
    if (a.constant() != 0 || a.is_constant()) parts.push_back(std::to_string(a.constant()));
    for (const auto& [n, c] : a.terms()) {
      bool quotient = poly::Assumptions::is_quotient_name(n);
      std::string v = term_name(n);
      if (c == 1)
        parts.push_back(v);
      else
        parts.push_back(std::to_string(c) + " * " + (quotient ? "(" + v + ")" : v));
    }
    std::string s;
    for (const auto& p : parts) s += (s.empty() ? "" : " + ") + p;
    int prec = parts.size() > 1 ? kAdd : (a.is_constant() ? (a.constant() < 0 ? kUnary : kAtom)
                                                           : (a.terms().begin()->second == 1 &&
                                                                      !poly::Assumptions::is_quotient_name(
                                                                          a.terms().begin()->first)
                                                                  ? kAtom
                                                                  : kMul));
    return {s, prec};
  }

  Rendered bound(const poly::QuasiAffineBound& b) {
    if (b.is_affine()) return affine(b.affine());
    helpers.insert("floor_div");
    std::string div = "int_floor_div_pos_b(" + affine(b.numerator).text + ", " + std::to_string(b.divisor) + ")";
    poly::AffineExpr base = b.base;
    for (const auto& [n, v] : fixed) base = base.substitute(n, poly::AffineExpr(v));
    if (base.is_zero()) return {div, kAtom};
    return {affine(base).text + " + " + div, kAdd};
  }

  std::string fold_bounds(const std::vector<poly::QuasiAffineBound>& bs, bool lower) {
    if (bs.empty()) throw ScheduleError("missing loop bound");
    std::string acc = bound(bs.front()).text;
    for (std::size_t i = 1; i < bs.size(); ++i) {
      std::string fn = target == Target::opencl ? (lower ? "max" : "min") : (lower ? "int_max" : "int_min");
      if (target == Target::c) helpers.insert(fn);
      acc = fn + "(" + acc + ", " + bound(bs[i]).text + ")";
    }
    return acc;
  }

  // Expressions -----------------------------------------------------------

  Rendered index_expr(const ExprPtr& e, Lines& pre) {
    if (auto a = to_affine(e)) return affine(*a);
    TypedExpr t = type_expr(k, e, DType::i32, DType::f64);
    if (t.type != DType::i32) throw ScheduleError("non-integer subscript '" + render(e) + "'");
    return expr(t, pre);
  }

  std::string access(const std::string& name, const std::vector<ExprPtr>& idx, Lines& pre) {
    if (auto a = k.find_arg(name)) {
      if (a->kind == ArgKind::scalar) return scalar_output(name) ? name + "[0]" : name;
      poly::AffineExpr sum;
      std::vector<std::string> extra;
      for (std::size_t d = 0; d < idx.size(); ++d) {
        const auto& s = a->strides[d];
        auto ia = to_affine(idx[d]);
        if (ia && s.is_constant()) {
          sum += *ia * s.constant();
          continue;
        }
        Rendered i = index_expr(idx[d], pre);
        Rendered st = affine(s);
        extra.push_back(paren(i, kMul) + " * " + paren(st, kAtom));
      }
      std::string text;
      if (!sum.is_zero() || extra.empty()) text = affine(sum).text;
      for (const auto& x : extra) text += (text.empty() ? "" : " + ") + x;
      return name + "[" + text + "]";
    }
    std::string out = name;
    for (const auto& i : idx) out += "[" + index_expr(i, pre).text + "]";
    return out;
  }

  std::string literal_of(double v, DType t) const {
    if (t == DType::i32) return std::to_string(static_cast<std::int64_t>(v));
    return c_float_literal(v, t);
  }

  Rendered converted(const TypedExpr& child, DType to, Lines& pre) {
    Rendered r = expr(child, pre);
    if (child.type == to || child.expr->kind == ExprKind::int_lit || child.expr->kind == ExprKind::float_lit)
      return r;
    return {"(" + ctype(to) + ") " + paren(r, kUnary), kUnary};
  }

  std::string function_name(const std::string& fn, DType t) {
    if (fn == "abs") {
      if (t == DType::i32) return "abs";
      return target == Target::c && t == DType::f32 ? "fabsf" : "fabs";
    }
    if (fn == "min" || fn == "max") {
      if (t == DType::i32) {
        if (target == Target::opencl) return fn;
        helpers.insert("int_" + fn);
        return "int_" + fn;
      }
      std::string f = "f" + fn;
      return target == Target::c && t == DType::f32 ? f + "f" : f;
    }
    return target == Target::c && t == DType::f32 ? fn + "f" : fn;
  }

  Rendered expr(const TypedExpr& t, Lines& pre) {
    const Expr& e = *t.expr;
    switch (e.kind) {
      case ExprKind::int_lit: {
        Rendered r{literal_of(static_cast<double>(e.ival), t.type), kAtom};
        if (r.text[0] == '-') r.prec = kUnary;
        return r;
      }
      case ExprKind::float_lit: {
        Rendered r{literal_of(e.fval, t.type), kAtom};
        if (r.text[0] == '-') r.prec = kUnary;
        return r;
      }
      case ExprKind::var: {
        auto f = fixed.find(e.name);
        if (f != fixed.end()) return {std::to_string(f->second), f->second < 0 ? kUnary : kAtom};
        return {scalar_output(e.name) ? e.name + "[0]" : e.name, kAtom};
      }
      case ExprKind::subscript: return {access(e.name, e.args, pre), kAtom};
      case ExprKind::call: {
        std::string fn = function_name(e.name, t.type);
        std::vector<std::string> args;
        for (const auto& a : t.args) args.push_back(converted(a, t.type, pre).text);
        if ((e.name == "min" || e.name == "max") && args.size() > 2) {
          std::string acc = args[0];
          for (std::size_t i = 1; i < args.size(); ++i) acc = fn + "(" + acc + ", " + args[i] + ")";
          return {acc, kAtom};
        }
        std::string s = fn + "(";
        for (std::size_t i = 0; i < args.size(); ++i) s += (i ? ", " : "") + args[i];
        return {s + ")", kAtom};
      }
      case ExprKind::rule: throw InternalError("emitting unexpanded rule '" + e.name + "'");
      case ExprKind::binop: {
        if (t.int_power >= 0) {
          if (t.int_power == 0) return {literal_of(1, t.type), kAtom};
          Rendered base = converted(t.args[0], t.type, pre);
          if (t.int_power == 1) return base;
          std::string x = paren(base, kAtom);
          std::string s = x;
          for (int i = 1; i < t.int_power; ++i) s += " * " + x;
          return {s, kMul};
        }
        Rendered l = converted(t.args[0], t.type, pre);
        Rendered r = converted(t.args[1], t.type, pre);
        switch (e.binop()) {
          case BinOp::add: return {paren(l, kAdd) + " + " + paren(r, kAdd + 1), kAdd};
          case BinOp::sub:
            return {paren(l, kAdd) + " + " + literal_of(-1, t.type) + " * " + paren(r, kMul + 1), kAdd};
          case BinOp::mul: return {paren(l, kMul) + " * " + paren(r, kMul + 1), kMul};
          case BinOp::div: return {paren(l, kMul) + " / " + paren(r, kMul + 1), kMul};
          case BinOp::pow: return {function_name("pow", t.type) + "(" + l.text + ", " + r.text + ")", kAtom};
        }
        break;
      }
      case ExprKind::unop: {
        if (e.unop() == UnOp::lnot) return {"!" + paren(expr(t.args[0], pre), kUnary), kUnary};
        Rendered x = converted(t.args[0], t.type, pre);
        std::string s = paren(x, kUnary);
        return {"-" + (s[0] == '-' ? "(" + s + ")" : s), kUnary};
      }
      case ExprKind::compare: {
        auto side = [&](const TypedExpr& c) {
          // Small integer literals stay integral; C converts them exactly.
          if (c.expr->kind == ExprKind::int_lit && std::abs(c.expr->ival) < (1 << 24))
            return Rendered{std::to_string(c.expr->ival), c.expr->ival < 0 ? kUnary : kAtom};
          return converted(c, t.operand, pre);
        };
        Rendered l = side(t.args[0]);
        Rendered r = side(t.args[1]);
        return {paren(l, kCompare + 1) + " " + cmpop_symbol(e.cmpop()) + " " + paren(r, kCompare + 1), kCompare};
      }
      case ExprKind::reduction: return reduction(t, pre);
    }
    throw InternalError("unhandled expression kind");
  }

  Rendered reduction(const TypedExpr& t, Lines& pre) {
    const Expr& e = *t.expr;
    const std::string& j = e.name;
    std::string acc = fresh("acc");
    DType ty = t.type;
    auto b = loop_bounds(k, open, j);
    std::string lo = fold_bounds(b.lower, true);
    std::string hi = fold_bounds(b.upper, false);
    open.push_back(j);
    Lines body;
    std::string v = converted(t.args[0], ty, body).text;
    open.pop_back();
    RedOp op = e.redop();
    if (op == RedOp::sum || op == RedOp::product) {
      pre.push_back(ctype(ty) + " " + acc + " = " + literal_of(op == RedOp::sum ? 0 : 1, ty) + ";");
      body.push_back(acc + " = " + acc + (op == RedOp::sum ? " + " : " * ") + v + ";");
    } else {
      std::string first = acc + "_first";
      pre.push_back(ctype(ty) + " " + acc + " = " + literal_of(0, ty) + ";");
      pre.push_back("int " + first + " = 1;");
      std::string fn = function_name(op == RedOp::min ? "min" : "max", ty);
      body.push_back(ctype(ty) + " " + acc + "_v = " + v + ";");
      body.push_back(acc + " = " + first + " ? " + acc + "_v : " + fn + "(" + acc + ", " + acc + "_v);");
      body.push_back(first + " = 0;");
    }
    for (auto& l : block("for (int " + j + " = " + lo + "; " + j + " <= " + hi + "; ++" + j + ")", body))
      pre.push_back(std::move(l));
    return {acc, kAtom};
  }

  // Schedule nodes ---------------------------------------------------------

  std::string predicate_text(const std::set<Predicate>& ps) const {
    std::string s;
    for (const auto& p : ps) s += (s.empty() ? "" : " && ") + std::string(p.negated ? "!" : "") + p.flag;
    return s;
  }

  Lines statement(const ScheduleNode& n) {
    const Instruction& insn = *k.find_instruction(n.insn_id);
    Lines pre;
    TypedExpr rhs = type_rhs(k, insn);
    std::string lhs = insn.lhs->kind == ExprKind::subscript ? access(insn.lhs->name, insn.lhs->args, pre)
                                                            : expr(type_expr(k, insn.lhs, std::nullopt, DType::f64), pre).text;
    DType target_type = *k.dtype_of(insn.assignee());
    std::string value = converted(rhs, target_type, pre).text;
    Lines out = pre;
    out.push_back(lhs + " = " + value + ";");
    if (pre.empty() && n.predicates.empty()) return out;
    if (!pre.empty()) {
      Lines braced{"{"};
      for (auto& l : indent(out)) braced.push_back(std::move(l));
      braced.push_back("}");
      out = std::move(braced);
    }
    if (!n.predicates.empty()) return block("if (" + predicate_text(n.predicates) + ")", out);
    return out;
  }

  Lines children(const std::vector<ScheduleNode>& nodes) {
    Lines out;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      for (auto& l : node(nodes[i])) out.push_back(std::move(l));
      if (target != Target::opencl) continue;
      std::set<std::string> written, read;
      workgroup_writes(nodes[i], written);
      for (std::size_t j = i + 1; j < nodes.size(); ++j) collect_reads(nodes[j], read);
      if (std::any_of(written.begin(), written.end(), [&](const auto& t) { return read.count(t) > 0; }))
        out.push_back("/* barrier(CLK_LOCAL_MEM_FENCE) */");
    }
    return out;
  }

  void workgroup_writes(const ScheduleNode& n, std::set<std::string>& out) const {
    if (n.kind == ScheduleNode::Kind::statement) {
      auto t = k.find_temporary(k.find_instruction(n.insn_id)->assignee());
      if (t && t->space == AddressSpace::workgroup) out.insert(t->name);
    }
    for (const auto& c : n.children) workgroup_writes(c, out);
  }

  void collect_reads(const ScheduleNode& n, std::set<std::string>& out) const {
    if (n.kind == ScheduleNode::Kind::statement) {
      auto r = reads_of(k, *k.find_instruction(n.insn_id));
      out.insert(r.begin(), r.end());
    }
    for (const auto& c : n.children) collect_reads(c, out);
  }

  /// Range an iname spans over the whole domain: constant-preferring
  /// projections of its bounds.
  std::pair<poly::QuasiAffineBound, poly::QuasiAffineBound> launch_range(const std::string& x) {
    auto b = loop_bounds(k, {}, x);
    auto pick = [&](const std::vector<poly::QuasiAffineBound>& bs) {
      if (bs.empty()) throw ScheduleError("iname '" + x + "' is unbounded");
      for (const auto& q : bs)
        if (q.is_affine() && q.affine().is_constant()) return q;
      return bs.front();
    };
    return {pick(b.lower), pick(b.upper)};
  }

  std::string guard_text(const std::string& x, const poly::QuasiAffineBound& lo,
                         const poly::QuasiAffineBound& hi) {
    auto b = loop_bounds(k, open, x);
    std::vector<std::string> conds;
    std::string xv = fixed.count(x) ? std::to_string(fixed.at(x)) : x;
    for (const auto& l : b.lower)
      if (!(l == lo)) conds.push_back(xv + " >= " + paren(bound(l), kCompare + 1));
    for (const auto& u : b.upper)
      if (!(u == hi)) conds.push_back(xv + " <= " + paren(bound(u), kCompare + 1));
    std::string s;
    for (const auto& c : conds) s += (s.empty() ? "" : " && ") + c;
    return s;
  }

  Lines node(const ScheduleNode& n) {
    switch (n.kind) {
      case ScheduleNode::Kind::statement: return statement(n);
      case ScheduleNode::Kind::conditional:
        return block("if (" + predicate_text(n.predicates) + ")", children(n.children));
      case ScheduleNode::Kind::loop: break;
    }
    const std::string& x = n.iname;
    IndexTag tag = k.tag_of(x);
    if (tag.kind == IndexTag::Kind::unroll) return unrolled(n);
    if (target == Target::opencl && tag.is_parallel()) return parallel(n, tag);
    auto b = loop_bounds(k, open, x);
    std::string lo = fold_bounds(b.lower, true);
    std::string hi = fold_bounds(b.upper, false);
    open.push_back(x);
    scopes.emplace_back();
    Lines body = children(n.children);
    scopes.pop_back();
    open.pop_back();
    return block("for (int " + x + " = " + lo + "; " + x + " <= " + hi + "; ++" + x + ")", body);
  }

  Lines unrolled(const ScheduleNode& n) {
    const std::string& x = n.iname;
    auto [lo, hi] = launch_range(x);
    if (!lo.is_affine() || !lo.affine().is_constant() || !hi.is_affine() || !hi.affine().is_constant())
      throw ScheduleError("unroll-tagged iname '" + x + "' needs a constant range");
    Lines out;
    for (std::int64_t v = lo.affine().constant(); v <= hi.affine().constant(); ++v) {
      fixed[x] = v;
      std::string guard = guard_text(x, lo, hi);
      open.push_back(x);
      Lines body = children(n.children);
      open.pop_back();
      Lines copy = guard.empty() ? body : block("if (" + guard + ")", body);
      out.insert(out.end(), copy.begin(), copy.end());
    }
    fixed.erase(x);
    return out;
  }

  Lines parallel(const ScheduleNode& n, IndexTag tag) {
    const std::string& x = n.iname;
    auto [lo, hi] = launch_range(x);
    if (!lo.is_affine() || !lo.affine().is_constant())
      throw ScheduleError("parallel iname '" + x + "' has a lower bound depending on another iname");
    std::string id = std::string(tag.kind == IndexTag::Kind::group ? "get_group_id(" : "get_local_id(") +
                     std::to_string(tag.axis) + ")";
    std::int64_t l0 = lo.affine().constant();
    std::string def = "int const " + x + " = " + (l0 ? std::to_string(l0) + " + " : "") + id + ";";
    std::string guard = guard_text(x, lo, hi);
    bool redeclared = scopes.back().count(x) > 0;
    if (!redeclared) scopes.back().insert(x);
    open.push_back(x);
    if (redeclared) scopes.emplace_back(std::set<std::string>{x});
    Lines body = children(n.children);
    if (redeclared) scopes.pop_back();
    open.pop_back();
    Lines out{def};
    if (guard.empty())
      out.insert(out.end(), body.begin(), body.end());
    else
      for (auto& l : block("if (" + guard + ")", body)) out.push_back(std::move(l));
    if (!redeclared) return out;
    Lines braced{"{"};
    for (auto& l : indent(out)) braced.push_back(std::move(l));
    braced.push_back("}");
    return braced;
  }

  // Whole kernel -----------------------------------------------------------

  std::string signature() {
    std::vector<std::string> params;
    std::string global = target == Target::opencl ? "__global " : "";
    for (const auto& a : k.args) {
      std::string t = ctype(a.dtype);
      if (a.kind == ArgKind::scalar && !a.is_output)
        params.push_back(t + " const " + a.name);
      else
        params.push_back(global + t + (a.is_output ? "" : " const") + " *__restrict__ " + a.name);
    }
    std::string head = target == Target::opencl ? "__kernel void " : "void ";
    if (target == Target::opencl) {
      std::array<std::int64_t, 3> sizes{1, 1, 1};
      bool any = false, constant = true;
      for (const auto& x : k.iname_order) {
        IndexTag t = k.tag_of(x);
        if (t.kind != IndexTag::Kind::local) continue;
        any = true;
        auto [lo, hi] = launch_range(x);
        if (!lo.is_affine() || !hi.is_affine() || !lo.affine().is_constant() || !hi.affine().is_constant()) {
          constant = false;
          continue;
        }
        sizes[static_cast<std::size_t>(t.axis)] = hi.affine().constant() - lo.affine().constant() + 1;
      }
      if (any && constant)
        head += "__attribute__ ((reqd_work_group_size(" + std::to_string(sizes[0]) + ", " +
                std::to_string(sizes[1]) + ", " + std::to_string(sizes[2]) + "))) ";
    }
    std::string s = head + k.name + "(";
    for (std::size_t i = 0; i < params.size(); ++i) s += (i ? ", " : "") + params[i];
    return s + ")";
  }

  Lines declarations() {
    Lines out;
    for (const auto& t : k.temporaries) {
      std::string s = t.space == AddressSpace::workgroup && target == Target::opencl ? "__local " : "";
      s += ctype(t.dtype) + " " + t.name;
      for (const auto& d : t.shape) s += "[" + affine(d).text + "]";
      out.push_back(s + ";");
    }
    return out;
  }
};

bool uses_f64(const Kernel& k) {
  for (const auto& a : k.args)
    if (a.dtype == DType::f64) return true;
  for (const auto& t : k.temporaries)
    if (t.dtype == DType::f64) return true;
  return false;
}

}  // namespace

std::string emit_schedule(const Schedule& s, Target target) {
  Emitter em{s.kernel, target, {}, {}, {{}}, {}, 0};
  Lines body = em.declarations();
  if (!body.empty()) body.push_back("");
  for (auto& l : em.children(s.body)) body.push_back(std::move(l));
  std::string sig = em.signature();

  std::string out;
  if (target == Target::c)
    out += "#include <math.h>\n\n";
  else if (uses_f64(s.kernel))
    out += "#pragma OPENCL EXTENSION cl_khr_fp64: enable\n\n";
  std::string storage = target == Target::c ? "static inline int " : "inline int ";
  if (em.helpers.count("floor_div"))
    out += storage + "int_floor_div_pos_b(int a, int b)\n{\n  return (a - (a < 0 ? b - 1 : 0)) / b;\n}\n\n";
  if (em.helpers.count("int_min")) out += storage + "int_min(int a, int b)\n{\n  return a < b ? a : b;\n}\n\n";
  if (em.helpers.count("int_max")) out += storage + "int_max(int a, int b)\n{\n  return a > b ? a : b;\n}\n\n";
  out += sig + "\n{\n";
  for (const auto& l : body) out += l.empty() ? "\n" : "  " + l + "\n";
  out += "}\n";
  return out;
}

std::string emit(const Kernel& k, Target target) {
  return emit_schedule(group_predicates(schedule(k)), target);
}

}  // namespace loopforge
