// SPDX-License-Identifier: Apache-2.0
//
// Fortran statement tree -> Kernel.

#include <algorithm>
#include <functional>
#include <map>

#include "loopforge/fortran.hpp"

namespace loopforge {

namespace {

const std::map<std::string, std::string, std::less<>> kIntrinsics = {
    {"sqrt", "sqrt"}, {"dsqrt", "sqrt"}, {"sin", "sin"},   {"dsin", "sin"},   {"cos", "cos"},
    {"dcos", "cos"},  {"tan", "tan"},    {"dtan", "tan"},  {"exp", "exp"},    {"dexp", "exp"},
    {"log", "log"},   {"alog", "log"},   {"dlog", "log"},  {"atan", "atan"},  {"datan", "atan"},
    {"abs", "abs"},   {"dabs", "abs"},   {"iabs", "abs"},  {"min", "min"},    {"min0", "min"},
    {"amin1", "min"}, {"dmin1", "min"},  {"max", "max"},   {"max0", "max"},   {"amax1", "max"},
    {"dmax1", "max"}};

DType implicit_type(const std::string& name) {
  char c = name.empty() ? 'a' : name[0];
  return (c >= 'i' && c <= 'n') ? DType::i32 : DType::f32;
}

class Lowering {
 public:
  Lowering(const FortranUnit& u, std::vector<std::string>* warnings) : u_(u), warnings_(warnings) {}

  Kernel run() {
    k_.name = u_.name;
    collect_writes(u_.body);
    collect_loop_vars(u_.body);
    declare_args();
    declare_temporaries();
    lower_block(u_.body, {});
    check_reads();
    validate(k_);
    return std::move(k_);
  }

 private:
  struct Loop {
    std::string var;
    std::string iname;
  };

  const FortranUnit& u_;
  std::vector<std::string>* warnings_;
  Kernel k_;
  std::set<std::string> written_;
  std::set<std::string> loop_vars_;
  std::set<std::string> used_names_;
  int flag_counter_ = 0;
  std::string previous_id_;
  std::map<int, int> per_line_;

  void warn(const std::string& w) {
    if (warnings_) warnings_->push_back(w);
  }

  void collect_writes(const std::vector<FortranStmt>& body) {
    for (const auto& s : body) {
      if (s.kind == FortranStmt::Kind::assign) written_.insert(s.lhs->name);
      collect_writes(s.body);
      collect_writes(s.else_body);
    }
  }

  void collect_loop_vars(const std::vector<FortranStmt>& body) {
    for (const auto& s : body) {
      if (s.kind == FortranStmt::Kind::do_loop) {
        if (written_.count(s.var)) throw ParseError("loop variable '" + s.var + "' is assigned", s.span);
        if (std::find(u_.args.begin(), u_.args.end(), s.var) != u_.args.end())
          throw ParseError("loop variable '" + s.var + "' is a subroutine argument", s.span);
        if (!loop_vars_.count(s.var)) {
          const FortranDecl* d = u_.find_decl(s.var);
          if (d && (d->dtype != DType::i32 || !d->dims.empty()))
            throw ParseError("loop variable '" + s.var + "' must be a scalar integer", s.span);
          if (!d) {
            if (implicit_type(s.var) != DType::i32) throw ParseError("loop variable '" + s.var + "' is implicitly real", s.span);
            warn("loop variable '" + s.var + "' is not declared; treating it as integer");
          }
        }
        loop_vars_.insert(s.var);
      }
      collect_loop_vars(s.body);
      collect_loop_vars(s.else_body);
    }
  }

  DType type_of_name(const std::string& name, SourceSpan at) {
    if (const FortranDecl* d = u_.find_decl(name)) return d->dtype;
    if (u_.implicit_none) throw ParseError("'" + name + "' is not declared (IMPLICIT NONE is in effect)", at);
    warn("'" + name + "' is not declared; using implicit type " + dtype_name(implicit_type(name)));
    return implicit_type(name);
  }

  std::vector<poly::AffineExpr> shape_of(const FortranDecl& d) {
    std::vector<poly::AffineExpr> shape;
    for (const auto& [lo, hi] : d.dims) {
      auto l = to_affine(lo);
      auto h = to_affine(hi);
      if (!l || !h) throw ParseError("array bound of '" + d.name + "' is not affine in the parameters", d.span);
      shape.push_back(*h - *l + poly::AffineExpr(1));
    }
    return shape;
  }

  void declare_args() {
    for (const auto& a : u_.args) {
      SourceSpan at{1, 1};
      ArgDecl decl;
      decl.name = a;
      decl.dtype = type_of_name(a, at);
      decl.is_output = written_.count(a) > 0;
      if (const FortranDecl* d = u_.find_decl(a); d && !d->dims.empty()) {
        decl.kind = ArgKind::array;
        decl.shape = shape_of(*d);
        decl.strides = contiguous_strides(decl.shape, true);
      } else {
        decl.kind = ArgKind::scalar;
      }
      used_names_.insert(a);
      k_.args.push_back(std::move(decl));
    }
    // Integer scalar args that are never written act as size parameters.
    for (const auto& a : k_.args)
      for (const auto& d : a.shape)
        for (const auto& [v, c] : d.terms()) {
          const ArgDecl* p = k_.find_arg(v);
          if (!p || p->kind != ArgKind::scalar || p->dtype != DType::i32)
            throw ParseError("array bound of '" + a.name + "' uses '" + v + "', which is not an integer argument",
                             u_.find_decl(a.name)->span);
        }
  }

  void declare_temporaries() {
    std::vector<std::string> order;
    std::function<void(const std::vector<FortranStmt>&)> walk = [&](const std::vector<FortranStmt>& body) {
      for (const auto& s : body) {
        if (s.kind == FortranStmt::Kind::assign && !used_names_.count(s.lhs->name) &&
            std::find(order.begin(), order.end(), s.lhs->name) == order.end())
          order.push_back(s.lhs->name);
        walk(s.body);
        walk(s.else_body);
      }
    };
    walk(u_.body);
    for (const auto& name : order) {
      const FortranStmt* first = find_assignment(u_.body, name);
      TemporaryDecl t;
      t.name = name;
      t.dtype = type_of_name(name, first->span);
      if (const FortranDecl* d = u_.find_decl(name); d && !d->dims.empty()) {
        t.shape = shape_of(*d);
      }
      used_names_.insert(name);
      k_.temporaries.push_back(std::move(t));
    }
  }

  static const FortranStmt* find_assignment(const std::vector<FortranStmt>& body, const std::string& name) {
    for (const auto& s : body) {
      if (s.kind == FortranStmt::Kind::assign && s.lhs->name == name) return &s;
      if (auto* r = find_assignment(s.body, name)) return r;
      if (auto* r = find_assignment(s.else_body, name)) return r;
    }
    return nullptr;
  }

  std::string fresh_iname(const std::string& var) {
    auto taken = [&](const std::string& n) {
      return used_names_.count(n) || k_.is_iname(n) || u_.find_decl(n) ||
             (std::find(u_.args.begin(), u_.args.end(), n) != u_.args.end());
    };
    if (!k_.is_iname(var) && !used_names_.count(var)) return var;
    for (int n = 0;; ++n) {
      std::string cand = var + "_" + std::to_string(n);
      if (!taken(cand)) return cand;
    }
  }

  static const Loop* find_loop(const std::vector<Loop>& loops, const std::string& var) {
    for (auto it = loops.rbegin(); it != loops.rend(); ++it)
      if (it->var == var) return &*it;
    return nullptr;
  }

  bool is_array(const std::string& name) const {
    if (const ArgDecl* a = k_.find_arg(name)) return a->kind == ArgKind::array;
    if (const TemporaryDecl* t = k_.find_temporary(name)) return !t->shape.empty();
    return false;
  }

  std::size_t rank_of(const std::string& name) const {
    if (const ArgDecl* a = k_.find_arg(name)) return a->shape.size();
    return k_.find_temporary(name)->shape.size();
  }

  static ExprPtr simplify(const ExprPtr& e) {
    if (auto a = to_affine(e)) return from_affine(*a);
    return e;
  }

  ExprPtr translate(const ExprPtr& e, const std::vector<Loop>& loops, SourceSpan at) {
    switch (e->kind) {
      case ExprKind::var: {
        if (const Loop* l = find_loop(loops, e->name)) return binop(BinOp::add, var(l->iname), int_lit(1));
        if (loop_vars_.count(e->name))
          throw ParseError("loop variable '" + e->name + "' is used outside its loop", at);
        if (is_array(e->name))
          throw ParseError("whole-array reference '" + e->name + "' is not supported (no array-level operations)", at);
        return e;
      }
      case ExprKind::call: {
        std::vector<ExprPtr> args;
        for (const auto& a : e->args) args.push_back(translate(a, loops, at));
        if (is_array(e->name)) {
          if (args.size() != rank_of(e->name))
            throw ParseError("'" + e->name + "' has rank " + std::to_string(rank_of(e->name)) + " but is indexed with " +
                                 std::to_string(args.size()) + " subscripts",
                             at);
          const FortranDecl* d = u_.find_decl(e->name);
          for (std::size_t i = 0; i < args.size(); ++i) args[i] = simplify(binop(BinOp::sub, args[i], d->dims[i].first));
          return subscript(e->name, std::move(args));
        }
        auto it = kIntrinsics.find(e->name);
        if (it == kIntrinsics.end()) {
          if (k_.find_arg(e->name) || k_.find_temporary(e->name))
            throw ParseError("'" + e->name + "' is not an array", at);
          throw ParseError("unknown function or undeclared array '" + e->name + "'", at);
        }
        bool minmax = it->second == "min" || it->second == "max";
        if ((minmax && args.size() < 2) || (!minmax && args.size() != 1))
          throw ParseError("wrong number of arguments to '" + e->name + "'", at);
        if (!minmax) return call(it->second, {args[0]});
        ExprPtr r = call(it->second, {args[0], args[1]});
        for (std::size_t i = 2; i < args.size(); ++i) r = call(it->second, {r, args[i]});
        return r;
      }
      default: {
        std::vector<ExprPtr> args;
        for (const auto& a : e->args) args.push_back(translate(a, loops, at));
        return args.empty() ? e : with_args(e, std::move(args));
      }
    }
  }

  std::string next_id(int line) {
    std::string id = "f_line" + std::to_string(line) + "_" + std::to_string(per_line_[line]++);
    return id;
  }

  void emit(ExprPtr lhs, ExprPtr rhs, const FortranStmt& s, const std::vector<Loop>& loops,
            const std::set<Predicate>& preds) {
    Instruction insn;
    insn.id = next_id(s.span.line);
    insn.tags = s.tags;
    insn.lhs = std::move(lhs);
    insn.rhs = std::move(rhs);
    for (const auto& l : loops) insn.within.insert(l.iname);
    if (!previous_id_.empty()) insn.depends_on.insert(previous_id_);
    insn.predicates = preds;
    insn.within_given = true;
    insn.deps_given = true;
    insn.source_line = s.span.line;
    previous_id_ = insn.id;
    k_.instructions.push_back(std::move(insn));
  }

  void lower_block(const std::vector<FortranStmt>& body, std::vector<Loop> loops,
                   const std::set<Predicate>& preds = {}) {
    for (const auto& s : body) {
      switch (s.kind) {
        case FortranStmt::Kind::assign: {
          ExprPtr lhs;
          const std::string& name = s.lhs->name;
          if (s.lhs->kind == ExprKind::var) {
            if (is_array(name)) throw ParseError("array-level assignment to '" + name + "' is not supported", s.span);
            lhs = var(name);
          } else {
            if (!is_array(name)) throw ParseError("'" + name + "' is not declared as an array", s.span);
            lhs = translate(s.lhs, loops, s.span);
          }
          emit(lhs, translate(s.rhs, loops, s.span), s, loops, preds);
          break;
        }
        case FortranStmt::Kind::do_loop: {
          std::string iname = fresh_iname(s.var);
          used_names_.insert(iname);
          loop_domain(s, iname, loops);
          if (std::find(k_.iname_order.begin(), k_.iname_order.end(), iname) == k_.iname_order.end())
            k_.iname_order.push_back(iname);
          auto inner = loops;
          inner.push_back(Loop{s.var, iname});
          lower_block(s.body, inner, preds);
          break;
        }
        case FortranStmt::Kind::if_block: {
          std::string flag = "loopy_cond" + std::to_string(flag_counter_++);
          while (used_names_.count(flag)) flag = "loopy_cond" + std::to_string(flag_counter_++);
          used_names_.insert(flag);
          k_.temporaries.push_back(TemporaryDecl{flag, DType::i32, {}, AddressSpace::private_, {}});
          emit(var(flag), translate(s.cond, loops, s.span), s, loops, preds);
          auto then_preds = preds;
          then_preds.insert(Predicate{flag, false});
          lower_block(s.body, loops, then_preds);
          auto else_preds = preds;
          else_preds.insert(Predicate{flag, true});
          lower_block(s.else_body, loops, else_preds);
          break;
        }
      }
    }
  }

  void loop_domain(const FortranStmt& s, const std::string& iname, const std::vector<Loop>& loops) {
    auto bound = [&](const ExprPtr& e) {
      auto a = to_affine(translate(e, loops, s.span));
      if (!a) throw ParseError("loop bound of '" + s.var + "' is not affine", s.span);
      for (const auto& [v, c] : a->terms()) {
        if (k_.is_iname(v)) continue;
        const ArgDecl* p = k_.find_arg(v);
        if (!p || p->kind != ArgKind::scalar || p->dtype != DType::i32 || p->is_output)
          throw ParseError("loop bound of '" + s.var + "' uses '" + v + "', which is not an integer argument", s.span);
      }
      return *a;
    };
    poly::AffineExpr lo = bound(s.lo);
    poly::AffineExpr hi = bound(s.hi);
    poly::AffineExpr x = poly::AffineExpr::variable(iname) + poly::AffineExpr(1);
    std::vector<poly::Constraint> cs{poly::Constraint::ge0(x - lo), poly::Constraint::ge0(hi - x)};
    std::set<std::string> names;
    for (const auto& e : {lo, hi})
      for (const auto& [v, c] : e.terms()) names.insert(v);
    std::optional<std::size_t> parent;
    for (const auto& n : names)
      if (auto node = k_.domains.node_of(n); node && (!parent || *node > *parent)) parent = node;
    k_.domains.add(poly::BasicSet({iname}, std::vector<std::string>(names.begin(), names.end()), cs), parent);
  }

  void check_reads() {
    for (const auto& insn : k_.instructions)
      for (const auto& v : free_variables(insn.rhs))
        if (!k_.find_arg(v) && !k_.find_temporary(v) && !k_.is_iname(v)) {
          if (u_.implicit_none && !u_.find_decl(v))
            throw ParseError("'" + v + "' is not declared (IMPLICIT NONE is in effect)", SourceSpan{insn.source_line, 1});
          throw ParseError("'" + v + "' is read but never assigned", SourceSpan{insn.source_line, 1});
        }
  }
};

}  // namespace

Kernel lower_to_kernel(const FortranUnit& u, std::vector<std::string>* warnings) {
  return Lowering(u, warnings).run();
}

}  // namespace loopforge
