// SPDX-License-Identifier: Apache-2.0
//
// Kernel construction, heuristics and validation.

#include <algorithm>
#include <functional>
#include <sstream>

#include "loopforge/error.hpp"
#include "loopforge/kernel.hpp"

namespace loopforge {

std::string IndexTag::str() const {
  switch (kind) {
    case Kind::none: return "none";
    case Kind::sequential: return "sequential";
    case Kind::unroll: return "unroll";
    case Kind::group: return "g." + std::to_string(axis);
    case Kind::local: return "l." + std::to_string(axis);
  }
  return "?";
}

IndexTag IndexTag::parse(std::string_view text) {
  IndexTag t;
  if (text == "none" || text.empty()) return t;
  if (text == "sequential" || text == "seq" || text == "for") {
    t.kind = Kind::sequential;
    return t;
  }
  if (text == "unroll" || text == "unr") {
    t.kind = Kind::unroll;
    return t;
  }
  if (text.size() >= 3 && (text[0] == 'g' || text[0] == 'l') && text[1] == '.') {
    std::string_view digits = text.substr(2);
    if (digits.size() == 1 && digits[0] >= '0' && digits[0] <= '2') {
      t.kind = text[0] == 'g' ? Kind::group : Kind::local;
      t.axis = digits[0] - '0';
      return t;
    }
  }
  throw TransformError("unknown iname tag '" + std::string(text) +
                       "' (expected g.N, l.N with N in 0..2, unroll, sequential or none)");
}

std::vector<poly::AffineExpr> contiguous_strides(const std::vector<poly::AffineExpr>& shape,
                                                 bool column_major) {
  std::vector<poly::AffineExpr> strides(shape.size());
  // Strides must stay affine, so only one non-constant extent may multiply in.
  auto mul = [](const poly::AffineExpr& a, const poly::AffineExpr& b) {
    if (a.is_constant()) return b * a.constant();
    if (b.is_constant()) return a * b.constant();
    throw Error("array strides would not be affine in the parameters (" + a.str() + " * " +
                b.str() + ")");
  };
  poly::AffineExpr acc(1);
  if (column_major) {
    for (std::size_t d = 0; d < shape.size(); ++d) {
      strides[d] = acc;
      if (d + 1 < shape.size()) acc = mul(acc, shape[d]);
    }
  } else {
    for (std::size_t d = shape.size(); d-- > 0;) {
      strides[d] = acc;
      if (d > 0) acc = mul(acc, shape[d]);
    }
  }
  return strides;
}

const SubstitutionRule* Kernel::find_rule(std::string_view n) const {
  for (const auto& r : rules)
    if (r.name == n) return &r;
  return nullptr;
}

const ArgDecl* Kernel::find_arg(std::string_view n) const {
  for (const auto& a : args)
    if (a.name == n) return &a;
  return nullptr;
}

const TemporaryDecl* Kernel::find_temporary(std::string_view n) const {
  for (const auto& t : temporaries)
    if (t.name == n) return &t;
  return nullptr;
}

const Instruction* Kernel::find_instruction(std::string_view id) const {
  for (const auto& i : instructions)
    if (i.id == id) return &i;
  return nullptr;
}

IndexTag Kernel::tag_of(std::string_view iname) const {
  auto it = iname_tags.find(std::string(iname));
  return it == iname_tags.end() ? IndexTag{} : it->second;
}

std::vector<std::string> Kernel::params() const {
  std::vector<std::string> out = domains.all_params();
  auto add = [&](const poly::AffineExpr& e) {
    for (const auto& [n, _] : e.terms())
      if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
  };
  for (const auto& a : args) {
    for (const auto& s : a.shape) add(s);
    for (const auto& s : a.strides) add(s);
  }
  for (const auto& t : temporaries) {
    for (const auto& s : t.shape) add(s);
    for (const auto& s : t.base_offsets) add(s);
  }
  // Offsets may mention inames; those are not parameters.
  std::erase_if(out, [&](const std::string& n) { return is_iname(n); });
  return out;
}

bool Kernel::name_in_use(std::string_view n) const {
  if (find_rule(n) || find_arg(n) || find_temporary(n) || is_iname(n)) return true;
  auto ps = params();
  return std::find(ps.begin(), ps.end(), n) != ps.end();
}

std::optional<DType> Kernel::dtype_of(std::string_view n) const {
  if (auto a = find_arg(n)) return a->dtype;
  if (auto t = find_temporary(n)) return t->dtype;
  if (is_iname(n)) return DType::i32;
  auto ps = params();
  if (std::find(ps.begin(), ps.end(), n) != ps.end()) return DType::i32;
  return std::nullopt;
}

std::string fresh_name(const Kernel& k, const std::string& base) {
  if (!k.name_in_use(base)) return base;
  for (int n = 0;; ++n) {
    std::string cand = base + "_" + std::to_string(n);
    if (!k.name_in_use(cand)) return cand;
  }
}

std::string fresh_instruction_id(const Kernel& k, const std::string& prefix) {
  for (int n = 0;; ++n) {
    std::string cand = prefix + "_" + std::to_string(n);
    if (!k.find_instruction(cand)) return cand;
  }
}

poly::DomainTree build_domain_tree(const std::vector<poly::BasicSet>& sets) {
  poly::DomainTree tree;
  for (const auto& s : sets) {
    std::optional<std::size_t> parent;
    for (const auto& p : s.params()) {
      auto owner = tree.node_of(p);
      if (owner && (!parent || *owner > *parent)) parent = owner;
    }
    tree.add(s, parent);
  }
  tree.validate();
  return tree;
}

ExprPtr resolve_calls(const Kernel& k, const ExprPtr& e) {
  return rewrite(e, [&](const ExprPtr& n) -> ExprPtr {
    if (n->kind == ExprKind::var) {
      const auto* r = k.find_rule(n->name);
      return r && r->params.empty() ? rule_call(n->name, std::nullopt, {}) : nullptr;
    }
    if (n->kind != ExprKind::call) return nullptr;
    if (const auto* r = k.find_rule(n->name)) {
      if (r->params.size() != n->args.size())
        throw Error("rule '" + r->name + "' takes " + std::to_string(r->params.size()) +
                    " argument(s) but is invoked with " + std::to_string(n->args.size()));
      return rule_call(n->name, std::nullopt, n->args);
    }
    if ((n->name == "min" || n->name == "max") && n->args.size() == 2 &&
        n->args[0]->kind == ExprKind::var && k.is_iname(n->args[0]->name))
      return reduction(n->name == "min" ? RedOp::min : RedOp::max, n->args[0]->name, n->args[1]);
    return nullptr;
  });
}

ExprPtr expand_for_analysis(const Kernel& k, const ExprPtr& e) {
  std::function<ExprPtr(const ExprPtr&, int)> go = [&](const ExprPtr& x, int depth) -> ExprPtr {
    if (depth > 64) throw Error("substitution rules are recursive");
    return rewrite(x, [&](const ExprPtr& n) -> ExprPtr {
      if (n->kind != ExprKind::rule) return nullptr;
      const auto* r = k.find_rule(n->name);
      if (!r) throw Error("invocation of undefined rule '" + n->name + "'");
      if (r->params.size() != n->args.size())
        throw Error("rule '" + r->name + "' takes " + std::to_string(r->params.size()) +
                    " argument(s) but is invoked with " + std::to_string(n->args.size()));
      Bindings b = r->implicit;
      for (std::size_t a = 0; a < r->params.size(); ++a) b[r->params[a]] = n->args[a];
      return go(substitute(r->body, b), depth + 1);
    });
  };
  return go(e, 0);
}

std::set<std::string> inames_of(const Kernel& k, const ExprPtr& e) {
  std::set<std::string> out;
  for (const auto& n : free_variables(expand_for_analysis(k, e)))
    if (k.is_iname(n)) out.insert(n);
  return out;
}

std::set<std::string> reads_of(const Kernel& k, const Instruction& insn) {
  std::set<std::string> out = free_variables(expand_for_analysis(k, insn.rhs));
  for (const auto& idx : insn.lhs->args)
    for (const auto& n : free_variables(expand_for_analysis(k, idx))) out.insert(n);
  for (const auto& p : insn.predicates) out.insert(p.flag);
  return out;
}

Kernel infer_within_inames(Kernel k) {
  for (auto& insn : k.instructions) {
    if (insn.within_given) continue;
    std::set<std::string> w = inames_of(k, insn.lhs);
    for (const auto& n : inames_of(k, insn.rhs)) w.insert(n);
    insn.within = std::move(w);
  }
  return k;
}

std::vector<std::string> find_cycle(const Kernel& k) {
  std::map<std::string, int> state;  // 0 new, 1 on stack, 2 done
  std::vector<std::string> stack, cycle;
  std::function<bool(const std::string&)> dfs = [&](const std::string& id) {
    state[id] = 1;
    stack.push_back(id);
    const auto* insn = k.find_instruction(id);
    if (insn) {
      for (const auto& d : insn->depends_on) {
        if (state[d] == 1) {
          auto it = std::find(stack.begin(), stack.end(), d);
          cycle.assign(it, stack.end());
          cycle.push_back(d);
          return true;
        }
        if (state[d] == 0 && k.find_instruction(d) && dfs(d)) return true;
      }
    }
    stack.pop_back();
    state[id] = 2;
    return false;
  };
  for (const auto& insn : k.instructions)
    if (state[insn.id] == 0 && dfs(insn.id)) return cycle;
  return {};
}

namespace {

std::string join(const std::vector<std::string>& xs, const std::string& sep) {
  std::string out;
  for (std::size_t k = 0; k < xs.size(); ++k) out += (k ? sep : "") + xs[k];
  return out;
}

void check_acyclic(const Kernel& k) {
  auto cycle = find_cycle(k);
  if (!cycle.empty()) throw Error("dependency cycle: " + join(cycle, " -> "));
}

}  // namespace

Kernel infer_dependencies(Kernel k) {
  std::map<std::string, std::vector<std::string>> writers;
  for (const auto& insn : k.instructions) writers[insn.assignee()].push_back(insn.id);
  for (auto& insn : k.instructions) {
    if (insn.deps_given) continue;
    std::set<std::string> deps;
    for (const auto& v : reads_of(k, insn)) {
      auto it = writers.find(v);
      if (it == writers.end()) continue;
      for (const auto& id : it->second)
        if (id != insn.id) deps.insert(id);
    }
    insn.depends_on = std::move(deps);
  }
  check_acyclic(k);
  return k;
}

namespace {

struct ArrayUse {
  std::vector<std::vector<ExprPtr>> sites;  // per site, index list
  std::vector<std::set<std::string>> site_inames;
};

// Largest value of an affine index over the inames it mentions, as an
// affine expression in the parameters.
std::optional<poly::AffineExpr> index_max(const Kernel& k, const poly::AffineExpr& idx) {
  std::vector<std::string> inames;
  for (const auto& [n, _] : idx.terms())
    if (k.is_iname(n)) inames.push_back(n);
  if (inames.empty()) return idx;
  poly::BasicSet s = k.domains.combined_set(inames);
  std::string t = "__index";
  std::vector<std::string> dims = s.dims();
  dims.push_back(t);
  std::vector<poly::Constraint> cs = s.constraints();
  cs.push_back(poly::Constraint::eq0(poly::AffineExpr::variable(t) - idx));
  poly::BasicSet with_t(dims, s.params(), cs);
  poly::Bounds b = poly::bounds_for(with_t, t, {}, {});
  if (b.upper.size() != 1 || !b.upper[0].is_affine()) return std::nullopt;
  return b.upper[0].affine();
}

std::optional<poly::AffineExpr> pick_max(const std::vector<poly::AffineExpr>& cands) {
  std::optional<poly::AffineExpr> best;
  for (const auto& c : cands) {
    if (!best) {
      best = c;
      continue;
    }
    poly::AffineExpr diff = c - *best;
    if (!diff.is_constant()) return std::nullopt;
    if (diff.constant() > 0) best = c;
  }
  return best;
}

}  // namespace

Kernel infer_args(Kernel k, DType default_dtype) {
  std::vector<std::string> order;
  std::map<std::string, ArrayUse> arrays;
  std::set<std::string> scalars, written;
  auto known = [&](const std::string& n) {
    return k.find_arg(n) || k.find_temporary(n) || k.is_iname(n) || k.find_rule(n);
  };
  auto note = [&](const std::string& n) {
    if (std::find(order.begin(), order.end(), n) == order.end()) order.push_back(n);
  };
  std::function<void(const ExprPtr&, const std::set<std::string>&)> scan =
      [&](const ExprPtr& e, const std::set<std::string>& bound) {
        visit(e, [&](const ExprPtr& n) {
          if (n->kind == ExprKind::reduction) {
            auto inner = bound;
            inner.insert(n->name);
            scan(n->args[0], inner);
            return false;
          }
          if ((n->kind == ExprKind::var || n->kind == ExprKind::subscript) &&
              !bound.count(n->name) && !known(n->name)) {
            note(n->name);
            if (n->kind == ExprKind::var) scalars.insert(n->name);
          }
          return true;
        });
      };
  for (const auto& insn : k.instructions) {
    written.insert(insn.assignee());
    scan(insn.lhs, {});
    scan(insn.rhs, {});
    for (const auto& p : insn.predicates)
      if (!known(p.flag)) note(p.flag);
  }
  for (const auto& r : k.rules) {
    std::set<std::string> bound(r.params.begin(), r.params.end());
    for (const auto& [n, _] : r.implicit) bound.insert(n);
    scan(r.body, bound);
  }
  // Array sites from the expanded instructions.
  for (const auto& insn : k.instructions) {
    for (const auto& e : {insn.lhs, expand_for_analysis(k, insn.rhs)}) {
      visit(e, [&](const ExprPtr& n) {
        if (n->kind == ExprKind::subscript && !known(n->name)) arrays[n->name].sites.push_back(n->args);
        return true;
      });
    }
  }

  auto params = k.domains.all_params();
  for (const auto& name : order) {
    bool is_param = std::find(params.begin(), params.end(), name) != params.end();
    if (is_param) continue;
    auto it = arrays.find(name);
    if (it == arrays.end()) {
      if (written.count(name)) {
        // Written scalars that are not declared become temporaries.
        TemporaryDecl t;
        t.name = name;
        t.dtype = default_dtype;
        k.temporaries.push_back(t);
        continue;
      }
      ArgDecl a;
      a.name = name;
      a.kind = ArgKind::scalar;
      a.dtype = default_dtype;
      k.args.push_back(a);
      continue;
    }
    if (scalars.count(name))
      throw Error("'" + name + "' is used both as an array and as a scalar");
    ArgDecl a;
    a.name = name;
    a.dtype = default_dtype;
    std::size_t rank = it->second.sites.front().size();
    for (const auto& site : it->second.sites)
      if (site.size() != rank)
        throw Error("array '" + name + "' is subscripted with inconsistent ranks");
    for (std::size_t d = 0; d < rank; ++d) {
      std::vector<poly::AffineExpr> cands;
      for (const auto& site : it->second.sites) {
        auto idx = to_affine(site[d]);
        std::optional<poly::AffineExpr> hi;
        if (idx) hi = index_max(k, *idx);
        if (!hi)
          throw Error("cannot infer the shape of '" + name + "' from index '" + render(site[d]) +
                      "'; declare the argument");
        cands.push_back(*hi + poly::AffineExpr(1));
      }
      auto extent = pick_max(cands);
      if (!extent)
        throw Error("cannot infer the shape of '" + name + "': extents disagree; declare the argument");
      a.shape.push_back(*extent);
    }
    a.strides = contiguous_strides(a.shape, false);
    k.args.push_back(a);
  }
  for (auto& a : k.args)
    if (written.count(a.name)) a.is_output = true;
  // Parameters become integer scalar arguments.
  for (const auto& p : k.params()) {
    if (k.find_arg(p)) continue;
    ArgDecl a;
    a.name = p;
    a.kind = ArgKind::scalar;
    a.dtype = DType::i32;
    k.args.push_back(a);
  }
  return k;
}

Kernel infer_temporary_types(Kernel k) {
  // Forward propagation to a fixpoint; temporaries start at the bottom.
  std::set<std::string> untyped;
  for (auto& t : k.temporaries) untyped.insert(t.name);
  for (auto& t : k.temporaries) t.dtype = DType::i32;
  for (int round = 0; round < 8; ++round) {
    bool changed = false;
    for (auto& t : k.temporaries) {
      DType best = DType::i32;
      for (const auto& insn : k.instructions) {
        if (insn.assignee() != t.name) continue;
        DType d = natural_type(k, expand_for_analysis(k, insn.rhs));
        if (static_cast<int>(d) > static_cast<int>(best)) best = d;
      }
      if (best != t.dtype) {
        t.dtype = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return k;
}

void validate(const Kernel& k) {
  k.domains.validate();
  std::map<std::string, std::string> owner;
  auto claim = [&](const std::string& n, const std::string& what) {
    auto [it, inserted] = owner.emplace(n, what);
    if (!inserted)
      throw Error("name '" + n + "' is used as both " + it->second + " and " + what);
  };
  for (const auto& r : k.rules) claim(r.name, "a rule");
  for (const auto& a : k.args) claim(a.name, "an argument");
  for (const auto& t : k.temporaries) claim(t.name, "a temporary");
  for (const auto& i : k.domains.all_inames()) claim(i, "an iname");
  for (const auto& p : k.params())
    if (!k.find_arg(p)) throw Error("parameter '" + p + "' has no argument declaration");

  for (const auto& a : k.args)
    if (a.shape.size() != a.strides.size())
      throw Error("argument '" + a.name + "' has mismatched shape and strides");

  std::set<std::string> ids;
  for (const auto& insn : k.instructions) {
    if (insn.id.empty()) throw Error("instruction without an id");
    if (!ids.insert(insn.id).second) throw Error("duplicate instruction id '" + insn.id + "'");
  }

  auto check_expr = [&](const ExprPtr& e, const std::set<std::string>& extra,
                        const std::string& where) {
    std::function<void(const ExprPtr&, const std::set<std::string>&)> go =
        [&](const ExprPtr& x, const std::set<std::string>& bound) {
          switch (x->kind) {
            case ExprKind::var:
            case ExprKind::subscript:
              if (!bound.count(x->name) && !extra.count(x->name) && !k.dtype_of(x->name))
                throw Error(where + ": unknown variable '" + x->name + "'");
              break;
            case ExprKind::rule: {
              const auto* r = k.find_rule(x->name);
              if (!r) throw Error(where + ": invocation of undefined rule '" + x->name + "'");
              if (r->params.size() != x->args.size())
                throw Error(where + ": rule '" + x->name + "' invoked with the wrong arity");
              break;
            }
            case ExprKind::call:
              if (!is_known_function(x->name))
                throw Error(where + ": unknown function '" + x->name + "'");
              break;
            case ExprKind::reduction: {
              if (!k.is_iname(x->name))
                throw Error(where + ": reduction over unknown iname '" + x->name + "'");
              auto inner = bound;
              inner.insert(x->name);
              go(x->args[0], inner);
              return;
            }
            default:
              break;
          }
          for (const auto& a : x->args) go(a, bound);
        };
    go(e, {});
  };

  for (const auto& r : k.rules) {
    std::set<std::string> extra(r.params.begin(), r.params.end());
    if (extra.size() != r.params.size()) throw Error("rule '" + r.name + "' repeats a parameter");
    for (const auto& [n, v] : r.implicit) {
      extra.insert(n);
      check_expr(v, {}, "rule '" + r.name + "'");
    }
    check_expr(r.body, extra, "rule '" + r.name + "'");
  }

  std::map<std::string, std::set<std::string>> writers;
  for (const auto& insn : k.instructions) writers[insn.assignee()].insert(insn.id);

  for (const auto& insn : k.instructions) {
    std::string where = "instruction '" + insn.id + "'";
    if (!insn.lhs || !insn.rhs) throw Error(where + ": missing expression");
    if (insn.lhs->kind != ExprKind::var && insn.lhs->kind != ExprKind::subscript)
      throw Error(where + ": invalid assignment target");
    const std::string& target = insn.assignee();
    const auto* arg = k.find_arg(target);
    const auto* tmp = k.find_temporary(target);
    if (!arg && !tmp) throw Error(where + ": assignment to '" + target + "', which is not an argument or temporary");
    std::size_t rank = arg ? arg->shape.size() : tmp->shape.size();
    if (insn.lhs->args.size() != rank)
      throw Error(where + ": '" + target + "' has rank " + std::to_string(rank) + " but is assigned with " +
                  std::to_string(insn.lhs->args.size()) + " index(es)");
    check_expr(insn.lhs, {}, where);
    check_expr(insn.rhs, {}, where);
    for (const auto& d : insn.depends_on)
      if (!k.find_instruction(d)) throw Error(where + ": depends on unknown instruction '" + d + "'");
    for (const auto& w : insn.within)
      if (!k.is_iname(w)) throw Error(where + ": nested within unknown iname '" + w + "'");
    for (const auto& p : insn.predicates) {
      auto it = writers.find(p.flag);
      if (it == writers.end())
        throw Error(where + ": predicate flag '" + p.flag + "' is never written");
      // The writer must be a transitive dependency.
      std::set<std::string> seen;
      std::vector<std::string> todo(insn.depends_on.begin(), insn.depends_on.end());
      bool found = false;
      while (!todo.empty() && !found) {
        std::string d = todo.back();
        todo.pop_back();
        if (!seen.insert(d).second) continue;
        if (it->second.count(d)) found = true;
        if (const auto* di = k.find_instruction(d))
          todo.insert(todo.end(), di->depends_on.begin(), di->depends_on.end());
      }
      if (!found)
        throw Error(where + ": predicate flag '" + p.flag +
                    "' is not written by any instruction it depends on");
    }
  }
  check_acyclic(k);

  for (const auto& [iname, tag] : k.iname_tags)
    if (!k.is_iname(iname)) throw Error("tag on unknown iname '" + iname + "'");
  auto all = k.domains.all_inames();
  if (k.iname_order.size() != all.size() ||
      !std::is_permutation(all.begin(), all.end(), k.iname_order.begin()))
    throw Error("iname order does not list every iname exactly once");
}

Kernel make_kernel(const std::vector<std::string>& domain_texts, std::string_view body,
                   const std::string& name, const KernelOptions& options) {
  Kernel k;
  k.name = name;
  std::vector<poly::BasicSet> sets;
  for (const auto& t : domain_texts) sets.push_back(poly::parse_set(t));
  k.domains = build_domain_tree(sets);
  k.iname_order = k.domains.all_inames();

  std::vector<std::pair<int, InstructionStmt>> stmts;
  for (const auto& [line, text] : logical_lines(body)) {
    Statement s;
    try {
      s = parse_statement(text);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), SourceSpan{line, static_cast<int>(e.offset()) + 1});
    }
    if (s.rule) {
      if (k.find_rule(s.rule->rule.name))
        throw ParseError("duplicate rule '" + s.rule->rule.name + "'", SourceSpan{line, 1});
      k.rules.push_back(s.rule->rule);
    } else {
      stmts.emplace_back(line, *s.instruction);
    }
  }
  for (auto& r : k.rules) r.body = resolve_calls(k, r.body);

  std::set<std::string> explicit_ids;
  for (const auto& [_, s] : stmts)
    if (s.options.id) explicit_ids.insert(*s.options.id);
  int counter = 0;
  std::set<std::string> untyped_temps;
  for (const auto& [line, s] : stmts) {
    Instruction insn;
    insn.source_line = line;
    insn.lhs = resolve_calls(k, s.lhs);
    insn.rhs = resolve_calls(k, s.rhs);
    if (s.options.id) {
      insn.id = *s.options.id;
    } else {
      do {
        insn.id = "insn_" + std::to_string(counter++);
      } while (explicit_ids.count(insn.id));
    }
    if (s.options.tags) insn.tags = *s.options.tags;
    if (s.options.deps) {
      insn.depends_on = *s.options.deps;
      insn.deps_given = true;
    }
    if (s.options.inames) {
      insn.within = *s.options.inames;
      insn.within_given = true;
    }
    if (s.options.predicates) insn.predicates = *s.options.predicates;
    if (s.is_temporary_decl && !k.find_temporary(insn.assignee())) {
      TemporaryDecl t;
      t.name = insn.assignee();
      if (s.temporary_type)
        t.dtype = *s.temporary_type;
      else
        untyped_temps.insert(t.name);
      k.temporaries.push_back(t);
    }
    k.instructions.push_back(std::move(insn));
  }

  for (const auto& text : options.assumptions) {
    if (auto d = poly::try_parse_divisibility(text)) {
      k.assumptions.divisibility.push_back(*d);
    } else {
      auto cs = poly::parse_constraint_text(text);
      k.assumptions.param_constraints.insert(k.assumptions.param_constraints.end(), cs.begin(), cs.end());
    }
  }
  for (const auto& a : options.args) k.args.push_back(a);
  for (const auto& t : options.temporaries) {
    if (k.find_temporary(t.name)) {
      *std::find_if(k.temporaries.begin(), k.temporaries.end(),
                    [&](const TemporaryDecl& x) { return x.name == t.name; }) = t;
      untyped_temps.erase(t.name);
    } else {
      k.temporaries.push_back(t);
    }
  }

  if (options.args.empty()) {
    std::size_t before = k.temporaries.size();
    k = infer_args(std::move(k), options.default_dtype);
    for (std::size_t t = before; t < k.temporaries.size(); ++t)
      untyped_temps.insert(k.temporaries[t].name);
  } else {
    for (auto& a : k.args)
      for (const auto& insn : k.instructions)
        if (insn.assignee() == a.name) a.is_output = true;
    for (const auto& p : k.params()) {
      if (k.find_arg(p)) continue;
      ArgDecl a;
      a.name = p;
      a.kind = ArgKind::scalar;
      a.dtype = DType::i32;
      k.args.push_back(a);
    }
  }

  if (!untyped_temps.empty()) {
    Kernel typed = infer_temporary_types(k);
    for (auto& t : k.temporaries)
      if (untyped_temps.count(t.name)) t.dtype = typed.find_temporary(t.name)->dtype;
  }
  k = infer_within_inames(std::move(k));
  k = infer_dependencies(std::move(k));
  validate(k);
  return k;
}

}  // namespace loopforge
