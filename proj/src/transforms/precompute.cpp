// SPDX-License-Identifier: Apache-2.0
//
// Footprint-based precomputation of substitution rules into temporaries.

#include <algorithm>
#include <iterator>

#include "loopforge/codegen.hpp"
#include "loopforge/error.hpp"
#include "loopforge/transforms.hpp"

namespace loopforge {

namespace {

struct Site {
  std::size_t insn;
  std::vector<poly::AffineExpr> args;
};

// One usable bound out of several, preferring constants.
std::optional<poly::AffineExpr> pick_bound(const std::vector<poly::QuasiAffineBound>& bs) {
  std::optional<poly::AffineExpr> any;
  for (const auto& b : bs) {
    if (!b.is_affine()) continue;
    if (b.affine().is_constant()) return b.affine();
    if (!any) any = b.affine();
  }
  return any;
}

poly::AffineExpr extreme(const poly::AffineExpr& a, const std::map<std::string, poly::AffineExpr>& lo,
                         const std::map<std::string, poly::AffineExpr>& hi, bool want_max) {
  poly::AffineExpr out(a.constant());
  for (const auto& [n, c] : a.terms()) {
    auto l = lo.find(n);
    if (l == lo.end()) {
      out += poly::AffineExpr::variable(n, c);
      continue;
    }
    bool use_hi = (c > 0) == want_max;
    out += (use_hi ? hi.at(n) : l->second) * c;
  }
  return out;
}

// Minimum or maximum of candidates whose pairwise differences are constant.
poly::AffineExpr combine_extreme(const std::vector<poly::AffineExpr>& xs, bool want_max,
                                 const std::string& rule) {
  poly::AffineExpr best = xs.front();
  for (const auto& x : xs) {
    poly::AffineExpr d = x - best;
    if (!d.is_constant())
      throw TransformError("precompute: footprint of '" + rule + "' is not rectangular (" + x.str() +
                           " vs " + best.str() + ")");
    if (want_max ? d.constant() > 0 : d.constant() < 0) best = x;
  }
  return best;
}

// Constraints of the sweep domain carried over to storage axis `t`, so that
// the fetch reads only what some consumer reads. Requires the axis to follow
// a single sweep iname with unit coefficient at every site.
std::vector<poly::Constraint> footprint_constraints(const Kernel& k, const std::vector<Site>& sites, std::size_t d,
                                                    const poly::AffineExpr& base,
                                                    const std::vector<std::string>& sweep,
                                                    const std::set<std::string>& outer, const std::string& t,
                                                    const std::vector<poly::Constraint>& box) {
  auto is_sweep = [&](const std::string& n) { return std::find(sweep.begin(), sweep.end(), n) != sweep.end(); };
  std::string s;
  std::int64_t cmin = 0, cmax = 0;
  for (std::size_t n = 0; n < sites.size(); ++n) {
    poly::AffineExpr diff = sites[n].args[d] - base;
    std::string here;
    for (const auto& [v, c] : diff.terms()) {
      if (!is_sweep(v)) return {};
      if (c != 1 || !here.empty()) return {};
      here = v;
    }
    if (here.empty() || (!s.empty() && here != s)) return {};
    s = here;
    std::int64_t off = diff.constant();
    cmin = n == 0 ? off : std::min(cmin, off);
    cmax = n == 0 ? off : std::max(cmax, off);
  }

  // Context: the box plus the affine bounds of the enclosing inames.
  std::vector<std::string> outer_list(outer.begin(), outer.end());
  std::sort(outer_list.begin(), outer_list.end(), [&](const auto& x, const auto& y) {
    auto ox = std::find(k.iname_order.begin(), k.iname_order.end(), x);
    auto oy = std::find(k.iname_order.begin(), k.iname_order.end(), y);
    return ox < oy;
  });
  poly::BasicSet ctx = k.domains.combined_set(outer_list);
  std::vector<std::string> dims = outer_list;
  dims.push_back(t);
  std::vector<poly::Constraint> ctx_cs = box;
  for (std::size_t n = 0; n < outer_list.size(); ++n) {
    std::vector<std::string> fixed(outer_list.begin(), outer_list.begin() + static_cast<std::ptrdiff_t>(n));
    poly::Bounds b = poly::bounds_for(ctx, outer_list[n], fixed, k.assumptions);
    poly::AffineExpr x = poly::AffineExpr::variable(outer_list[n]);
    for (const auto& lo : b.lower)
      if (lo.is_affine()) ctx_cs.push_back(poly::Constraint::ge0(x - lo.affine()));
    for (const auto& hi : b.upper)
      if (hi.is_affine()) ctx_cs.push_back(poly::Constraint::ge0(hi.affine() - x));
  }
  // Divisible parameters become multiples of their quotient variables.
  auto quotients = [&](poly::AffineExpr e) {
    std::vector<std::string> names;
    for (const auto& [v, _] : e.terms()) names.push_back(v);
    for (const auto& v : names)
      if (std::int64_t m = k.assumptions.modulus_of(v); m > 1)
        e = e.substitute(v, poly::AffineExpr::variable(poly::Assumptions::quotient_name(v, m), m));
    return e;
  };
  for (auto& c : ctx_cs) c.expr = quotients(c.expr);
  for (auto c : k.assumptions.param_constraints) {
    c.expr = quotients(c.expr);
    ctx_cs.push_back(c);
  }
  std::vector<std::string> params;
  auto note_params = [&](const poly::AffineExpr& e) {
    for (const auto& [v, _] : e.terms())
      if (std::find(dims.begin(), dims.end(), v) == dims.end() &&
          std::find(params.begin(), params.end(), v) == params.end())
        params.push_back(v);
  };
  for (const auto& c : ctx_cs) note_params(c.expr);

  std::vector<poly::Constraint> out;
  const poly::BasicSet sweep_set = k.domains.path_set(s);
  for (const auto& c : sweep_set.constraints()) {
    std::int64_t a = c.expr.coeff(s);
    if (a == 0 || c.is_equality()) continue;
    poly::AffineExpr rest = c.expr - poly::AffineExpr::variable(s, a);
    bool usable = true;
    for (const auto& [v, _] : rest.terms())
      usable = usable && !is_sweep(v) && (!k.is_iname(v) || outer.count(v));
    if (!usable) continue;
    poly::Constraint moved = poly::canonicalize(poly::Constraint::ge0(
        rest + (poly::AffineExpr::variable(t) - poly::AffineExpr(a > 0 ? cmin : cmax)) * a));
    poly::Constraint rewritten = moved;
    rewritten.expr = quotients(moved.expr);
    note_params(rewritten.expr);
    poly::BasicSet check(dims, params, ctx_cs);
    if (!poly::implies(check, rewritten)) out.push_back(moved);
  }
  return out;
}

}  // namespace

Kernel precompute(Kernel k, const std::string& rule_match, const std::vector<std::string>& sweep_in,
                  const std::optional<std::string>& default_tag, TransformLog* log) {
  const Kernel input = k;
  MatchExpr m;
  try {
    m = parse_match(rule_match);
  } catch (const ParseError& e) {
    throw TransformError(std::string("precompute: ") + e.what());
  }
  std::vector<std::string> sweep;
  for (const auto& s : sweep_in)
    for (const auto& part : split_name_list(s)) sweep.push_back(part);
  for (const auto& s : sweep)
    if (!k.is_iname(s)) throw TransformError("precompute: unknown sweep iname '" + s + "'");
  std::optional<IndexTag> tag;
  if (default_tag && *default_tag != "None" && *default_tag != "none") tag = IndexTag::parse(*default_tag);

  // Invocation sites directly inside instructions.
  std::string rule_name;
  std::vector<Site> sites;
  for (std::size_t n = 0; n < k.instructions.size(); ++n) {
    const auto& insn = k.instructions[n];
    visit(insn.rhs, [&](const ExprPtr& e) {
      if (e->kind != ExprKind::rule) return true;
      std::vector<StackFrame> stack{{FrameKind::rule, e->name, {}},
                                    {FrameKind::instruction, insn.id, insn.tags}};
      if (e->tag) stack[0].tags.insert(*e->tag);
      if (!matches(m, stack)) return true;
      if (!rule_name.empty() && rule_name != e->name)
        throw TransformError("precompute: '" + rule_match + "' matches invocations of several rules");
      rule_name = e->name;
      Site s{n, {}};
      for (const auto& a : e->args) {
        auto aff = to_affine(a);
        if (!aff) throw TransformError("precompute: argument '" + render(a) + "' of '" + e->name + "' is not affine");
        s.args.push_back(*aff);
      }
      sites.push_back(std::move(s));
      return false;
    });
  }
  if (sites.empty()) {
    if (log) log->warnings.push_back("precompute: '" + rule_match + "' matched no invocation");
    return k;
  }
  const SubstitutionRule rule = *k.find_rule(rule_name);
  for (const auto& [name, value] : rule.implicit)
    for (const auto& v : free_variables(value))
      if (std::find(sweep.begin(), sweep.end(), v) != sweep.end())
        throw TransformError("precompute: rule '" + rule_name + "' depends implicitly on sweep iname '" + v + "'");

  auto order_of = [&](const std::string& iname) {
    return std::find(k.iname_order.begin(), k.iname_order.end(), iname) - k.iname_order.begin();
  };
  std::size_t nparams = rule.params.size();
  std::vector<std::vector<poly::AffineExpr>> los(nparams), his(nparams);
  std::vector<bool> swept(nparams, false);
  for (const auto& site : sites) {
    const auto& insn = k.instructions[site.insn];
    for (const auto& s : sweep)
      if (!insn.within.count(s))
        throw TransformError("precompute: instruction '" + insn.id + "' is not inside sweep iname '" + s + "'");
    std::vector<std::string> within(insn.within.begin(), insn.within.end());
    std::vector<std::string> fixed;
    for (const auto& i : within)
      if (std::find(sweep.begin(), sweep.end(), i) == sweep.end()) fixed.push_back(i);
    std::sort(fixed.begin(), fixed.end(), [&](const auto& a, const auto& b) { return order_of(a) < order_of(b); });
    poly::BasicSet set = k.domains.combined_set(within);
    std::map<std::string, poly::AffineExpr> lo, hi;
    for (const auto& s : sweep) {
      poly::Bounds b;
      try {
        b = poly::bounds_for(set, s, fixed, k.assumptions);
      } catch (const Error& e) {
        throw TransformError(std::string("precompute: unbounded footprint: ") + e.what());
      }
      auto l = pick_bound(b.lower);
      auto h = pick_bound(b.upper);
      if (!l || !h) throw TransformError("precompute: bounds of sweep iname '" + s + "' are not affine");
      lo[s] = *l;
      hi[s] = *h;
    }
    for (std::size_t d = 0; d < nparams; ++d) {
      los[d].push_back(extreme(site.args[d], lo, hi, false));
      his[d].push_back(extreme(site.args[d], lo, hi, true));
      for (const auto& s : sweep) swept[d] = swept[d] || site.args[d].depends_on(s);
    }
  }

  std::vector<poly::AffineExpr> base(nparams);
  std::vector<std::int64_t> extent(nparams);
  for (std::size_t d = 0; d < nparams; ++d) {
    base[d] = combine_extreme(los[d], false, rule_name);
    poly::AffineExpr top = combine_extreme(his[d], true, rule_name);
    poly::AffineExpr size = top - base[d] + poly::AffineExpr(1);
    if (!size.is_constant() || size.constant() < 1)
      throw TransformError("precompute: footprint extent of '" + rule_name + "' argument " + std::to_string(d + 1) +
                           " is not a positive constant (" + size.str() + ")");
    extent[d] = size.constant();
  }

  // Storage axes follow the sweep order.
  std::vector<std::size_t> axes;
  for (const auto& s : sweep)
    for (std::size_t d = 0; d < nparams; ++d)
      if (std::find(axes.begin(), axes.end(), d) == axes.end())
        for (const auto& site : sites)
          if (site.args[d].depends_on(s)) {
            axes.push_back(d);
            break;
          }
  for (std::size_t d = 0; d < nparams; ++d)
    if (extent[d] > 1 && std::find(axes.begin(), axes.end(), d) == axes.end()) axes.push_back(d);

  TemporaryDecl temp;
  temp.name = fresh_name(k, rule_name);
  temp.space = AddressSpace::private_;
  for (const auto& s : sweep)
    if (k.tag_of(s).kind == IndexTag::Kind::local) temp.space = AddressSpace::workgroup;

  std::vector<std::string> new_inames;
  std::set<std::string> taken{temp.name};
  for (std::size_t d : axes) {
    std::string n = fresh_name(k, rule.params[d]);
    for (int c = 0; taken.count(n); ++c) n = rule.params[d] + "_" + std::to_string(c);
    taken.insert(n);
    new_inames.push_back(n);
    temp.shape.push_back(poly::AffineExpr(extent[d]));
    temp.base_offsets.push_back(base[d]);
  }

  // Fetch: the rule body at base + new iname.
  Bindings b = rule.implicit;
  std::vector<ExprPtr> lhs_idx;
  for (std::size_t d = 0; d < nparams; ++d) {
    poly::AffineExpr at = base[d];
    auto pos = std::find(axes.begin(), axes.end(), d);
    if (pos != axes.end()) at += poly::AffineExpr::variable(new_inames[pos - axes.begin()]);
    b[rule.params[d]] = from_affine(at);
  }
  for (const auto& n : new_inames) lhs_idx.push_back(var(n));
  Instruction fetch;
  fetch.id = fresh_instruction_id(k, "insn");
  fetch.lhs = lhs_idx.empty() ? var(temp.name) : subscript(temp.name, lhs_idx);
  fetch.rhs = substitute(rule.body, b);
  fetch.within_given = true;
  fetch.deps_given = true;
  std::set<std::string> depends;
  for (const auto& x : base)
    for (const auto& [n, _] : x.terms())
      if (k.is_iname(n)) depends.insert(n);
  for (const auto& v : free_variables(expand_for_analysis(k, fetch.rhs)))
    if (k.is_iname(v) && std::find(sweep.begin(), sweep.end(), v) == sweep.end()) depends.insert(v);
  // Every work-group consuming the temporary fetches its own copy.
  std::optional<std::set<std::string>> groups;
  for (const auto& site : sites) {
    std::set<std::string> g;
    for (const auto& i : k.instructions[site.insn].within)
      if (k.tag_of(i).kind == IndexTag::Kind::group && std::find(sweep.begin(), sweep.end(), i) == sweep.end())
        g.insert(i);
    if (!groups) groups = g;
    else {
      std::set<std::string> both;
      std::set_intersection(groups->begin(), groups->end(), g.begin(), g.end(), std::inserter(both, both.end()));
      groups = both;
    }
  }
  depends.insert(groups->begin(), groups->end());
  fetch.within = depends;
  for (const auto& n : new_inames) fetch.within.insert(n);

  for (std::size_t a = 0; a < new_inames.size(); ++a) {
    const std::string& t = new_inames[a];
    std::vector<poly::Constraint> box{
        poly::Constraint::ge0(poly::AffineExpr::variable(t)),
        poly::Constraint::ge0(poly::AffineExpr(extent[axes[a]] - 1) - poly::AffineExpr::variable(t))};
    auto extra = footprint_constraints(k, sites, axes[a], base[axes[a]], sweep, depends, t, box);
    std::optional<std::size_t> parent;
    for (const auto& c : extra)
      for (const auto& [n, _] : c.expr.terms())
        if (auto node = k.domains.node_of(n); node && (!parent || *node > *parent)) parent = node;
    std::vector<poly::Constraint> cs = box;
    std::set<std::string> params;
    for (const auto& c : extra) {
      bool on_path = true;
      for (const auto& [n, _] : c.expr.terms()) {
        if (n == t) continue;
        auto node = k.domains.node_of(n);
        if (!node) {
          params.insert(n);
          continue;
        }
        auto path = k.domains.path(*parent);
        on_path = on_path && std::find(path.begin(), path.end(), *node) != path.end();
      }
      if (!on_path) continue;
      cs.push_back(c);
      for (const auto& [n, _] : c.expr.terms())
        if (n != t) params.insert(n);
    }
    if (cs.size() == box.size()) parent.reset();
    k.domains.add(poly::BasicSet({t}, std::vector<std::string>(params.begin(), params.end()), cs), parent);
  }
  if (!new_inames.empty()) {
    auto first = std::min_element(sweep.begin(), sweep.end(), [&](const auto& x, const auto& y) {
      return order_of(x) < order_of(y);
    });
    auto at = k.iname_order.begin() + (first == sweep.end() ? k.iname_order.size() : order_of(*first));
    k.iname_order.insert(at, new_inames.begin(), new_inames.end());
    for (const auto& n : new_inames)
      if (tag) k.iname_tags[n] = *tag;
      else k.iname_tags[n] = IndexTag{IndexTag::Kind::sequential, 0};
  }
  temp.dtype = natural_type(k, expand_for_analysis(k, fetch.rhs));
  // Writers of what the fetch reads.
  auto reads = reads_of(k, fetch);
  for (const auto& insn : k.instructions)
    if (reads.count(insn.assignee())) fetch.depends_on.insert(insn.id);

  // Consumers read the temporary.
  std::set<std::size_t> consumers;
  for (auto& insn : k.instructions) {
    bool touched = false;
    insn.rhs = rewrite(insn.rhs, [&](const ExprPtr& e) -> ExprPtr {
      if (e->kind != ExprKind::rule || e->name != rule_name) return nullptr;
      std::vector<StackFrame> stack{{FrameKind::rule, e->name, {}},
                                    {FrameKind::instruction, insn.id, insn.tags}};
      if (e->tag) stack[0].tags.insert(*e->tag);
      if (!matches(m, stack)) return nullptr;
      touched = true;
      std::vector<ExprPtr> idx;
      for (std::size_t d : axes) idx.push_back(from_affine(*to_affine(e->args[d]) - base[d]));
      return idx.empty() ? var(temp.name) : subscript(temp.name, idx);
    });
    if (touched) insn.depends_on.insert(fetch.id);
  }
  std::size_t first_site = sites.front().insn;
  k.temporaries.push_back(temp);
  k.instructions.insert(k.instructions.begin() + static_cast<std::ptrdiff_t>(first_site), fetch);
  validate(k);
  try {
    schedule(k);
  } catch (const ScheduleError& e) {
    bool was_schedulable = true;
    try {
      schedule(input);
    } catch (const ScheduleError&) {
      was_schedulable = false;
    }
    if (was_schedulable)
      throw TransformError("precompute: no single placement of the fetch for '" + rule_name + "' serves all its uses: " + e.what());
  }
  return k;
}

}  // namespace loopforge
