// SPDX-License-Identifier: Apache-2.0
//
// Substitution-rule transforms: extraction, wrapping, conversion from
// temporaries, and targeted expansion.

#include <algorithm>
#include <functional>

#include "loopforge/error.hpp"
#include "loopforge/transforms.hpp"

namespace loopforge {

namespace {

// First-order matching: names in `params` are pattern variables.
bool unify(const ExprPtr& pat, const ExprPtr& e, const std::set<std::string>& params, Bindings& b) {
  if (pat->kind == ExprKind::var && params.count(pat->name)) {
    auto it = b.find(pat->name);
    if (it != b.end()) return equal(it->second, e);
    b.emplace(pat->name, e);
    return true;
  }
  if (pat->kind != e->kind || pat->op != e->op || pat->name != e->name || pat->tag != e->tag ||
      pat->ival != e->ival || pat->lit_type != e->lit_type || pat->args.size() != e->args.size())
    return false;
  if (pat->kind == ExprKind::float_lit && !equal(pat, e)) return false;
  for (std::size_t k = 0; k < pat->args.size(); ++k)
    if (!unify(pat->args[k], e->args[k], params, b)) return false;
  return true;
}

ExprPtr map_children(const ExprPtr& e, const std::function<ExprPtr(const ExprPtr&)>& fn) {
  if (e->args.empty()) return e;
  std::vector<ExprPtr> args;
  bool changed = false;
  for (const auto& a : e->args) {
    args.push_back(fn(a));
    changed = changed || args.back() != a;
  }
  return changed ? with_args(e, std::move(args)) : e;
}

void check_capture(const SubstitutionRule& r, const std::vector<ExprPtr>& args) {
  std::set<std::string> bound;
  visit(r.body, [&](const ExprPtr& n) {
    if (n->kind == ExprKind::reduction) bound.insert(n->name);
    return true;
  });
  if (bound.empty()) return;
  for (const auto& a : args)
    for (const auto& v : free_variables(a))
      if (bound.count(v))
        throw TransformError("expanding '" + r.name + "' would capture reduction iname '" + v + "'");
}

ExprPtr instantiate(const SubstitutionRule& r, const ExprPtr& body, const std::vector<ExprPtr>& args) {
  check_capture(r, args);
  Bindings b = r.implicit;
  for (std::size_t k = 0; k < r.params.size(); ++k) b[r.params[k]] = args[k];
  return substitute(body, b);
}

SubstitutionRule& rule_ref(Kernel& k, const std::string& name) {
  for (auto& r : k.rules)
    if (r.name == name) return r;
  throw TransformError("invocation of undefined rule '" + name + "'");
}

}  // namespace

Kernel extract_subst(Kernel k, const std::string& rule_name, const std::string& template_text,
                     const std::vector<std::string>& parameters, TransformLog* log) {
  std::string name = fresh_name(k, rule_name);
  ExprPtr tmpl;
  try {
    tmpl = resolve_calls(k, parse_expr(template_text));
  } catch (const ParseError& e) {
    throw TransformError("extract_subst: bad template '" + template_text + "': " + e.what());
  }
  std::set<std::string> params(parameters.begin(), parameters.end());
  if (params.size() != parameters.size()) throw TransformError("extract_subst: repeated parameter");
  auto fv = free_variables(tmpl);
  for (const auto& p : parameters)
    if (!fv.count(p))
      throw TransformError("extract_subst: parameter '" + p + "' does not occur in '" + template_text + "'");

  int count = 0;
  std::function<ExprPtr(const ExprPtr&)> replace = [&](const ExprPtr& e) -> ExprPtr {
    Bindings b;
    if (unify(tmpl, e, params, b)) {
      ++count;
      std::vector<ExprPtr> args;
      for (const auto& p : parameters) args.push_back(replace(b.at(p)));
      return rule_call(name, std::nullopt, args);
    }
    return map_children(e, replace);
  };
  for (auto& insn : k.instructions) insn.rhs = replace(insn.rhs);
  for (auto& r : k.rules) r.body = replace(r.body);

  // Free inames of the template get rule-local names bound at the call site.
  SubstitutionRule rule;
  rule.name = name;
  rule.params = parameters;
  Bindings renames;
  std::set<std::string> taken(params.begin(), params.end());
  for (const auto& v : fv) {
    if (params.count(v) || !k.is_iname(v)) continue;
    std::string local = fresh_name(k, v);
    for (int n = 0; taken.count(local) || fv.count(local); ++n) local = v + "_" + std::to_string(n);
    taken.insert(local);
    renames[v] = var(local);
    rule.implicit[local] = var(v);
  }
  rule.body = substitute(tmpl, renames);
  k.rules.push_back(rule);
  if (count == 0 && log) log->warnings.push_back("extract_subst: '" + template_text + "' matched nothing");
  validate(k);
  return k;
}

Kernel wrap_variable_access(Kernel k, const std::string& var_name, const std::string& rule_name,
                            TransformLog* log) {
  std::size_t rank = 0;
  if (const auto* a = k.find_arg(var_name))
    rank = a->kind == ArgKind::array ? a->shape.size() : 0;
  else if (const auto* t = k.find_temporary(var_name))
    rank = t->shape.size();
  else
    throw TransformError("wrap_variable_access: unknown variable '" + var_name + "'");
  std::vector<std::string> params;
  std::string text = var_name;
  for (std::size_t d = 0; d < rank; ++d) {
    params.push_back("p_" + std::to_string(d));
    text += (d ? ", " : "[") + params.back();
  }
  if (rank) text += "]";
  return extract_subst(std::move(k), rule_name, text, params, log);
}

Kernel temporary_to_subst(Kernel k, const std::string& temp_name) {
  const auto* temp = k.find_temporary(temp_name);
  if (!temp) throw TransformError("temporary_to_subst: '" + temp_name + "' is not a temporary");
  std::vector<std::size_t> writers;
  for (std::size_t n = 0; n < k.instructions.size(); ++n)
    if (k.instructions[n].assignee() == temp_name) writers.push_back(n);
  if (writers.size() != 1)
    throw TransformError("temporary_to_subst: '" + temp_name + "' has " + std::to_string(writers.size()) +
                         " writers; exactly one is required");
  const Instruction def = k.instructions[writers[0]];
  if (!def.predicates.empty())
    throw TransformError("temporary_to_subst: the definition of '" + temp_name + "' is predicated");
  for (const auto& insn : k.instructions)
    for (const auto& p : insn.predicates)
      if (p.flag == temp_name)
        throw TransformError("temporary_to_subst: '" + temp_name + "' is used as a predicate");

  std::vector<std::string> lhs_inames;
  for (const auto& idx : def.lhs->args) {
    if (idx->kind != ExprKind::var || !k.is_iname(idx->name) ||
        std::find(lhs_inames.begin(), lhs_inames.end(), idx->name) != lhs_inames.end())
      throw TransformError("temporary_to_subst: the definition of '" + temp_name +
                           "' is not indexed by distinct inames");
    lhs_inames.push_back(idx->name);
  }
  auto used = free_variables(def.rhs);
  SubstitutionRule rule;
  rule.name = fresh_name(k, temp_name + "_subst");
  for (const auto& i : k.domains.all_inames())
    if (def.within.count(i) &&
        (used.count(i) || std::find(lhs_inames.begin(), lhs_inames.end(), i) != lhs_inames.end()))
      rule.params.push_back(i);
  rule.body = def.rhs;

  auto replace_reads = [&](const ExprPtr& e, const std::set<std::string>* site_within) {
    return rewrite(e, [&](const ExprPtr& n) -> ExprPtr {
      if ((n->kind != ExprKind::var && n->kind != ExprKind::subscript) || n->name != temp_name) return nullptr;
      if (n->args.size() != lhs_inames.size())
        throw TransformError("temporary_to_subst: read of '" + temp_name + "' with the wrong rank");
      for (const auto& idx : n->args)
        if (idx->kind != ExprKind::var || !k.is_iname(idx->name))
          throw TransformError("temporary_to_subst: read '" + render(n) + "' is not indexed by inames");
      std::vector<ExprPtr> args;
      for (const auto& p : rule.params) {
        auto pos = std::find(lhs_inames.begin(), lhs_inames.end(), p);
        if (pos != lhs_inames.end()) {
          args.push_back(n->args[pos - lhs_inames.begin()]);
        } else {
          if (site_within && !site_within->count(p))
            throw TransformError("temporary_to_subst: read '" + render(n) + "' is outside iname '" + p + "'");
          args.push_back(var(p));
        }
      }
      return rule_call(rule.name, std::nullopt, args);
    });
  };

  std::vector<Instruction> kept;
  for (std::size_t n = 0; n < k.instructions.size(); ++n) {
    if (n == writers[0]) continue;
    Instruction insn = k.instructions[n];
    insn.rhs = replace_reads(insn.rhs, &insn.within);
    std::vector<ExprPtr> idx;
    for (const auto& a : insn.lhs->args) idx.push_back(replace_reads(a, &insn.within));
    insn.lhs = with_args(insn.lhs, idx);
    if (insn.depends_on.erase(def.id))
      for (const auto& d : def.depends_on) insn.depends_on.insert(d);
    kept.push_back(std::move(insn));
  }
  for (auto& r : k.rules) r.body = replace_reads(r.body, nullptr);
  k.instructions = std::move(kept);
  k.temporaries.erase(std::remove_if(k.temporaries.begin(), k.temporaries.end(),
                                     [&](const TemporaryDecl& t) { return t.name == temp_name; }),
                      k.temporaries.end());
  k.rules.push_back(rule);
  validate(k);
  return k;
}

namespace {

struct Expander {
  Kernel& k;
  const MatchExpr& match;
  int expanded = 0;
  std::map<std::pair<std::string, std::string>, std::string> copies;

  ExprPtr walk(const ExprPtr& e, const std::vector<StackFrame>& stack) {
    if (stack.size() > 64) throw TransformError("substitution rules are recursive");
    if (e->kind != ExprKind::rule)
      return map_children(e, [&](const ExprPtr& c) { return walk(c, stack); });
    std::vector<ExprPtr> args;
    for (const auto& a : e->args) args.push_back(walk(a, stack));
    std::vector<StackFrame> inner{{FrameKind::rule, e->name, {}}};
    if (e->tag) inner[0].tags.insert(*e->tag);
    inner.insert(inner.end(), stack.begin(), stack.end());
    // Copy the rule out: walking may append to k.rules.
    SubstitutionRule r = rule_ref(k, e->name);
    if (r.params.size() != args.size())
      throw TransformError("rule '" + r.name + "' invoked with the wrong number of arguments");
    ExprPtr body = walk(r.body, inner);
    if (matches(match, inner)) {
      ++expanded;
      return instantiate(r, body, args);
    }
    if (equal(body, r.body)) return with_args(e, args);
    std::string key = render(body);
    for (const auto& [n, v] : r.implicit) key += "|" + n + "=" + render(v);
    auto it = copies.find({r.name, key});
    std::string copy_name;
    if (it != copies.end()) {
      copy_name = it->second;
    } else {
      copy_name = fresh_name(k, r.name);
      SubstitutionRule copy = r;
      copy.name = copy_name;
      copy.body = body;
      k.rules.push_back(copy);
      copies[{r.name, key}] = copy_name;
    }
    return rule_call(copy_name, e->tag, args);
  }
};

}  // namespace

Kernel expand_subst(Kernel k, const MatchExpr& match, TransformLog* log) {
  Expander x{k, match, 0, {}};
  for (auto& insn : k.instructions) {
    std::vector<StackFrame> stack{{FrameKind::instruction, insn.id, insn.tags}};
    insn.rhs = x.walk(insn.rhs, stack);
    insn.lhs = x.walk(insn.lhs, stack);
  }
  if (x.expanded == 0 && log) log->warnings.push_back("expand_subst: '" + match.str() + "' matched nothing");
  validate(k);
  return k;
}

Kernel expand_all_rules(Kernel k) {
  if (k.rules.empty()) return k;
  k = expand_subst(std::move(k), parse_match("*"));
  for (const auto& insn : k.instructions)
    visit(insn.rhs, [&](const ExprPtr& n) {
      if (n->kind == ExprKind::rule) throw InternalError("rule invocation survived full expansion");
      return true;
    });
  k.rules.clear();
  return k;
}

}  // namespace loopforge
