// SPDX-License-Identifier: Apache-2.0
//
// Splitting, assumptions and tagging.

#include <algorithm>

#include "loopforge/error.hpp"
#include "loopforge/transforms.hpp"

namespace loopforge {

std::vector<std::string> split_name_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    auto b = cur.find_first_not_of(" \t");
    if (b != std::string::npos) out.push_back(cur.substr(b, cur.find_last_not_of(" \t") - b + 1));
    cur.clear();
  };
  for (char c : text) {
    if (c == ',')
      flush();
    else
      cur += c;
  }
  flush();
  return out;
}

namespace {

bool reduces_over(const ExprPtr& e, const std::string& iname) {
  bool found = false;
  visit(e, [&](const ExprPtr& n) {
    if (n->kind == ExprKind::reduction && n->name == iname) found = true;
    return !found;
  });
  return found;
}

}  // namespace

Kernel split_iname(Kernel k, const std::string& iname, std::int64_t factor,
                   const std::optional<std::string>& outer_tag,
                   const std::optional<std::string>& inner_tag) {
  auto node = k.domains.node_of(iname);
  if (!node) throw TransformError("split_iname: unknown iname '" + iname + "'");
  if (factor <= 0) throw TransformError("split_iname: factor must be positive");
  if (k.tag_of(iname).is_parallel())
    throw TransformError("split_iname: iname '" + iname + "' is already tagged " + k.tag_of(iname).str());
  std::optional<IndexTag> otag, itag;
  if (outer_tag) otag = IndexTag::parse(*outer_tag);
  if (inner_tag) itag = IndexTag::parse(*inner_tag);
  for (const auto& insn : k.instructions)
    if (reduces_over(insn.rhs, iname))
      throw TransformError("split_iname: cannot split reduction iname '" + iname + "'");
  for (const auto& r : k.rules)
    if (reduces_over(r.body, iname))
      throw TransformError("split_iname: cannot split reduction iname '" + iname + "'");

  std::string outer = fresh_name(k, iname + "_outer");
  std::string inner = fresh_name(k, iname + "_inner");
  poly::AffineExpr repl = poly::AffineExpr::variable(outer, factor) + poly::AffineExpr::variable(inner);

  poly::DomainTree tree;
  for (std::size_t n = 0; n < k.domains.size(); ++n) {
    poly::BasicSet s = k.domains.node(n);
    if (n == *node) {
      s = poly::split_dim(s, iname, factor, outer, inner);
    } else if (s.has_param(iname)) {
      std::vector<std::string> params;
      for (const auto& p : s.params())
        if (p != iname) params.push_back(p);
      params.push_back(outer);
      params.push_back(inner);
      std::vector<poly::Constraint> cs;
      for (const auto& c : s.constraints()) {
        poly::Constraint nc = c;
        nc.expr = c.expr.substitute(iname, repl);
        cs.push_back(poly::canonicalize(nc));
      }
      s = poly::BasicSet(s.dims(), params, cs);
    }
    tree.add(s, k.domains.parent(n));
  }
  k.domains = tree;

  ExprPtr value = binop(BinOp::add, binop(BinOp::mul, var(outer), int_lit(factor)), var(inner));
  Bindings b{{iname, value}};
  for (auto& insn : k.instructions) {
    insn.lhs = substitute(insn.lhs, b);
    insn.rhs = substitute(insn.rhs, b);
    if (insn.within.erase(iname)) {
      insn.within.insert(outer);
      insn.within.insert(inner);
    }
  }
  for (auto& r : k.rules) {
    for (auto& [_, v] : r.implicit) v = substitute(v, b);
    if (std::find(r.params.begin(), r.params.end(), iname) == r.params.end() && !r.implicit.count(iname))
      r.body = substitute(r.body, b);
  }
  for (auto& t : k.temporaries)
    for (auto& off : t.base_offsets) off = off.substitute(iname, repl);

  auto it = std::find(k.iname_order.begin(), k.iname_order.end(), iname);
  if (it != k.iname_order.end()) {
    it = k.iname_order.erase(it);
    k.iname_order.insert(it, {outer, inner});
  }
  k.iname_tags.erase(iname);
  if (otag && otag->kind != IndexTag::Kind::none) k.iname_tags[outer] = *otag;
  if (itag && itag->kind != IndexTag::Kind::none) k.iname_tags[inner] = *itag;
  validate(k);
  return k;
}

Kernel assume(Kernel k, const std::string& text) {
  auto check = [&](const poly::AffineExpr& e) {
    for (const auto& [n, _] : e.terms())
      if (k.is_iname(n)) throw TransformError("assume: '" + text + "' mentions iname '" + n + "'");
  };
  try {
    if (auto d = poly::try_parse_divisibility(text)) {
      check(d->expr);
      k.assumptions.divisibility.push_back(*d);
    } else {
      auto cs = poly::parse_constraint_text(text);
      for (const auto& c : cs) check(c.expr);
      k.assumptions.param_constraints.insert(k.assumptions.param_constraints.end(), cs.begin(), cs.end());
    }
  } catch (const ParseError& e) {
    throw TransformError(std::string("assume: ") + e.what());
  }
  return k;
}

Kernel tag_inames(Kernel k, const std::string& iname, const std::string& tag) {
  if (!k.is_iname(iname)) throw TransformError("tag_inames: unknown iname '" + iname + "'");
  IndexTag t = IndexTag::parse(tag);
  if (t.kind == IndexTag::Kind::none)
    k.iname_tags.erase(iname);
  else
    k.iname_tags[iname] = t;
  return k;
}

Kernel tag_instructions(Kernel k, const MatchExpr& match, const std::string& tag, TransformLog* log) {
  int count = 0;
  for (auto& insn : k.instructions) {
    std::vector<StackFrame> stack{{FrameKind::instruction, insn.id, insn.tags}};
    if (matches(match, stack)) {
      insn.tags.insert(tag);
      ++count;
    }
  }
  if (count == 0 && log) log->warnings.push_back("tag_instructions: '" + match.str() + "' matched no instruction");
  return k;
}

}  // namespace loopforge
