// SPDX-License-Identifier: Apache-2.0
//
// Greedy loop-nest scheduler and predicate grouping.

#include <algorithm>

#include "loopforge/codegen.hpp"
#include "loopforge/error.hpp"
#include "loopforge/transforms.hpp"

namespace loopforge {

poly::Bounds loop_bounds(const Kernel& k, const std::vector<std::string>& open,
                         const std::string& iname) {
  std::vector<std::string> names = open;
  names.push_back(iname);
  poly::BasicSet set = k.domains.combined_set(names);
  try {
    return poly::bounds_for(set, iname, open, k.assumptions);
  } catch (const ScheduleError&) {
    throw;
  } catch (const Error& e) {
    throw ScheduleError("bounds of '" + iname + "': " + e.what());
  }
}

namespace {

bool contains_all(const std::set<std::string>& big, const std::set<std::string>& small) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

struct Builder {
  std::vector<ScheduleNode> root;
  std::vector<std::vector<ScheduleNode>*> stack{&root};

  void open(const std::string& iname) {
    ScheduleNode n;
    n.kind = ScheduleNode::Kind::loop;
    n.iname = iname;
    stack.back()->push_back(std::move(n));
    stack.push_back(&stack.back()->back().children);
  }
  void close() { stack.pop_back(); }
  void statement(const Instruction& insn) {
    ScheduleNode n;
    n.kind = ScheduleNode::Kind::statement;
    n.insn_id = insn.id;
    n.predicates = insn.predicates;
    stack.back()->push_back(std::move(n));
  }
};

}  // namespace

Schedule schedule(const Kernel& input) {
  Schedule out;
  out.kernel = expand_all_rules(input);
  const Kernel& k = out.kernel;
  const auto& insns = k.instructions;
  const std::size_t n = insns.size();

  auto order_of = [&](const std::string& iname) {
    return std::find(k.iname_order.begin(), k.iname_order.end(), iname) - k.iname_order.begin();
  };
  // Inames of enclosing domains must be open before an iname can be.
  auto ancestors = [&](const std::string& iname) {
    std::set<std::string> res;
    auto path = k.domains.path(*k.domains.node_of(iname));
    path.pop_back();
    for (auto p : path)
      for (const auto& d : k.domains.node(p).dims()) res.insert(d);
    return res;
  };

  Builder b;
  std::vector<bool> done(n, false);
  std::vector<std::map<std::string, int>> instance(n);
  std::vector<std::string> open;
  std::vector<int> open_ids;
  int next_loop = 0;
  std::size_t remaining = n;

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[insns[i].id] = i;
  // upstream[i]: every instruction i depends on, transitively.
  std::vector<std::vector<bool>> upstream(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> todo{i};
    while (!todo.empty()) {
      std::size_t x = todo.back();
      todo.pop_back();
      for (const auto& d : insns[x].depends_on) {
        auto it = index.find(d);
        if (it == index.end() || upstream[i][it->second]) continue;
        upstream[i][it->second] = true;
        todo.push_back(it->second);
      }
    }
  }
  // Entering x now would be premature when something outside x, not itself
  // waiting on work inside x, still has to run before work inside x.
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& d : insns[i].depends_on)
      if (auto it = index.find(d); it != index.end()) edges.emplace_back(i, it->second);
  auto premature = [&](const std::string& x, const std::set<std::string>& current) {
    // Dependent instructions sharing loop y, only one of which runs in x:
    // y has to enclose x.
    for (auto [a, c] : edges) {
      if (done[a] && done[c]) continue;
      const auto& wa = insns[a].within;
      const auto& wc = insns[c].within;
      if (wa.count(x) == wc.count(x)) continue;
      for (const auto& y : wa)
        if (y != x && wc.count(y) && !current.count(y)) return true;
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (done[j] || insns[j].within.count(x)) continue;
      bool feeds_inside = false, waits_inside = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (done[i] || !insns[i].within.count(x)) continue;
        feeds_inside = feeds_inside || upstream[i][j];
        waits_inside = waits_inside || upstream[j][i];
      }
      if (feeds_inside && !waits_inside) return true;
    }
    return false;
  };

  // Starting i inside the open loops is futile when one of its dependents
  // sharing such a loop still waits on work that runs outside it.
  auto deferred = [&](std::size_t i, const std::set<std::string>& current) {
    for (auto [d, src] : edges) {
      if (src != i) continue;
      for (const auto& y : insns[d].within) {
        if (!current.count(y) || !insns[i].within.count(y)) continue;
        for (std::size_t j = 0; j < n; ++j)
          if (j != i && !done[j] && upstream[d][j] && !upstream[j][i] && !insns[j].within.count(y)) return true;
      }
    }
    return false;
  };

  auto ready = [&](std::size_t i) {
    if (done[i]) return false;
    for (const auto& d : insns[i].depends_on) {
      auto it = std::find_if(insns.begin(), insns.end(), [&](const Instruction& x) { return x.id == d; });
      if (!done[static_cast<std::size_t>(it - insns.begin())]) return false;
    }
    return true;
  };

  while (remaining > 0) {
    std::set<std::string> current(open.begin(), open.end());
    std::vector<std::size_t> ready_now;
    bool any_ready = false;
    for (std::size_t i = 0; i < n; ++i)
      if (ready(i)) {
        any_ready = true;
        if (!deferred(i, current)) ready_now.push_back(i);
      }
    if (!any_ready) throw InternalError("scheduler: no ready instruction in an acyclic kernel");

    auto here = std::find_if(ready_now.begin(), ready_now.end(),
                             [&](std::size_t i) { return insns[i].within == current; });
    if (here != ready_now.end()) {
      b.statement(insns[*here]);
      done[*here] = true;
      for (std::size_t l = 0; l < open.size(); ++l) instance[*here][open[l]] = open_ids[l];
      --remaining;
      continue;
    }

    std::set<std::string> candidates;
    for (std::size_t i : ready_now) {
      const auto& w = insns[i].within;
      if (!contains_all(w, current)) continue;
      for (const auto& x : w) {
        if (current.count(x)) continue;
        auto anc = ancestors(x);
        bool ok = std::all_of(anc.begin(), anc.end(),
                              [&](const std::string& a) { return !w.count(a) || current.count(a); });
        if (ok) candidates.insert(x);
      }
    }
    if (!candidates.empty()) {
      std::string best;
      long best_count = -1;
      bool best_premature = true;
      for (const auto& x : candidates) {
        bool early = premature(x, current);
        if (early && !best_premature) continue;
        if (!early && best_premature) best_count = -1;
        std::set<std::string> with = current;
        with.insert(x);
        long count = 0;
        for (std::size_t i = 0; i < n; ++i)
          if (!done[i] && contains_all(insns[i].within, with)) ++count;
        bool group = k.tag_of(x).kind == IndexTag::Kind::group;
        bool best_group = !best.empty() && k.tag_of(best).kind == IndexTag::Kind::group;
        if (count > best_count ||
            (count == best_count && (group > best_group || (group == best_group && order_of(x) < order_of(best))))) {
          best = x;
          best_count = count;
          best_premature = early;
        }
      }
      b.open(best);
      open.push_back(best);
      open_ids.push_back(next_loop++);
      continue;
    }
    if (open.empty()) throw InternalError("scheduler: no progress at top level");
    if (b.stack.back()->empty())
      throw ScheduleError("no loop nesting found: the loop over '" + open.back() + "' would run nothing");
    b.close();
    open.pop_back();
    open_ids.pop_back();
  }

  // A dependency between instructions sharing a loop must stay within one
  // iteration of it.
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& d : insns[i].depends_on) {
      auto j = static_cast<std::size_t>(
          std::find_if(insns.begin(), insns.end(), [&](const Instruction& x) { return x.id == d; }) -
          insns.begin());
      for (const auto& x : insns[i].within)
        if (insns[j].within.count(x) && instance[i].at(x) != instance[j].at(x))
          throw ScheduleError("cannot schedule '" + insns[i].id + "' after '" + d +
                              "' without leaving and re-entering the loop over '" + x + "'");
    }
  out.body = std::move(b.root);
  return out;
}

namespace {

std::set<Predicate> intersect(const std::set<Predicate>& a, const std::set<Predicate>& b) {
  std::set<Predicate> r;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(r, r.end()));
  return r;
}

struct Grouper {
  const Kernel& k;

  std::set<Predicate> common(const ScheduleNode& n) const {
    if (n.kind == ScheduleNode::Kind::statement) return n.predicates;
    if (n.children.empty()) return {};
    std::set<Predicate> c = common(n.children.front());
    for (const auto& ch : n.children) c = intersect(c, common(ch));
    if (n.kind == ScheduleNode::Kind::conditional) c.insert(n.predicates.begin(), n.predicates.end());
    return c;
  }

  void written(const ScheduleNode& n, std::set<std::string>& out) const {
    if (n.kind == ScheduleNode::Kind::statement)
      out.insert(k.find_instruction(n.insn_id)->assignee());
    for (const auto& c : n.children) written(c, out);
  }

  std::set<Predicate> hoistable(const ScheduleNode& n) const {
    std::set<std::string> w;
    written(n, w);
    std::set<Predicate> c;
    for (const auto& p : common(n))
      if (!w.count(p.flag)) c.insert(p);
    return c;
  }

  static void strip(ScheduleNode& n, const std::set<Predicate>& c) {
    if (n.kind == ScheduleNode::Kind::statement)
      for (const auto& p : c) n.predicates.erase(p);
    for (auto& ch : n.children) strip(ch, c);
  }

  void group(std::vector<ScheduleNode>& nodes) const {
    std::vector<ScheduleNode> out;
    std::size_t i = 0;
    while (i < nodes.size()) {
      std::set<Predicate> c = hoistable(nodes[i]);
      if (c.empty()) {
        group(nodes[i].children);
        out.push_back(std::move(nodes[i]));
        ++i;
        continue;
      }
      std::size_t j = i + 1;
      for (; j < nodes.size(); ++j) {
        auto next = intersect(c, hoistable(nodes[j]));
        if (next.empty()) break;
        c = next;
      }
      ScheduleNode cond;
      cond.kind = ScheduleNode::Kind::conditional;
      cond.predicates = c;
      for (std::size_t m = i; m < j; ++m) {
        strip(nodes[m], c);
        cond.children.push_back(std::move(nodes[m]));
      }
      group(cond.children);
      out.push_back(std::move(cond));
      i = j;
    }
    nodes = std::move(out);
  }
};

void render_node(const ScheduleNode& n, int depth, std::string& out) {
  std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
  auto preds = [](const std::set<Predicate>& ps) {
    std::string s;
    for (const auto& p : ps) s += (s.empty() ? "" : " && ") + std::string(p.negated ? "!" : "") + p.flag;
    return s;
  };
  switch (n.kind) {
    case ScheduleNode::Kind::loop: out += pad + "for " + n.iname + "\n"; break;
    case ScheduleNode::Kind::conditional: out += pad + "if " + preds(n.predicates) + "\n"; break;
    case ScheduleNode::Kind::statement:
      out += pad + n.insn_id;
      if (!n.predicates.empty()) out += " if " + preds(n.predicates);
      out += "\n";
      break;
  }
  for (const auto& c : n.children) render_node(c, depth + 1, out);
}

}  // namespace

Schedule group_predicates(Schedule s) {
  Grouper{s.kernel}.group(s.body);
  return s;
}

std::string render_schedule(const Schedule& s) {
  std::string out;
  for (const auto& n : s.body) render_node(n, 0, out);
  return out;
}

}  // namespace loopforge
