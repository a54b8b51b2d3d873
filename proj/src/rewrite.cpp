#include "dlint/rewrite.hpp"

#include <algorithm>

#include "dlint/errors.hpp"

namespace dlint {

AttrTest AttrTest::eq(std::string a, AttrValue v) { return {std::move(a), Cmp::Eq, std::move(v), {}}; }
AttrTest AttrTest::ne(std::string a, AttrValue v) { return {std::move(a), Cmp::Ne, std::move(v), {}}; }
AttrTest AttrTest::lt(std::string a, AttrValue v) { return {std::move(a), Cmp::Lt, std::move(v), {}}; }
AttrTest AttrTest::le(std::string a, AttrValue v) { return {std::move(a), Cmp::Le, std::move(v), {}}; }
AttrTest AttrTest::gt(std::string a, AttrValue v) { return {std::move(a), Cmp::Gt, std::move(v), {}}; }
AttrTest AttrTest::ge(std::string a, AttrValue v) { return {std::move(a), Cmp::Ge, std::move(v), {}}; }
AttrTest AttrTest::in(std::string a, std::vector<AttrValue> xs) {
  return {std::move(a), Cmp::In, std::nullopt, std::move(xs)};
}
AttrTest AttrTest::not_in(std::string a, std::vector<AttrValue> xs) {
  return {std::move(a), Cmp::NotIn, std::nullopt, std::move(xs)};
}
AttrTest AttrTest::exists(std::string a) { return {std::move(a), Cmp::Exists, std::nullopt, {}}; }
AttrTest AttrTest::absent(std::string a) { return {std::move(a), Cmp::Absent, std::nullopt, {}}; }
AttrTest AttrTest::is_true(std::string a) { return eq(std::move(a), AttrValue::of_bool(true)); }
AttrTest AttrTest::is_false(std::string a) { return eq(std::move(a), AttrValue::of_bool(false)); }

namespace {

bool compare_values(const AttrValue& a, Cmp op, const AttrValue& b) {
  switch (op) {
    case Cmp::Eq: return a == b;
    case Cmp::Ne: return a != b;
    default: break;
  }
  if (!a.numeric() || !b.numeric()) return false;
  double x = a.as_number(), y = b.as_number();
  switch (op) {
    case Cmp::Lt: return x < y;
    case Cmp::Le: return x <= y;
    case Cmp::Gt: return x > y;
    case Cmp::Ge: return x >= y;
    default: return false;
  }
}

}  // namespace

bool AttrTest::eval(const Node& n) const {
  const AttrValue* v = n.attr(attr);
  if (op == Cmp::Absent) return v == nullptr;
  if (v == nullptr) return false;
  if (op == Cmp::Exists) return true;
  if (op == Cmp::In || op == Cmp::NotIn) {
    bool member = false;
    for (const AttrValue& x : set)
      if (*v == x) member = true;
    return op == Cmp::In ? member : !member;
  }
  return value && compare_values(*v, op, *value);
}

bool NodeConstraint::eval(const Node& n) const {
  if (kind && n.kind != *kind) return false;
  for (const AttrTest& t : tests)
    if (!t.eval(n)) return false;
  return true;
}

namespace {

// Targets reachable from src over next+, where every node strictly between
// src and the target satisfies the through filter.
std::vector<NodeId> closure_targets(const AttributedGraph& g, NodeId src,
                                    const std::optional<NodeConstraint>& through) {
  auto stops = [&](const Node& n) { return through && !through->eval(n); };
  std::vector<NodeId> inner = next_closure(g, src, stops);
  NodeId last = inner.empty() ? src : inner.back();
  std::vector<NodeId> targets = inner;
  if (auto after = g.out_neighbor(last, EdgeLabel::Next)) {
    bool already = !inner.empty() && inner.back() == *after;
    if (!already) targets.push_back(*after);
  }
  return targets;
}

bool edge_holds(const AttributedGraph& g, const EdgeConstraint& e, NodeId src, NodeId dst) {
  if (!e.closure) return g.has_edge(src, e.label, dst);
  for (NodeId t : closure_targets(g, src, e.through))
    if (t == dst) return true;
  return false;
}

bool rels_hold(const AttributedGraph& g, const std::vector<RelTest>& rels,
               const std::vector<NodeId>& slots) {
  for (const RelTest& r : rels) {
    if (r.a_slot >= int(slots.size()) || r.b_slot >= int(slots.size())) return false;
    const AttrValue* a = g.node(slots[size_t(r.a_slot)]).attr(r.a_attr);
    const AttrValue* b = g.node(slots[size_t(r.b_slot)]).attr(r.b_attr);
    if (!a || !b || !compare_values(*a, r.op, *b)) return false;
  }
  return true;
}

// Backtracking search over sub-pattern slots, starting from the already
// bound context prefix. Calls sink for every complete assignment; a sink
// returning true stops the search.
bool enumerate(const AttributedGraph& g, const SubPattern& sp, std::vector<NodeId>& slots,
               size_t context, const std::function<bool(const std::vector<NodeId>&)>& sink) {
  size_t k = slots.size();
  if (k == context + sp.nodes.size()) {
    if (!rels_hold(g, sp.rels, slots)) return false;
    return sink(slots);
  }

  const NodeConstraint& nc = sp.nodes[k - context];

  // When an edge constrains this slot against an already bound one, derive
  // the candidate set from adjacency instead of scanning all nodes.
  std::vector<NodeId> candidates;
  bool narrowed = false;
  for (const EdgeConstraint& e : sp.edges) {
    if (size_t(e.dst_slot) == k && size_t(e.src_slot) < k) {
      NodeId src = slots[size_t(e.src_slot)];
      candidates = e.closure ? closure_targets(g, src, e.through)
                             : g.out_neighbors(src, e.label);
      narrowed = true;
      break;
    }
    if (size_t(e.src_slot) == k && size_t(e.dst_slot) < k && !e.closure) {
      candidates = g.in_neighbors(slots[size_t(e.dst_slot)], e.label);
      narrowed = true;
      break;
    }
  }
  if (!narrowed) {
    candidates.reserve(g.nodes().size());
    for (const Node& n : g.nodes()) candidates.push_back(n.id);
  }
  std::sort(candidates.begin(), candidates.end());

  for (NodeId cand : candidates) {
    if (std::find(slots.begin(), slots.end(), cand) != slots.end()) continue;
    if (!nc.eval(g.node(cand))) continue;
    bool edges_ok = true;
    for (const EdgeConstraint& e : sp.edges) {
      size_t s = size_t(e.src_slot), d = size_t(e.dst_slot);
      if (std::max(s, d) != k || std::min(s, d) > k) continue;
      NodeId src = s == k ? cand : slots[s];
      NodeId dst = d == k ? cand : slots[d];
      if (s == k && d == k) continue;
      if (!edge_holds(g, e, src, dst)) {
        edges_ok = false;
        break;
      }
    }
    if (!edges_ok) continue;
    slots.push_back(cand);
    if (enumerate(g, sp, slots, context, sink)) return true;
    slots.pop_back();
  }
  return false;
}

bool nac_triggered(const AttributedGraph& g, const SubPattern& nac,
                   const std::vector<NodeId>& lhs_slots) {
  for (const auto& [slot, test] : nac.context_tests) {
    if (slot >= int(lhs_slots.size())) return false;
    if (!test.eval(g.node(lhs_slots[size_t(slot)]))) return false;
  }
  std::vector<NodeId> slots = lhs_slots;
  return enumerate(g, nac, slots, lhs_slots.size(),
                   [](const std::vector<NodeId>&) { return true; });
}

bool anchor_blocked(const RulePattern& p, const AttributedGraph& g, NodeId anchor) {
  for (const Node& n : g.nodes()) {
    if (n.kind != NodeKind::Fault) continue;
    if (n.text_attr("code") != p.code) continue;
    if (p.fire_once) return true;
    auto holder = g.in_neighbor(n.id, EdgeLabel::HasFault);
    if (holder && *holder == anchor) return true;
  }
  return false;
}

bool match_valid(const RulePattern& p, const AttributedGraph& g, const Match& m) {
  if (m.variant < 0 || m.variant >= int(p.variants.size())) return false;
  const SubPattern& v = p.variants[size_t(m.variant)];
  if (m.slots.size() != v.nodes.size()) return false;
  for (NodeId id : m.slots)
    if (!g.has_node(id)) return false;
  for (size_t i = 0; i < m.slots.size(); ++i) {
    for (size_t j = i + 1; j < m.slots.size(); ++j)
      if (m.slots[i] == m.slots[j]) return false;
    if (!v.nodes[i].eval(g.node(m.slots[i]))) return false;
  }
  for (const EdgeConstraint& e : v.edges)
    if (!edge_holds(g, e, m.slots[size_t(e.src_slot)], m.slots[size_t(e.dst_slot)]))
      return false;
  if (!rels_hold(g, v.rels, m.slots)) return false;
  for (const SubPattern& nac : p.nacs)
    if (nac_triggered(g, nac, m.slots)) return false;
  return !anchor_blocked(p, g, m.anchor(p));
}

}  // namespace

std::vector<Match> find_matches(const RulePattern& p, const AttributedGraph& g) {
  std::vector<Match> out;
  for (int vi = 0; vi < int(p.variants.size()); ++vi) {
    const SubPattern& v = p.variants[size_t(vi)];
    std::vector<NodeId> slots;
    enumerate(g, v, slots, 0, [&](const std::vector<NodeId>& assignment) {
      Match m{assignment, vi};
      bool blocked = anchor_blocked(p, g, m.anchor(p));
      for (const SubPattern& nac : p.nacs)
        if (!blocked && nac_triggered(g, nac, assignment)) blocked = true;
      if (!blocked) out.push_back(std::move(m));
      return false;  // keep enumerating
    });
  }
  std::sort(out.begin(), out.end(), [&](const Match& a, const Match& b) {
    if (a.anchor(p) != b.anchor(p)) return a.anchor(p) < b.anchor(p);
    if (a.slots != b.slots) return a.slots < b.slots;
    return a.variant < b.variant;
  });
  return out;
}

AttributedGraph apply(const RulePattern& p, AttributedGraph g, const Match& m) {
  if (!match_valid(p, g, m)) throw StaleMatchError("match no longer valid for rule " + p.code);
  NodeId anchor = m.anchor(p);
  NodeId fault = g.add_node(NodeKind::Fault, g.node(anchor).source_line);
  g.node(fault).set("code", AttrValue::of_text(p.code));
  g.node(fault).set("message", AttrValue::of_text(p.effect.message));
  g.add_edge(anchor, EdgeLabel::HasFault, fault);
  return g;
}

AttributedGraph run_to_fixpoint(AttributedGraph g, const std::vector<RulePattern>& rules,
                                const TraceFn& trace, FixpointStats* stats) {
  if (!conforms(g)) throw GraphError("host graph does not conform to the type graph");

  std::vector<const RulePattern*> order;
  order.reserve(rules.size());
  for (const RulePattern& r : rules) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](const RulePattern* a, const RulePattern* b) {
    if (a->priority != b->priority) return a->priority < b->priority;
    return a->id < b->id;
  });

  const std::int64_t cap = 10LL * std::max<size_t>(rules.size(), 1) *
                           std::max<size_t>(g.nodes().size(), 1);
  FixpointStats local;
  bool progressed = true;
  while (progressed) {
    progressed = false;
    ++local.rounds;
    for (const RulePattern* rule : order) {
      std::vector<Match> matches = find_matches(*rule, g);
      for (const Match& m : matches) {
        if (!match_valid(*rule, g, m)) continue;  // disabled by an earlier application
        g = apply(*rule, std::move(g), m);
        ++local.applications;
        progressed = true;
        if (trace) trace(rule->id, m.anchor(*rule), rule->code);
        if (local.applications > cap)
          throw IterationCapError("fixpoint application cap exceeded");
      }
    }
  }
  if (stats) *stats = local;
  return g;
}

}  // namespace dlint
