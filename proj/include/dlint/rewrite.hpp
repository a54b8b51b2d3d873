#ifndef DLINT_REWRITE_HPP
#define DLINT_REWRITE_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dlint/graph.hpp"

namespace dlint {

enum class Cmp { Eq, Ne, Lt, Le, Gt, Ge, In, NotIn, Exists, Absent };

// Predicate over one node attribute. A missing attribute satisfies only
// Absent; unresolved source values therefore never fire a rule.
struct AttrTest {
  std::string attr;
  Cmp op = Cmp::Exists;
  std::optional<AttrValue> value;
  std::vector<AttrValue> set;

  static AttrTest eq(std::string a, AttrValue v);
  static AttrTest ne(std::string a, AttrValue v);
  static AttrTest lt(std::string a, AttrValue v);
  static AttrTest le(std::string a, AttrValue v);
  static AttrTest gt(std::string a, AttrValue v);
  static AttrTest ge(std::string a, AttrValue v);
  static AttrTest in(std::string a, std::vector<AttrValue> xs);
  static AttrTest not_in(std::string a, std::vector<AttrValue> xs);
  static AttrTest exists(std::string a);
  static AttrTest absent(std::string a);
  static AttrTest is_true(std::string a);
  static AttrTest is_false(std::string a);

  bool eval(const Node& n) const;
};

struct NodeConstraint {
  std::optional<NodeKind> kind;
  std::vector<AttrTest> tests;

  bool eval(const Node& n) const;
};

// Comparison between two attributes, possibly on the same slot.
struct RelTest {
  int a_slot = 0;
  std::string a_attr;
  Cmp op = Cmp::Eq;
  int b_slot = 0;
  std::string b_attr;
};

// Structural requirement between two slots. With `closure` set the pair must
// be connected by a `next` path of length >= 1 whose intermediate nodes all
// satisfy `through` (the negative-condition barrier of the encoding).
struct EdgeConstraint {
  EdgeLabel label = EdgeLabel::Next;
  int src_slot = 0;
  int dst_slot = 1;
  bool closure = false;
  std::optional<NodeConstraint> through;
};

// One LHS alternative, or the body of a negative application condition.
// For NACs, slots 0..context-1 refer to the already-matched LHS slots and
// `nodes` introduces the NAC-local slots after them.
struct SubPattern {
  std::vector<NodeConstraint> nodes;
  std::vector<EdgeConstraint> edges;
  std::vector<RelTest> rels;
  std::vector<std::pair<int, AttrTest>> context_tests;  // NAC use only
};

struct FaultSpec {
  std::string code;
  std::string message;
  int anchor_slot = 0;
};

// One verification rule as data: match any LHS variant, reject when a NAC
// extends the match, and on application attach a single Fault node to the
// anchor. Effects are purely additive. Every rule carries the implicit NAC
// "the anchor already has a fault with this code"; `fire_once` widens that
// to "any node already has a fault with this code".
struct RulePattern {
  int id = 0;
  std::string code;
  int priority = 2;
  bool fire_once = false;
  std::vector<SubPattern> variants;
  std::vector<SubPattern> nacs;
  FaultSpec effect;
};

struct Match {
  std::vector<NodeId> slots;
  int variant = 0;

  NodeId anchor(const RulePattern& p) const { return slots[size_t(p.effect.anchor_slot)]; }
};

// All injective assignments satisfying some LHS variant, minus those with a
// satisfiable NAC, ordered by ascending anchor id then slot ids.
std::vector<Match> find_matches(const RulePattern& p, const AttributedGraph& g);

// Adds the fault for `m`; throws StaleMatchError when the match no longer
// holds on `g`.
AttributedGraph apply(const RulePattern& p, AttributedGraph g, const Match& m);

using TraceFn = std::function<void(int rule_id, NodeId anchor, const std::string& code)>;

struct FixpointStats {
  std::int64_t applications = 0;
  int rounds = 0;
};

// Applies rules in (priority, rule id, anchor id) order until none matches.
// Terminates because effects are additive and self-disabling; the safety cap
// of 10 * |rules| * |nodes| applications only trips on an engine defect.
AttributedGraph run_to_fixpoint(AttributedGraph g, const std::vector<RulePattern>& rules,
                                const TraceFn& trace = nullptr,
                                FixpointStats* stats = nullptr);

}  // namespace dlint

#endif
