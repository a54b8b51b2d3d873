#ifndef DLINT_GRAPH_HPP
#define DLINT_GRAPH_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dlint/attr_value.hpp"

namespace dlint {

// Node vocabulary of the network meta-model. Fault nodes are only ever
// attached by rule application; everything else is produced by the frontend.
enum class NodeKind {
  Program,
  Architecture,
  InputLayer,
  Layer,
  Parameters,
  Learner,
  Loss,
  Optimizer,
  Metric,
  Hyperparameters,
  Data,
  Labels,
  Fault,
};

enum class EdgeLabel {
  HasArchitecture,
  HasLearner,
  HasData,
  StartsWith,
  Next,
  HasParams,
  HasLoss,
  HasOptimizer,
  HasMetric,
  HasHyperparams,
  HasLabels,
  EndsWith,
  HasFault,
};

const char* to_string(NodeKind k);
const char* to_string(EdgeLabel l);

// Allowed endpoint kinds per edge label. `Next` accepts two source kinds
// (InputLayer and Layer) and `HasFault` accepts any non-Fault source; all
// other labels are a single (src, dst) pair.
bool edge_typing_allows(NodeKind src, EdgeLabel label, NodeKind dst);

struct NodeId {
  int value = -1;
  bool operator==(const NodeId&) const = default;
  auto operator<=>(const NodeId&) const = default;
};

struct Node {
  NodeId id;
  NodeKind kind = NodeKind::Layer;
  AttrMap attrs;
  std::optional<int> source_line;

  const AttrValue* attr(const std::string& name) const;
  void set(const std::string& name, AttrValue v);
  // Convenience readers; return the fallback when the attribute is missing
  // or has a different type.
  std::string text_attr(const std::string& name, const std::string& fallback = "") const;
  std::int64_t int_attr(const std::string& name, std::int64_t fallback = 0) const;
  bool bool_attr(const std::string& name, bool fallback = false) const;
};

struct Edge {
  NodeId src;
  EdgeLabel label;
  NodeId dst;
  bool operator==(const Edge&) const = default;
  auto operator<=>(const Edge&) const = default;
};

// Host graph of one analyzed program. Plain value type: copying yields an
// independent graph; node ids are creation-ordered and never renumbered.
class AttributedGraph {
 public:
  NodeId add_node(NodeKind kind, std::optional<int> source_line = std::nullopt);
  // Throws GraphError when an endpoint does not exist.
  void add_edge(NodeId src, EdgeLabel label, NodeId dst);

  bool has_node(NodeId id) const { return id.value >= 0 && id.value < int(nodes_.size()); }
  const Node& node(NodeId id) const;
  Node& node(NodeId id);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }

  std::vector<NodeId> nodes_of_kind(NodeKind kind) const;
  std::optional<NodeId> first_of_kind(NodeKind kind) const;

  // Unique successor over `label`, if any.
  std::optional<NodeId> out_neighbor(NodeId src, EdgeLabel label) const;
  std::optional<NodeId> in_neighbor(NodeId dst, EdgeLabel label) const;
  std::vector<NodeId> out_neighbors(NodeId src, EdgeLabel label) const;
  std::vector<NodeId> in_neighbors(NodeId dst, EdgeLabel label) const;
  bool has_edge(NodeId src, EdgeLabel label, NodeId dst) const;

  bool operator==(const AttributedGraph& o) const;

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
};

AttributedGraph new_graph();

// Typing morphism check against the meta-model: node kinds, edge endpoint
// typing, the `next` simple-path invariant (in/out degree at most one, no
// cycles), and Fault-node attachment shape. Total: never throws.
bool conforms(const AttributedGraph& g);

// Nodes reachable from `from` via one or more `next` edges, in path order,
// truncated before the first node satisfying `stop`.
std::vector<NodeId> next_closure(const AttributedGraph& g, NodeId from,
                                 const std::function<bool(const Node&)>& stop);

// Deterministic textual dump: one node per line `id kind {attrs}` then one
// edge per line `src -label-> dst`, both sorted.
std::string debug_dump(const AttributedGraph& g);

// The graph with all Fault nodes and HasFault edges removed, ids preserved
// for the remaining nodes. Used by the frame-property checks.
AttributedGraph strip_faults(const AttributedGraph& g);

struct FaultRecord {
  NodeId fault;
  NodeId anchor;
  std::string code;
  std::string message;
};
std::vector<FaultRecord> fault_records(const AttributedGraph& g);

}  // namespace dlint

#endif
