#include "dlint/graph.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <set>
#include <sstream>

#include "dlint/errors.hpp"

namespace dlint {

std::string AttrValue::to_string() const {
  if (is_int()) return std::to_string(as_int());
  if (is_bool()) return as_bool() ? "true" : "false";
  if (is_text()) return "\"" + as_text() + "\"";
  if (is_float()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", as_float());
    return buf;
  }
  std::string out = "[";
  const auto& xs = as_ints();
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(xs[i]);
  }
  return out + "]";
}

const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Program: return "Program";
    case NodeKind::Architecture: return "Architecture";
    case NodeKind::InputLayer: return "InputLayer";
    case NodeKind::Layer: return "Layer";
    case NodeKind::Parameters: return "Parameters";
    case NodeKind::Learner: return "Learner";
    case NodeKind::Loss: return "Loss";
    case NodeKind::Optimizer: return "Optimizer";
    case NodeKind::Metric: return "Metric";
    case NodeKind::Hyperparameters: return "Hyperparameters";
    case NodeKind::Data: return "Data";
    case NodeKind::Labels: return "Labels";
    case NodeKind::Fault: return "Fault";
  }
  return "?";
}

const char* to_string(EdgeLabel l) {
  switch (l) {
    case EdgeLabel::HasArchitecture: return "has_architecture";
    case EdgeLabel::HasLearner: return "has_learner";
    case EdgeLabel::HasData: return "has_data";
    case EdgeLabel::StartsWith: return "starts_with";
    case EdgeLabel::Next: return "next";
    case EdgeLabel::HasParams: return "has_params";
    case EdgeLabel::HasLoss: return "has_loss";
    case EdgeLabel::HasOptimizer: return "has_optimizer";
    case EdgeLabel::HasMetric: return "has_metric";
    case EdgeLabel::HasHyperparams: return "has_hyperparams";
    case EdgeLabel::HasLabels: return "has_labels";
    case EdgeLabel::EndsWith: return "ends_with";
    case EdgeLabel::HasFault: return "has_fault";
  }
  return "?";
}

bool edge_typing_allows(NodeKind src, EdgeLabel label, NodeKind dst) {
  switch (label) {
    case EdgeLabel::HasArchitecture:
      return src == NodeKind::Program && dst == NodeKind::Architecture;
    case EdgeLabel::HasLearner:
      return src == NodeKind::Program && dst == NodeKind::Learner;
    case EdgeLabel::HasData:
      return src == NodeKind::Program && dst == NodeKind::Data;
    case EdgeLabel::StartsWith:
      return src == NodeKind::Architecture && dst == NodeKind::InputLayer;
    case EdgeLabel::Next:
      return (src == NodeKind::InputLayer || src == NodeKind::Layer) &&
             dst == NodeKind::Layer;
    case EdgeLabel::HasParams:
      return src == NodeKind::Layer && dst == NodeKind::Parameters;
    case EdgeLabel::HasLoss:
      return src == NodeKind::Learner && dst == NodeKind::Loss;
    case EdgeLabel::HasOptimizer:
      return src == NodeKind::Learner && dst == NodeKind::Optimizer;
    case EdgeLabel::HasMetric:
      return src == NodeKind::Learner && dst == NodeKind::Metric;
    case EdgeLabel::HasHyperparams:
      return src == NodeKind::Learner && dst == NodeKind::Hyperparameters;
    case EdgeLabel::HasLabels:
      return src == NodeKind::Data && dst == NodeKind::Labels;
    case EdgeLabel::EndsWith:
      return src == NodeKind::Architecture && dst == NodeKind::Labels;
    case EdgeLabel::HasFault:
      return src != NodeKind::Fault && dst == NodeKind::Fault;
  }
  return false;
}

const AttrValue* Node::attr(const std::string& name) const {
  auto it = attrs.find(name);
  return it == attrs.end() ? nullptr : &it->second;
}

void Node::set(const std::string& name, AttrValue v) {
  attrs.insert_or_assign(name, std::move(v));
}

std::string Node::text_attr(const std::string& name, const std::string& fallback) const {
  const AttrValue* v = attr(name);
  return v && v->is_text() ? v->as_text() : fallback;
}

std::int64_t Node::int_attr(const std::string& name, std::int64_t fallback) const {
  const AttrValue* v = attr(name);
  return v && v->is_int() ? v->as_int() : fallback;
}

bool Node::bool_attr(const std::string& name, bool fallback) const {
  const AttrValue* v = attr(name);
  return v && v->is_bool() ? v->as_bool() : fallback;
}

NodeId AttributedGraph::add_node(NodeKind kind, std::optional<int> source_line) {
  Node n;
  n.id = NodeId{int(nodes_.size())};
  n.kind = kind;
  n.source_line = source_line;
  nodes_.push_back(std::move(n));
  return nodes_.back().id;
}

void AttributedGraph::add_edge(NodeId src, EdgeLabel label, NodeId dst) {
  if (!has_node(src) || !has_node(dst))
    throw GraphError("edge endpoint does not exist");
  edges_.push_back(Edge{src, label, dst});
}

const Node& AttributedGraph::node(NodeId id) const {
  if (!has_node(id)) throw GraphError("unknown node id");
  return nodes_[size_t(id.value)];
}

Node& AttributedGraph::node(NodeId id) {
  if (!has_node(id)) throw GraphError("unknown node id");
  return nodes_[size_t(id.value)];
}

std::vector<NodeId> AttributedGraph::nodes_of_kind(NodeKind kind) const {
  std::vector<NodeId> out;
  for (const Node& n : nodes_)
    if (n.kind == kind) out.push_back(n.id);
  return out;
}

std::optional<NodeId> AttributedGraph::first_of_kind(NodeKind kind) const {
  for (const Node& n : nodes_)
    if (n.kind == kind) return n.id;
  return std::nullopt;
}

std::optional<NodeId> AttributedGraph::out_neighbor(NodeId src, EdgeLabel label) const {
  for (const Edge& e : edges_)
    if (e.src == src && e.label == label) return e.dst;
  return std::nullopt;
}

std::optional<NodeId> AttributedGraph::in_neighbor(NodeId dst, EdgeLabel label) const {
  for (const Edge& e : edges_)
    if (e.dst == dst && e.label == label) return e.src;
  return std::nullopt;
}

std::vector<NodeId> AttributedGraph::out_neighbors(NodeId src, EdgeLabel label) const {
  std::vector<NodeId> out;
  for (const Edge& e : edges_)
    if (e.src == src && e.label == label) out.push_back(e.dst);
  return out;
}

std::vector<NodeId> AttributedGraph::in_neighbors(NodeId dst, EdgeLabel label) const {
  std::vector<NodeId> out;
  for (const Edge& e : edges_)
    if (e.dst == dst && e.label == label) out.push_back(e.src);
  return out;
}

bool AttributedGraph::has_edge(NodeId src, EdgeLabel label, NodeId dst) const {
  for (const Edge& e : edges_)
    if (e.src == src && e.label == label && e.dst == dst) return true;
  return false;
}

bool AttributedGraph::operator==(const AttributedGraph& o) const {
  if (nodes_.size() != o.nodes_.size() || edges_.size() != o.edges_.size())
    return false;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const Node& a = nodes_[i];
    const Node& b = o.nodes_[i];
    if (a.id != b.id || a.kind != b.kind || a.attrs != b.attrs ||
        a.source_line != b.source_line)
      return false;
  }
  std::vector<Edge> ea = edges_, eb = o.edges_;
  std::sort(ea.begin(), ea.end());
  std::sort(eb.begin(), eb.end());
  return ea == eb;
}

AttributedGraph new_graph() { return AttributedGraph{}; }

bool conforms(const AttributedGraph& g) {
  std::vector<int> next_out(g.nodes().size(), 0), next_in(g.nodes().size(), 0);
  std::vector<int> fault_in(g.nodes().size(), 0);

  for (const Edge& e : g.edges()) {
    if (!g.has_node(e.src) || !g.has_node(e.dst)) return false;
    NodeKind sk = g.node(e.src).kind;
    NodeKind dk = g.node(e.dst).kind;
    if (!edge_typing_allows(sk, e.label, dk)) return false;
    if (e.label == EdgeLabel::Next) {
      ++next_out[size_t(e.src.value)];
      ++next_in[size_t(e.dst.value)];
    }
    if (e.label == EdgeLabel::HasFault) ++fault_in[size_t(e.dst.value)];
  }

  for (const Node& n : g.nodes()) {
    size_t i = size_t(n.id.value);
    if (next_out[i] > 1 || next_in[i] > 1) return false;
    if (n.kind == NodeKind::Fault) {
      if (fault_in[i] != 1) return false;
      const AttrValue* code = n.attr("code");
      const AttrValue* msg = n.attr("message");
      if (!code || !code->is_text() || !msg || !msg->is_text()) return false;
    } else if (fault_in[i] != 0) {
      return false;
    }
  }

  // The next relation must be a set of simple paths, so a walk from any node
  // never revisits one.
  for (const Node& n : g.nodes()) {
    if (next_in[size_t(n.id.value)] == 0 && next_out[size_t(n.id.value)] == 1) {
      std::set<int> seen{n.id.value};
      std::optional<NodeId> cur = g.out_neighbor(n.id, EdgeLabel::Next);
      while (cur) {
        if (!seen.insert(cur->value).second) return false;
        cur = g.out_neighbor(*cur, EdgeLabel::Next);
      }
    }
  }
  // A cycle with no entry point has every node at in-degree 1; detect it by
  // checking that all next-edges are covered by the path walks above.
  size_t on_paths = 0, next_edges = 0;
  for (const Node& n : g.nodes()) {
    if (next_in[size_t(n.id.value)] == 0) {
      std::optional<NodeId> cur = n.id;
      std::set<int> seen;
      while (cur && seen.insert(cur->value).second) {
        std::optional<NodeId> nx = g.out_neighbor(*cur, EdgeLabel::Next);
        if (nx) ++on_paths;
        cur = nx;
      }
    }
  }
  for (const Edge& e : g.edges())
    if (e.label == EdgeLabel::Next) ++next_edges;
  if (on_paths != next_edges) return false;

  return true;
}

std::vector<NodeId> next_closure(const AttributedGraph& g, NodeId from,
                                 const std::function<bool(const Node&)>& stop) {
  std::vector<NodeId> out;
  if (!g.has_node(from)) return out;
  std::set<int> seen{from.value};
  std::optional<NodeId> cur = g.out_neighbor(from, EdgeLabel::Next);
  while (cur && seen.insert(cur->value).second) {
    const Node& n = g.node(*cur);
    if (stop && stop(n)) break;
    out.push_back(*cur);
    cur = g.out_neighbor(*cur, EdgeLabel::Next);
  }
  return out;
}

std::string debug_dump(const AttributedGraph& g) {
  std::ostringstream os;
  for (const Node& n : g.nodes()) {
    os << n.id.value << " " << to_string(n.kind);
    if (n.source_line) os << " @" << *n.source_line;
    os << " {";
    bool first = true;
    for (const auto& [k, v] : n.attrs) {
      if (!first) os << ", ";
      first = false;
      os << k << "=" << v.to_string();
    }
    os << "}\n";
  }
  std::vector<Edge> es = g.edges();
  std::sort(es.begin(), es.end());
  for (const Edge& e : es)
    os << e.src.value << " -" << to_string(e.label) << "-> " << e.dst.value << "\n";
  return os.str();
}

AttributedGraph strip_faults(const AttributedGraph& g) {
  AttributedGraph out;
  // Fault nodes are always appended after the program structure, so dropping
  // them keeps the remaining ids dense and unchanged.
  for (const Node& n : g.nodes()) {
    if (n.kind == NodeKind::Fault) continue;
    if (n.id.value != int(out.nodes().size()))
      throw GraphError("fault nodes must trail the program nodes");
    NodeId id = out.add_node(n.kind, n.source_line);
    out.node(id).attrs = n.attrs;
  }
  for (const Edge& e : g.edges()) {
    if (e.label == EdgeLabel::HasFault) continue;
    out.add_edge(e.src, e.label, e.dst);
  }
  return out;
}

std::vector<FaultRecord> fault_records(const AttributedGraph& g) {
  std::vector<FaultRecord> out;
  for (const Node& n : g.nodes()) {
    if (n.kind != NodeKind::Fault) continue;
    FaultRecord r;
    r.fault = n.id;
    r.code = n.text_attr("code");
    r.message = n.text_attr("message");
    if (auto src = g.in_neighbor(n.id, EdgeLabel::HasFault)) r.anchor = *src;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace dlint
