#ifndef DLINT_FRONTEND_HPP
#define DLINT_FRONTEND_HPP

#include <string>
#include <vector>

#include "dlint/graph.hpp"
#include "dlint/script.hpp"

namespace dlint {

// Normalized description of one layer call: the layer kind plus its graph
// attributes, defaults filled from the library's documented defaults (see
// layer_defaults.hpp). Unresolvable arguments leave their attribute unset.
struct LayerNodeSpec {
  std::string layer_type = "unknown";
  AttrMap attrs;
};

// Maps a supported layer call to its LayerNodeSpec; anything outside the
// supported table comes back as layer_type "unknown" rather than an error.
LayerNodeSpec recognize_layer(const ApiCall& call, const BindingTable& bindings);

struct ExtractOptions {
  Dialect dialect = Dialect::Auto;
  int max_unroll = 64;
};

struct ExtractResult {
  AttributedGraph graph;
  std::vector<std::string> notes;  // non-fatal analysis remarks
};

// Builds the attributed graph for one script: Program, Architecture, the
// InputLayer + Layer chain in call order, and the Learner with its Loss,
// Optimizer, Metric and Hyperparameters parts. Shapes are not propagated
// here. Throws NoModelFound when no model constructs are recognized and
// UnsupportedTopology for non-sequential wiring.
ExtractResult extract_graph(const ScriptSource& src, const ExtractOptions& opts = {});

// Dialect actually used for a parsed script (resolves Auto).
Dialect detect_dialect(const ParseResult& parsed, Dialect requested);

}  // namespace dlint

#endif
