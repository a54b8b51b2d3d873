#include <optional>

#include "dlint/rules.hpp"
#include "dlint/shape.hpp"

namespace dlint {

namespace {

bool is_learning_type(const std::string& t) {
  return t == "dense" || t == "conv1d" || t == "conv2d" || t == "conv3d";
}

bool is_conv_type(const std::string& t) {
  return t == "conv1d" || t == "conv2d" || t == "conv3d";
}

bool is_pool_type(const std::string& t) {
  return t == "maxpool2d" || t == "avgpool2d";
}

bool nonlinear_name(const std::string& a) { return a != "none" && a != "linear"; }

std::vector<NodeId> chain_layers(const AttributedGraph& g) {
  std::vector<NodeId> out;
  auto input = g.first_of_kind(NodeKind::InputLayer);
  if (!input) return out;
  return next_closure(g, *input, nullptr);
}

std::optional<std::int64_t> known_area(const Node& layer) {
  auto out = shape_attr(layer, "out_shape");
  if (!out || out->rank() != 4) return std::nullopt;
  size_t h = 1, w = 2;
  if (layer.text_attr("data_format") == "channels_first") {
    h = 2;
    w = 3;
  }
  if (!out->dims[h].is_known() || !out->dims[w].is_known()) return std::nullopt;
  return out->dims[h].extent * out->dims[w].extent;
}

// The activation effectively applied to a learning layer's output, scanning
// trailing Activation layers up to `stop_at_learning`. Unresolvable source
// values leave the result empty so rules stay quiet.
struct EffectiveActivation {
  bool determinate = false;
  std::string name;  // "none" for a purely linear output
};

EffectiveActivation effective_activation(const AttributedGraph& g,
                                         const std::vector<NodeId>& layers, size_t idx,
                                         bool stop_at_learning) {
  EffectiveActivation res;
  const Node& layer = g.node(layers[idx]);
  const AttrValue* inline_act = layer.attr("activation");
  if (!inline_act || !inline_act->is_text()) return res;
  std::string eff = inline_act->as_text();
  if (eff == "linear") eff = "none";
  for (size_t j = idx + 1; j < layers.size(); ++j) {
    const Node& n = g.node(layers[j]);
    const std::string t = n.text_attr("layer_type", "unknown");
    if (stop_at_learning && is_learning_type(t)) break;
    if (t != "activation") continue;
    const AttrValue* fn = n.attr("activation");
    if (!fn || !fn->is_text()) return res;  // indeterminate
    if (nonlinear_name(fn->as_text())) eff = fn->as_text();
  }
  res.determinate = true;
  res.name = eff;
  return res;
}

}  // namespace

AttributedGraph annotate_structure(AttributedGraph g) {
  std::vector<NodeId> layers = chain_layers(g);

  std::int64_t output_learning = -1;
  for (size_t i = 0; i < layers.size(); ++i) {
    Node& n = g.node(layers[i]);
    const std::string t = n.text_attr("layer_type", "unknown");
    n.set("pos", AttrValue::of_int(std::int64_t(i)));
    n.set("is_learning", AttrValue::of_bool(is_learning_type(t)));
    n.set("is_last", AttrValue::of_bool(i + 1 == layers.size()));
    if (is_learning_type(t)) output_learning = std::int64_t(i);
  }

  for (size_t i = 0; i < layers.size(); ++i) {
    Node& n = g.node(layers[i]);
    bool is_out = std::int64_t(i) == output_learning;
    if (n.bool_attr("is_learning")) n.set("is_output_learning", AttrValue::of_bool(is_out));
  }

  // Effective activations: per learning layer for the non-linearity check,
  // and for the output layer the final transform the network applies.
  for (size_t i = 0; i < layers.size(); ++i) {
    Node& n = g.node(layers[i]);
    if (!n.bool_attr("is_learning")) continue;
    EffectiveActivation eff = effective_activation(g, layers, i, /*stop_at_learning=*/true);
    if (eff.determinate)
      n.set("effective_nonlinear", AttrValue::of_bool(nonlinear_name(eff.name)));
  }
  if (output_learning >= 0) {
    size_t idx = size_t(output_learning);
    EffectiveActivation fin = effective_activation(g, layers, idx, /*stop_at_learning=*/false);
    Node& out = g.node(layers[idx]);
    if (fin.determinate) out.set("final_activation", AttrValue::of_text(fin.name));
    if (out.text_attr("layer_type") == "dense")
      if (const AttrValue* u = out.attr("units"); u && u->is_int())
        out.set("final_units", AttrValue::of_int(u->as_int()));
  }

  // Convolution subsequence: window areas and look-ahead values for the
  // filter/window progression rules.
  std::vector<size_t> convs;
  for (size_t i = 0; i < layers.size(); ++i) {
    Node& n = g.node(layers[i]);
    if (!is_conv_type(n.text_attr("layer_type"))) continue;
    convs.push_back(i);
    if (const AttrValue* k = n.attr("kernel"); k && k->is_ints() && !k->as_ints().empty()) {
      std::int64_t area = 1;
      for (std::int64_t x : k->as_ints()) area *= x;
      if (area >= 1) n.set("kernel_area", AttrValue::of_int(area));
    }
    if (const AttrValue* s = n.attr("strides"); s && s->is_ints()) {
      bool strided = false;
      for (std::int64_t x : s->as_ints()) strided = strided || x > 1;
      n.set("downsampling_stride", AttrValue::of_bool(strided));
    }
  }
  for (size_t c = 0; c + 1 < convs.size(); ++c) {
    Node& a = g.node(layers[convs[c]]);
    const Node& b = g.node(layers[convs[c + 1]]);
    const AttrValue* fa = a.attr("filters");
    const AttrValue* fb = b.attr("filters");
    if (fa && fa->is_int() && fb && fb->is_int())
      a.set("next_conv_filters", AttrValue::of_int(fb->as_int()));
    const AttrValue* ka = a.attr("kernel_area");
    const AttrValue* kb = b.attr("kernel_area");
    if (ka && kb) a.set("next_conv_kernel_area", AttrValue::of_int(kb->as_int()));
  }

  // Spatial subsequence (conv + pool feature maps) for the pyramid rule.
  std::vector<size_t> spatial;
  for (size_t i = 0; i < layers.size(); ++i) {
    Node& n = g.node(layers[i]);
    const std::string t = n.text_attr("layer_type");
    if (!is_conv_type(t) && !is_pool_type(t)) continue;
    spatial.push_back(i);
    if (auto area = known_area(n)) n.set("out_area", AttrValue::of_int(*area));
  }
  for (size_t c = 0; c + 1 < spatial.size(); ++c) {
    Node& a = g.node(layers[spatial[c]]);
    const Node& b = g.node(layers[spatial[c + 1]]);
    const AttrValue* aa = a.attr("out_area");
    const AttrValue* ab = b.attr("out_area");
    if (aa && ab) a.set("next_spatial_area", AttrValue::of_int(ab->as_int()));
  }

  // Hidden dense widths (output layer exempt).
  std::vector<size_t> hidden;
  for (size_t i = 0; i < layers.size(); ++i) {
    Node& n = g.node(layers[i]);
    if (n.text_attr("layer_type") != "dense") continue;
    if (std::int64_t(i) == output_learning) continue;
    if (const AttrValue* u = n.attr("units"); u && u->is_int()) {
      hidden.push_back(i);
      n.set("hidden_width", AttrValue::of_int(u->as_int()));
    }
  }
  for (size_t c = 0; c + 1 < hidden.size(); ++c) {
    Node& a = g.node(layers[hidden[c]]);
    const Node& b = g.node(layers[hidden[c + 1]]);
    a.set("next_hidden_width", AttrValue::of_int(b.int_attr("hidden_width")));
  }

  // Architecture-level counts and homogeneity.
  if (auto arch = g.first_of_kind(NodeKind::Architecture)) {
    std::int64_t conv_count = 0, pool_count = 0;
    for (NodeId id : layers) {
      const std::string t = g.node(id).text_attr("layer_type");
      if (is_conv_type(t)) ++conv_count;
      if (is_pool_type(t)) ++pool_count;
    }
    Node& a = g.node(*arch);
    a.set("conv_count", AttrValue::of_int(conv_count));
    a.set("pool_count", AttrValue::of_int(pool_count));
    a.set("cnn_depth", AttrValue::of_int(conv_count + pool_count));
    a.set("pool_x3", AttrValue::of_int(3 * pool_count));

    // A homogeneous block is a pair of convs with identical filters and
    // window, separated only by per-pixel layers (activation, batchnorm,
    // dropout). Unknown parameters make the property indeterminate rather
    // than false.
    bool found = false, indeterminate = false;
    std::optional<NodeId> prev_conv;
    for (NodeId id : layers) {
      const Node& n = g.node(id);
      const std::string t = n.text_attr("layer_type");
      if (t == "activation" || t == "batchnorm" || t == "dropout") continue;
      if (!is_conv_type(t)) {
        prev_conv.reset();
        continue;
      }
      if (prev_conv) {
        const Node& p = g.node(*prev_conv);
        const AttrValue* fa = p.attr("filters");
        const AttrValue* fb = n.attr("filters");
        const AttrValue* ka = p.attr("kernel");
        const AttrValue* kb = n.attr("kernel");
        if (fa && fb && ka && kb) {
          if (*fa == *fb && *ka == *kb) found = true;
        } else {
          indeterminate = true;
        }
      }
      prev_conv = id;
    }
    if (found)
      a.set("has_homog_block", AttrValue::of_bool(true));
    else if (!indeterminate)
      a.set("has_homog_block", AttrValue::of_bool(false));
  }

  // Loss family drives the activation-compatibility rules.
  for (NodeId id : g.nodes_of_kind(NodeKind::Loss)) {
    Node& loss = g.node(id);
    if (loss.bool_attr("logits_based") || loss.bool_attr("from_logits")) {
      loss.set("family", AttrValue::of_text("logits"));
      continue;
    }
    const std::string name = loss.text_attr("name");
    if (name.empty()) continue;
    std::string family;
    if (name == "binary_crossentropy")
      family = "prob_binary";
    else if (name == "categorical_crossentropy" || name == "sparse_categorical_crossentropy")
      family = "prob_categorical";
    else if (name == "mse" || name == "mae" || name == "msle" || name == "huber")
      family = "regression";
    else if (name == "hinge" || name == "squared_hinge" || name == "categorical_hinge")
      family = "hinge";
    else
      family = "other";
    loss.set("family", AttrValue::of_text(family));
  }

  return g;
}

}  // namespace dlint
