#include "dlint/rules.hpp"

#include <algorithm>
#include <cstdio>

#include "dlint/errors.hpp"

namespace dlint {

const char* to_string(Category c) {
  switch (c) {
    case Category::IPS: return "IPS";
    case Category::UT: return "UT";
    case Category::APIM: return "APIM";
    case Category::SI: return "SI";
  }
  return "?";
}

const char* to_string(Severity s) {
  return s == Severity::Error ? "error" : "warning";
}

namespace {

AttrValue T(const char* s) { return AttrValue::of_text(s); }
AttrValue I(std::int64_t n) { return AttrValue::of_int(n); }

NodeConstraint layer_where(std::vector<AttrTest> tests) {
  return NodeConstraint{NodeKind::Layer, std::move(tests)};
}

std::vector<RuleMeta> build_rule_table() {
  std::vector<RuleMeta> t;
  auto add = [&](int id, Category cat, Severity sev, const char* title, const char* principle,
                 const char* remediation) {
    char code[16];
    std::snprintf(code, sizeof code, "%s-%02d", to_string(cat), id);
    t.push_back(RuleMeta{id, code, cat, sev, title, principle, remediation});
  };

  add(1, Category::IPS, Severity::Error, "Asymmetric Units Initialization",
      "Weight initialization must be random to break the symmetry between units.",
      "Replace the constant kernel initializer with a random one such as glorot_uniform.");
  add(2, Category::IPS, Severity::Warning, "Null Biases Initialization",
      "Biases start best at zero so outputs are explained by the input features.",
      "Drop the custom bias initializer or set it to zeros.");
  add(3, Category::IPS, Severity::Error, "Non-Linear Activation Requirement",
      "Every learning layer needs a non-linear activation to model non-linear mappings.",
      "Add an activation such as relu to the layer or insert an Activation layer after it.");
  add(4, Category::IPS, Severity::Error, "Unnecessary Activation Removal",
      "Stacked activations on the same features restrict the usable output range.",
      "Keep a single activation per learning layer and remove the redundant ones.");
  add(5, Category::IPS, Severity::Error, "Class Probability Conversion",
      "Classification outputs need sigmoid (single unit) or softmax (multiple units) "
      "to turn logits into probabilities.",
      "End the network with sigmoid on one unit or softmax on several units.");
  add(6, Category::UT, Severity::Error, "Consecutive Layers Compatibility",
      "A layer must receive a tensor of exactly the rank it operates on.",
      "Insert a Flatten or Reshape layer so the input rank matches the layer.");
  add(7, Category::UT, Severity::Error, "Spatial Size Agreement",
      "Filtering and pooling windows must fit inside the incoming feature map.",
      "Shrink the window, use same padding, or enlarge the input feature map.");
  add(8, Category::UT, Severity::Error, "Reshaped Data Retention",
      "A reshape must keep the total number of elements per item unchanged.",
      "Pick a target shape whose product matches the incoming shape.");
  add(9, Category::UT, Severity::Error, "Separate Item Preservation",
      "A reshape must never move data across the batch dimension.",
      "Keep the first dimension symbolic (-1) and reshape only the item dimensions.");
  add(10, Category::APIM, Severity::Error, "Valid Loss Linkage",
      "The loss must match the output activation: probability losses expect the matching "
      "probability activation and logits losses expect raw outputs.",
      "Align the loss with the output activation, e.g. sigmoid with binary_crossentropy, "
      "softmax with categorical_crossentropy, no activation with a logits-based loss.");
  add(11, Category::APIM, Severity::Error, "Valid Optimizer Linkage",
      "An optimizer must exist and be connected to the loss being minimized.",
      "Create an optimizer and pass it to compile, or call minimize on the loss.");
  add(12, Category::APIM, Severity::Error, "Single Global Initialization",
      "Graph-mode programs must initialize all variables once before training.",
      "Run tf.global_variables_initializer() before the training loop.");
  add(13, Category::APIM, Severity::Error, "Zero Gradients Reset",
      "Accumulated gradients must be cleared between training iterations.",
      "Reset gradients at the top of each training step.");
  add(14, Category::APIM, Severity::Error, "Iterative Training Procedure",
      "Parameters must be updated iteratively by a training loop or a fit call.",
      "Call fit on the model, or run the train op inside a loop.");
  add(15, Category::SI, Severity::Warning, "Effective Neurons Suspension",
      "Dropout works on pooled feature maps; before max-pooling most masked units are "
      "discarded anyway.",
      "Move the dropout layer after the max-pooling layer.");
  add(16, Category::SI, Severity::Warning, "Useless Bias Removal",
      "Batch normalization adds its own shift, cancelling a preceding bias.",
      "Set use_bias=False on layers directly followed by batch normalization.");
  add(17, Category::SI, Severity::Warning, "Representative Statistics Estimation",
      "Batch normalization after dropout estimates statistics on masked activations.",
      "Place batch normalization before dropout.");
  add(18, Category::SI, Severity::Warning, "Pyramid-shaped Construction",
      "Feature-map area and hidden dense widths should shrink, not grow, with depth.",
      "Reorder or resize layers so sizes decrease towards the output.");
  add(19, Category::SI, Severity::Warning, "Maximum Pooling Domination",
      "Max-pooling captures spatial invariances better than average pooling or strided "
      "convolution.",
      "Down-sample with MaxPooling layers.");
  add(20, Category::SI, Severity::Warning, "Gradual Feature Expansion",
      "Filter counts should grow or stay level while the feature map shrinks.",
      "Increase filter counts with depth instead of decreasing them.");
  add(21, Category::SI, Severity::Warning, "Local Correlation Preservation",
      "Filtering windows should grow or stay level with depth, starting small.",
      "Start with small windows and keep later windows at least as large.");
  add(22, Category::SI, Severity::Warning, "Maximum Information Utilization",
      "Deep networks should not pool after every convolution; early feature maps carry "
      "the most information.",
      "Remove pooling layers until they are at most a third of the conv/pool stack.");
  add(23, Category::SI, Severity::Warning, "Strive for Symmetry and Homogeneity",
      "Deep networks benefit from blocks of 2-4 convolutions with identical filters and "
      "windows.",
      "Group convolutions into homogeneous blocks with shared filter count and window.");
  return t;
}

std::vector<RulePattern> build_catalog() {
  const std::vector<RuleMeta>& meta = rule_table();
  std::vector<RulePattern> rules;

  auto start = [&](int id, int priority) -> RulePattern& {
    const RuleMeta& m = meta[size_t(id - 1)];
    RulePattern r;
    r.id = id;
    r.code = m.code;
    r.priority = priority;
    r.effect = FaultSpec{m.code, "", 0};
    rules.push_back(std::move(r));
    return rules.back();
  };

  // ---- Tensor alignment (priority 1): consume shape_error annotations. ----
  const char* shape_codes[4] = {"rank_mismatch", "spatial_underflow", "reshape_data_loss",
                                "reshape_batch_altered"};
  const char* shape_msgs[4] = {
      "layer receives a tensor of the wrong rank",
      "filtering or pooling window exceeds the incoming feature map",
      "reshape changes the number of elements per data item",
      "reshape rewrites the batch dimension"};
  for (int i = 0; i < 4; ++i) {
    RulePattern& r = start(6 + i, 1);
    r.effect.message = shape_msgs[i];
    r.variants.push_back(SubPattern{
        {layer_where({AttrTest::eq("shape_error", T(shape_codes[i]))})}, {}, {}, {}});
  }

  // ---- Rule 1: constant kernel initializer on a learning layer. ----
  {
    RulePattern& r = start(1, 2);
    r.effect.message = "constant weight initialization keeps all units identical";
    r.variants.push_back(SubPattern{
        {layer_where({AttrTest::is_true("is_learning"),
                      AttrTest::in("kernel_initializer", {T("zeros"), T("ones"), T("constant")})})},
        {}, {}, {}});
  }

  // ---- Rule 2: explicit non-zero bias initializer. ----
  {
    RulePattern& r = start(2, 2);
    r.effect.message = "bias is initialized to a non-zero value";
    r.variants.push_back(SubPattern{
        {layer_where({AttrTest::is_true("is_learning"), AttrTest::is_true("use_bias"),
                      AttrTest::not_in("bias_initializer", {T("zeros")})})},
        {}, {}, {}});
  }

  // ---- Rule 3: learning layer with a purely linear output. The output
  // layer is exempt when the loss is a regression or a logits-based one;
  // both consume raw outputs. ----
  {
    RulePattern& r = start(3, 2);
    r.effect.message = "learning layer has no non-linear activation";
    r.variants.push_back(SubPattern{
        {layer_where({AttrTest::is_true("is_learning"),
                      AttrTest::is_false("effective_nonlinear")})},
        {}, {}, {}});
    SubPattern exempt;
    exempt.context_tests.push_back({0, AttrTest::is_true("is_output_learning")});
    exempt.nodes.push_back(NodeConstraint{
        NodeKind::Loss, {AttrTest::in("family", {T("regression"), T("logits")})}});
    r.nacs.push_back(std::move(exempt));
  }

  // ---- Rule 4: redundant consecutive activations after a learning layer,
  // with no other learning layer on the connecting path. ----
  {
    RulePattern& r = start(4, 2);
    r.effect.message = "consecutive activations are applied to the same features";
    NodeConstraint act = layer_where(
        {AttrTest::eq("layer_type", T("activation")), AttrTest::is_true("nonlinear")});
    NodeConstraint not_learning = layer_where({AttrTest::is_false("is_learning")});
    SubPattern two_acts;
    two_acts.nodes = {layer_where({AttrTest::is_true("is_learning")}), act, act};
    two_acts.edges.push_back(EdgeConstraint{EdgeLabel::Next, 0, 1, true, not_learning});
    two_acts.edges.push_back(EdgeConstraint{EdgeLabel::Next, 1, 2, false, std::nullopt});
    r.variants.push_back(std::move(two_acts));
    SubPattern inline_plus_act;
    inline_plus_act.nodes = {
        layer_where({AttrTest::is_true("is_learning"), AttrTest::is_true("nonlinear")}), act};
    inline_plus_act.edges.push_back(EdgeConstraint{EdgeLabel::Next, 0, 1, false, std::nullopt});
    r.variants.push_back(std::move(inline_plus_act));
  }

  // ---- Rule 5: missing or degenerate probability conversion. ----
  {
    RulePattern& r = start(5, 2);
    r.effect.message = "output does not yield usable class probabilities";
    SubPattern missing;
    missing.nodes = {
        layer_where({AttrTest::is_true("is_output_learning"),
                     AttrTest::not_in("final_activation", {T("sigmoid"), T("softmax")})}),
        NodeConstraint{NodeKind::Loss,
                       {AttrTest::in("family", {T("prob_binary"), T("prob_categorical")})}}};
    r.variants.push_back(std::move(missing));
    SubPattern single_unit_softmax;
    single_unit_softmax.nodes = {
        layer_where({AttrTest::is_true("is_output_learning"),
                     AttrTest::eq("final_activation", T("softmax")),
                     AttrTest::eq("final_units", I(1))})};
    r.variants.push_back(std::move(single_unit_softmax));
  }

  // ---- Rule 10: loss vs output-activation compatibility matrix. Probability
  // losses reject the opposite probability activation, logits losses reject
  // any activated output, regression and margin losses reject probability
  // activations. Missing conversions are Rule 5's concern. ----
  {
    RulePattern& r = start(10, 2);
    r.effect.message = "loss function is inconsistent with the output activation";
    auto entry = [&](const char* family, AttrTest act_test) {
      SubPattern v;
      v.nodes = {NodeConstraint{NodeKind::Loss, {AttrTest::eq("family", T(family))}},
                 layer_where({AttrTest::is_true("is_output_learning"), std::move(act_test)})};
      r.variants.push_back(std::move(v));
    };
    entry("prob_binary", AttrTest::eq("final_activation", T("softmax")));
    entry("prob_categorical", AttrTest::eq("final_activation", T("sigmoid")));
    entry("logits", AttrTest::ne("final_activation", T("none")));
    entry("regression", AttrTest::eq("final_activation", T("softmax")));
    entry("hinge", AttrTest::in("final_activation", {T("softmax"), T("sigmoid")}));
  }

  // ---- Rules 11-14: learner wiring flags set by the frontend. ----
  {
    RulePattern& r = start(11, 2);
    r.effect.message = "optimizer is missing or not connected to the loss";
    r.variants.push_back(SubPattern{
        {NodeConstraint{NodeKind::Learner, {AttrTest::is_false("optimizer_linked")}}},
        {}, {}, {}});
  }
  {
    RulePattern& r = start(12, 2);
    r.effect.message = "variables are never globally initialized";
    r.variants.push_back(SubPattern{
        {NodeConstraint{NodeKind::Learner,
                        {AttrTest::eq("dialect", T("tensorflow_v1")),
                         AttrTest::is_false("has_initializer")}}},
        {}, {}, {}});
  }
  {
    RulePattern& r = start(13, 2);
    r.effect.message = "gradients are not reset between training iterations";
    r.variants.push_back(SubPattern{
        {NodeConstraint{NodeKind::Learner, {AttrTest::is_false("grads_reset")}}},
        {}, {}, {}});
  }
  {
    RulePattern& r = start(14, 2);
    r.effect.message = "no iterative training step updates the parameters";
    r.variants.push_back(SubPattern{
        {NodeConstraint{NodeKind::Learner, {AttrTest::is_false("has_training_loop")}}},
        {}, {}, {}});
  }

  // ---- Rule 15: dropout directly before max-pooling. ----
  {
    RulePattern& r = start(15, 3);
    r.effect.message = "dropout before max-pooling has little effect";
    SubPattern v;
    v.nodes = {layer_where({AttrTest::eq("layer_type", T("dropout"))}),
               layer_where({AttrTest::eq("layer_type", T("maxpool2d"))})};
    v.edges.push_back(EdgeConstraint{EdgeLabel::Next, 0, 1, false, std::nullopt});
    r.variants.push_back(std::move(v));
  }

  // ---- Rule 16: biased layer feeding batchnorm (activations transparent). ----
  {
    RulePattern& r = start(16, 3);
    r.effect.message = "bias is redundant under the following batch normalization";
    SubPattern v;
    v.nodes = {layer_where({AttrTest::is_true("is_learning"), AttrTest::is_true("use_bias")}),
               layer_where({AttrTest::eq("layer_type", T("batchnorm"))})};
    v.edges.push_back(EdgeConstraint{
        EdgeLabel::Next, 0, 1, true,
        layer_where({AttrTest::eq("layer_type", T("activation"))})});
    r.variants.push_back(std::move(v));
  }

  // ---- Rule 17: dropout directly before batchnorm. ----
  {
    RulePattern& r = start(17, 3);
    r.effect.message = "batch normalization after dropout sees distorted statistics";
    SubPattern v;
    v.nodes = {layer_where({AttrTest::eq("layer_type", T("dropout"))}),
               layer_where({AttrTest::eq("layer_type", T("batchnorm"))})};
    v.edges.push_back(EdgeConstraint{EdgeLabel::Next, 0, 1, false, std::nullopt});
    r.variants.push_back(std::move(v));
  }

  // ---- Rules 18/20/21: monotone progressions over adjacent comparable
  // layers; the fault lands once, on the first layer of the first offending
  // pair. ----
  {
    RulePattern& r = start(18, 3);
    r.fire_once = true;
    r.effect.message = "layer sizes grow with depth instead of shrinking";
    SubPattern area;
    area.nodes = {layer_where({})};
    area.rels.push_back(RelTest{0, "next_spatial_area", Cmp::Gt, 0, "out_area"});
    r.variants.push_back(std::move(area));
    SubPattern width;
    width.nodes = {layer_where({})};
    width.rels.push_back(RelTest{0, "next_hidden_width", Cmp::Gt, 0, "hidden_width"});
    r.variants.push_back(std::move(width));
  }
  {
    RulePattern& r = start(19, 3);
    r.effect.message = "down-sampling does not use max-pooling";
    r.variants.push_back(SubPattern{
        {layer_where({AttrTest::eq("layer_type", T("avgpool2d"))})}, {}, {}, {}});
    r.variants.push_back(SubPattern{
        {layer_where({AttrTest::in("layer_type", {T("conv1d"), T("conv2d")}),
                      AttrTest::is_true("downsampling_stride")})},
        {}, {}, {}});
  }
  {
    RulePattern& r = start(20, 3);
    r.fire_once = true;
    r.effect.message = "convolution filter count decreases with depth";
    SubPattern v;
    v.nodes = {layer_where({})};
    v.rels.push_back(RelTest{0, "next_conv_filters", Cmp::Lt, 0, "filters"});
    r.variants.push_back(std::move(v));
  }
  {
    RulePattern& r = start(21, 3);
    r.fire_once = true;
    r.effect.message = "convolution window shrinks with depth";
    SubPattern v;
    v.nodes = {layer_where({})};
    v.rels.push_back(RelTest{0, "next_conv_kernel_area", Cmp::Lt, 0, "kernel_area"});
    r.variants.push_back(std::move(v));
  }

  // ---- Rule 22: deep stack with too much pooling (pool fraction > 1/3 of
  // the conv+pool layers, depth threshold 10). ----
  {
    RulePattern& r = start(22, 3);
    r.effect.message = "pooling layers exceed a third of the conv/pool stack";
    SubPattern v;
    v.nodes = {NodeConstraint{NodeKind::Architecture, {AttrTest::ge("cnn_depth", I(10))}}};
    v.rels.push_back(RelTest{0, "pool_x3", Cmp::Gt, 0, "cnn_depth"});
    r.variants.push_back(std::move(v));
  }

  // ---- Rule 23: deep stack without any homogeneous convolution block. ----
  {
    RulePattern& r = start(23, 3);
    r.effect.message = "no homogeneous convolution blocks in a deep network";
    r.variants.push_back(SubPattern{
        {NodeConstraint{NodeKind::Architecture,
                        {AttrTest::ge("cnn_depth", I(10)), AttrTest::ge("conv_count", I(2)),
                         AttrTest::is_false("has_homog_block")}}},
        {}, {}, {}});
  }

  std::sort(rules.begin(), rules.end(),
            [](const RulePattern& a, const RulePattern& b) { return a.id < b.id; });
  return rules;
}

}  // namespace

const std::vector<RuleMeta>& rule_table() {
  static const std::vector<RuleMeta> table = build_rule_table();
  return table;
}

const RuleMeta& rule_doc(int id) {
  const auto& t = rule_table();
  if (id < 1 || id > int(t.size())) throw UnknownRuleError("unknown rule id " + std::to_string(id));
  return t[size_t(id - 1)];
}

const RuleMeta* rule_by_code(const std::string& code) {
  for (const RuleMeta& m : rule_table())
    if (m.code == code) return &m;
  return nullptr;
}

const std::vector<RulePattern>& catalog() {
  static const std::vector<RulePattern> rules = build_catalog();
  return rules;
}

}  // namespace dlint
