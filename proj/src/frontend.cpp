#include "dlint/frontend.hpp"

#include <algorithm>
#include <optional>
#include <set>

#include "dlint/errors.hpp"
#include "dlint/layer_defaults.hpp"
#include "dlint/shape.hpp"

namespace dlint {

namespace {

// ---------------------------------------------------------------------------
// Path normalization and lookup tables
// ---------------------------------------------------------------------------

bool starts_with(const std::string& s, const std::string& p) {
  return s.size() >= p.size() && s.compare(0, p.size(), p) == 0;
}

bool ends_with(const std::string& s, const std::string& p) {
  return s.size() >= p.size() && s.compare(s.size() - p.size(), p.size(), p) == 0;
}

std::string lower(std::string s) {
  for (char& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string replace_prefix(std::string s, const std::string& from, const std::string& to) {
  if (starts_with(s, from)) return to + s.substr(from.size());
  return s;
}

std::string normalize_path(std::string p) {
  p = replace_prefix(std::move(p), "tf.", "tensorflow.");
  p = replace_prefix(std::move(p), "tensorflow.compat.v1.", "tensorflow.");
  p = replace_prefix(std::move(p), "tensorflow.keras.", "keras.");
  p = replace_prefix(std::move(p), "tensorflow.contrib.keras.", "keras.");
  return p;
}

std::string last_segment(const std::string& path) {
  size_t dot = path.rfind('.');
  return dot == std::string::npos ? path : path.substr(dot + 1);
}

bool is_sequential_ctor(const std::string& p) {
  return p == "keras.models.Sequential" || p == "keras.Sequential" ||
         p == "Sequential" || p == "models.Sequential";
}

bool is_functional_model_ctor(const std::string& p) {
  return p == "keras.Model" || p == "keras.models.Model" || p == "Model" ||
         p == "keras.Input" || p == "keras.layers.Input" || p == "Input";
}

// Keras layer constructors reachable through `keras.layers`.
const char* keras_layer_kind(const std::string& name) {
  if (name == "Dense") return "dense";
  if (name == "Conv1D" || name == "Convolution1D") return "conv1d";
  if (name == "Conv2D" || name == "Convolution2D") return "conv2d";
  if (name == "Conv3D" || name == "Convolution3D") return "conv3d";
  if (name == "MaxPooling2D" || name == "MaxPool2D") return "maxpool2d";
  if (name == "AveragePooling2D" || name == "AvgPool2D") return "avgpool2d";
  if (name == "Flatten") return "flatten";
  if (name == "Reshape") return "reshape";
  if (name == "Dropout") return "dropout";
  if (name == "BatchNormalization") return "batchnorm";
  if (name == "Activation") return "activation";
  if (name == "InputLayer") return "inputlayer";
  return nullptr;
}

std::optional<std::string> keras_layer_path_kind(const std::string& p) {
  if (starts_with(p, "keras.layers.")) {
    if (const char* k = keras_layer_kind(last_segment(p))) return std::string(k);
    return std::string("unknown");  // something under keras.layers we do not model
  }
  return std::nullopt;
}

// tf-v1 layer-producing ops: kind plus the number of leading tensor inputs.
struct TfLayerEntry {
  const char* kind;
  int input_args;
};

std::optional<TfLayerEntry> tf_layer_entry(const std::string& p) {
  if (p == "tensorflow.layers.conv2d") return TfLayerEntry{"conv2d", 1};
  if (p == "tensorflow.layers.conv1d") return TfLayerEntry{"conv1d", 1};
  if (p == "tensorflow.layers.dense") return TfLayerEntry{"dense", 1};
  if (p == "tensorflow.layers.max_pooling2d") return TfLayerEntry{"maxpool2d", 1};
  if (p == "tensorflow.layers.average_pooling2d") return TfLayerEntry{"avgpool2d", 1};
  if (p == "tensorflow.layers.flatten") return TfLayerEntry{"flatten", 1};
  if (p == "tensorflow.layers.dropout") return TfLayerEntry{"dropout", 1};
  if (p == "tensorflow.layers.batch_normalization") return TfLayerEntry{"batchnorm", 1};
  if (p == "tensorflow.reshape") return TfLayerEntry{"reshape", 1};
  if (p == "tensorflow.nn.dropout") return TfLayerEntry{"dropout", 1};
  if (p == "tensorflow.nn.relu" || p == "tensorflow.nn.sigmoid" ||
      p == "tensorflow.nn.softmax" || p == "tensorflow.nn.tanh" ||
      p == "tensorflow.nn.leaky_relu" || p == "tensorflow.nn.elu" ||
      p == "tensorflow.sigmoid" || p == "tensorflow.tanh")
    return TfLayerEntry{"activation", 1};
  return std::nullopt;
}

struct LossEntry {
  std::string name;
  bool logits_based = false;
};

std::optional<LossEntry> tf_loss_entry(const std::string& p) {
  if (p == "tensorflow.losses.softmax_cross_entropy")
    return LossEntry{"softmax_cross_entropy", true};
  if (p == "tensorflow.losses.sparse_softmax_cross_entropy")
    return LossEntry{"sparse_softmax_cross_entropy", true};
  if (p == "tensorflow.losses.sigmoid_cross_entropy")
    return LossEntry{"sigmoid_cross_entropy", true};
  if (p == "tensorflow.losses.mean_squared_error") return LossEntry{"mse", false};
  if (p == "tensorflow.losses.absolute_difference") return LossEntry{"mae", false};
  if (p == "tensorflow.losses.hinge_loss") return LossEntry{"hinge", false};
  if (p == "tensorflow.losses.huber_loss") return LossEntry{"huber", false};
  if (p == "tensorflow.nn.softmax_cross_entropy_with_logits" ||
      p == "tensorflow.nn.softmax_cross_entropy_with_logits_v2")
    return LossEntry{"softmax_cross_entropy", true};
  if (p == "tensorflow.nn.sparse_softmax_cross_entropy_with_logits")
    return LossEntry{"sparse_softmax_cross_entropy", true};
  if (p == "tensorflow.nn.sigmoid_cross_entropy_with_logits" ||
      p == "tensorflow.nn.weighted_cross_entropy_with_logits")
    return LossEntry{"sigmoid_cross_entropy", true};
  return std::nullopt;
}

std::string normalize_loss_name(const std::string& raw) {
  std::string n = lower(raw);
  if (n == "mean_squared_error") return "mse";
  if (n == "mean_absolute_error") return "mae";
  if (n == "mean_squared_logarithmic_error") return "msle";
  if (n == "huber_loss") return "huber";
  if (n == "kullback_leibler_divergence" || n == "kl_divergence") return "kld";
  return n;
}

// Class names of keras loss objects -> canonical loss names.
std::optional<std::string> keras_loss_class(const std::string& cls) {
  if (cls == "CategoricalCrossentropy") return "categorical_crossentropy";
  if (cls == "SparseCategoricalCrossentropy") return "sparse_categorical_crossentropy";
  if (cls == "BinaryCrossentropy") return "binary_crossentropy";
  if (cls == "MeanSquaredError") return "mse";
  if (cls == "MeanAbsoluteError") return "mae";
  if (cls == "Hinge") return "hinge";
  if (cls == "SquaredHinge") return "squared_hinge";
  if (cls == "CategoricalHinge") return "categorical_hinge";
  if (cls == "Huber") return "huber";
  if (cls == "KLDivergence") return "kld";
  if (cls == "Poisson") return "poisson";
  return std::nullopt;
}

std::optional<std::string> optimizer_from_path(const std::string& p) {
  if (starts_with(p, "tensorflow.train.")) {
    std::string cls = last_segment(p);
    if (cls == "GradientDescentOptimizer") return "sgd";
    if (cls == "AdamOptimizer") return "adam";
    if (cls == "MomentumOptimizer") return "momentum";
    if (cls == "RMSPropOptimizer") return "rmsprop";
    if (cls == "AdagradOptimizer") return "adagrad";
    if (cls == "AdadeltaOptimizer") return "adadelta";
    if (ends_with(cls, "Optimizer")) return lower(cls.substr(0, cls.size() - 9));
    return std::nullopt;
  }
  if (starts_with(p, "keras.optimizers.")) return lower(last_segment(p));
  return std::nullopt;
}

std::optional<std::string> initializer_from_path(const std::string& p) {
  std::string cls = last_segment(p);
  std::string lc = lower(cls);
  if (starts_with(p, "keras.initializers.") || starts_with(p, "tensorflow.initializers.")) {
    if (lc == "zeros" || lc == "zero") return "zeros";
    if (lc == "ones" || lc == "one") return "ones";
    if (lc == "constant") return "constant";
    if (lc == "glorotuniform") return "glorot_uniform";
    if (lc == "glorotnormal") return "glorot_normal";
    if (lc == "henormal") return "he_normal";
    if (lc == "heuniform") return "he_uniform";
    if (lc == "randomnormal") return "random_normal";
    if (lc == "randomuniform") return "random_uniform";
    if (lc == "truncatednormal") return "truncated_normal";
    return lc;
  }
  if (p == "tensorflow.zeros_initializer") return "zeros";
  if (p == "tensorflow.ones_initializer") return "ones";
  if (p == "tensorflow.constant_initializer") return "constant";
  if (p == "tensorflow.random_normal_initializer") return "random_normal";
  if (p == "tensorflow.random_uniform_initializer") return "random_uniform";
  if (p == "tensorflow.truncated_normal_initializer") return "truncated_normal";
  if (p == "tensorflow.glorot_uniform_initializer") return "glorot_uniform";
  return std::nullopt;
}

const std::set<std::string>& activation_names() {
  static const std::set<std::string> names = {
      "relu",    "sigmoid", "softmax", "tanh",        "elu",     "selu",
      "linear",  "none",    "softplus", "softsign",   "swish",   "gelu",
      "exponential", "hard_sigmoid", "leaky_relu", "relu6"};
  return names;
}

// ---------------------------------------------------------------------------
// Argument helpers
// ---------------------------------------------------------------------------

Literal arg_literal(const ArgValue& a) {
  if (a.kind == ArgValue::Kind::Lit || a.kind == ArgValue::Kind::NameRef) return a.lit;
  return Literal::unknown();
}

std::optional<std::int64_t> as_int(const ArgValue* a) {
  if (!a) return std::nullopt;
  Literal l = arg_literal(*a);
  return l.is_int() ? std::optional<std::int64_t>(l.i) : std::nullopt;
}

std::optional<double> as_number(const ArgValue* a) {
  if (!a) return std::nullopt;
  Literal l = arg_literal(*a);
  if (l.is_int()) return double(l.i);
  if (l.kind == Literal::Kind::Float) return l.f;
  return std::nullopt;
}

std::optional<bool> as_bool(const ArgValue* a) {
  if (!a) return std::nullopt;
  Literal l = arg_literal(*a);
  return l.kind == Literal::Kind::Bool ? std::optional<bool>(l.b) : std::nullopt;
}

std::optional<std::string> as_text(const ArgValue* a) {
  if (!a) return std::nullopt;
  Literal l = arg_literal(*a);
  return l.is_text() ? std::optional<std::string>(l.s) : std::nullopt;
}

// Window-style argument: int k -> [k, ..] replicated to `dims`.
std::optional<AttrValue::IntList> as_window(const ArgValue* a, int dims) {
  if (!a) return std::nullopt;
  Literal l = arg_literal(*a);
  if (l.is_int()) return AttrValue::IntList(size_t(dims), l.i);
  if (l.kind == Literal::Kind::IntList && int(l.xs.size()) == dims) {
    for (std::int64_t x : l.xs)
      if (x < 1) return std::nullopt;
    return l.xs;
  }
  return std::nullopt;
}

bool is_none(const ArgValue* a) {
  return a && arg_literal(*a).kind == Literal::Kind::None;
}

// Resolves an activation argument to a canonical name; empty optional means
// unresolvable (and the attribute stays unset).
std::optional<std::string> activation_name(const ArgValue* a) {
  if (!a) return std::nullopt;
  if (is_none(a)) return "none";
  if (auto t = as_text(a)) {
    std::string n = lower(*t);
    return n;
  }
  if (a->kind == ArgValue::Kind::NameRef) {
    std::string p = normalize_path(a->name);
    if (starts_with(p, "tensorflow.nn.") || starts_with(p, "keras.activations.")) {
      std::string n = last_segment(p);
      if (activation_names().count(n)) return n;
    }
  }
  return std::nullopt;
}

}  // namespace

// ---------------------------------------------------------------------------
// Layer recognition
// ---------------------------------------------------------------------------

namespace {

void set_activation_attrs(AttrMap& attrs, const std::optional<std::string>& act) {
  if (!act) return;
  attrs.insert_or_assign("activation", AttrValue::of_text(*act));
  attrs.insert_or_assign("nonlinear",
                         AttrValue::of_bool(*act != "none" && *act != "linear"));
}

void set_initializer_attr(AttrMap& attrs, const char* key, const ArgValue* a,
                          const char* fallback) {
  if (!a) {
    attrs.insert_or_assign(key, AttrValue::of_text(fallback));
    return;
  }
  if (is_none(a)) {  // tf.layers: None means the library default
    attrs.insert_or_assign(key, AttrValue::of_text(fallback));
    return;
  }
  if (auto t = as_text(a)) {
    std::string n = lower(*t);
    if (n == "zero") n = "zeros";
    if (n == "one") n = "ones";
    attrs.insert_or_assign(key, AttrValue::of_text(n));
    return;
  }
  if (a->kind == ArgValue::Kind::NameRef || a->kind == ArgValue::Kind::CallRef) {
    if (auto n = initializer_from_path(normalize_path(a->name)))
      attrs.insert_or_assign(key, AttrValue::of_text(*n));
  }
  // unresolvable: leave unset so initializer rules stay quiet
}

void set_common_learning_attrs(AttrMap& attrs, const ApiCall& call) {
  if (auto ub = as_bool(call.kwarg("use_bias")))
    attrs.insert_or_assign("use_bias", AttrValue::of_bool(*ub));
  else if (!call.kwarg("use_bias"))
    attrs.insert_or_assign("use_bias", AttrValue::of_bool(defaults::kUseBias));
  set_initializer_attr(attrs, "kernel_initializer", call.kwarg("kernel_initializer"),
                       defaults::kKernelInitializer);
  set_initializer_attr(attrs, "bias_initializer", call.kwarg("bias_initializer"),
                       defaults::kBiasInitializer);
  if (auto df = as_text(call.kwarg("data_format")))
    attrs.insert_or_assign("data_format", AttrValue::of_text(lower(*df)));
}

void set_padding_attr(AttrMap& attrs, const ArgValue* a) {
  if (!a) {
    attrs.insert_or_assign("padding", AttrValue::of_text(defaults::kPadding));
    return;
  }
  if (auto t = as_text(a)) attrs.insert_or_assign("padding", AttrValue::of_text(lower(*t)));
}

LayerNodeSpec recognize_conv(const ApiCall& call, int base, int dims) {
  LayerNodeSpec spec;
  spec.layer_type = dims == 1 ? "conv1d" : (dims == 3 ? "conv3d" : "conv2d");
  const ArgValue* filters = call.arg(size_t(base));
  if (!filters) filters = call.kwarg("filters");
  if (auto f = as_int(filters)) spec.attrs.insert_or_assign("filters", AttrValue::of_int(*f));
  const ArgValue* kernel = call.arg(size_t(base) + 1);
  if (!kernel) kernel = call.kwarg("kernel_size");
  if (auto k = as_window(kernel, dims))
    spec.attrs.insert_or_assign("kernel", AttrValue::of_ints(*k));
  const ArgValue* strides = call.arg(size_t(base) + 2);
  if (!strides) strides = call.kwarg("strides");
  if (!strides) {
    spec.attrs.insert_or_assign(
        "strides", AttrValue::of_ints(AttrValue::IntList(size_t(dims), defaults::kConvStride)));
  } else if (auto s = as_window(strides, dims)) {
    spec.attrs.insert_or_assign("strides", AttrValue::of_ints(*s));
  }
  const ArgValue* padding = call.arg(size_t(base) + 3);
  if (!padding) padding = call.kwarg("padding");
  set_padding_attr(spec.attrs, padding);
  set_activation_attrs(spec.attrs, activation_name(call.kwarg("activation")));
  if (!call.kwarg("activation"))
    set_activation_attrs(spec.attrs, std::string(defaults::kActivation));
  set_common_learning_attrs(spec.attrs, call);
  return spec;
}

LayerNodeSpec recognize_dense(const ApiCall& call, int base) {
  LayerNodeSpec spec;
  spec.layer_type = "dense";
  const ArgValue* units = call.arg(size_t(base));
  if (!units) units = call.kwarg("units");
  if (auto u = as_int(units)) spec.attrs.insert_or_assign("units", AttrValue::of_int(*u));
  const ArgValue* act = call.arg(size_t(base) + 1);
  if (!act) act = call.kwarg("activation");
  if (act)
    set_activation_attrs(spec.attrs, activation_name(act));
  else
    set_activation_attrs(spec.attrs, std::string(defaults::kActivation));
  set_common_learning_attrs(spec.attrs, call);
  return spec;
}

LayerNodeSpec recognize_pool(const ApiCall& call, int base, bool avg, bool strides_default_pool) {
  LayerNodeSpec spec;
  spec.layer_type = avg ? "avgpool2d" : "maxpool2d";
  const ArgValue* pool = call.arg(size_t(base));
  if (!pool) pool = call.kwarg("pool_size");
  std::optional<AttrValue::IntList> size = as_window(pool, 2);
  if (!pool) size = AttrValue::IntList{defaults::kPoolSize, defaults::kPoolSize};
  if (size) spec.attrs.insert_or_assign("pool_size", AttrValue::of_ints(*size));
  const ArgValue* strides = call.arg(size_t(base) + 1);
  if (!strides) strides = call.kwarg("strides");
  if (!strides || is_none(strides)) {
    if (strides_default_pool && size)
      spec.attrs.insert_or_assign("strides", AttrValue::of_ints(*size));
  } else if (auto s = as_window(strides, 2)) {
    spec.attrs.insert_or_assign("strides", AttrValue::of_ints(*s));
  }
  const ArgValue* padding = call.arg(size_t(base) + 2);
  if (!padding) padding = call.kwarg("padding");
  set_padding_attr(spec.attrs, padding);
  return spec;
}

LayerNodeSpec recognize_reshape(const ApiCall& call, int base, bool includes_batch) {
  LayerNodeSpec spec;
  spec.layer_type = "reshape";
  const ArgValue* target = call.arg(size_t(base));
  if (!target) target = call.kwarg(includes_batch ? "shape" : "target_shape");
  if (target) {
    Literal l = arg_literal(*target);
    if (l.kind == Literal::Kind::IntList) {
      spec.attrs.insert_or_assign("target", AttrValue::of_ints(l.xs));
      spec.attrs.insert_or_assign("target_includes_batch", AttrValue::of_bool(includes_batch));
    }
  }
  return spec;
}

LayerNodeSpec recognize_dropout(const ApiCall& call, int base, bool keep_prob_style,
                                bool has_default) {
  LayerNodeSpec spec;
  spec.layer_type = "dropout";
  const ArgValue* rate = call.arg(size_t(base));
  if (!rate) rate = call.kwarg(keep_prob_style ? "keep_prob" : "rate");
  if (auto r = as_number(rate)) {
    double v = keep_prob_style ? 1.0 - *r : *r;
    spec.attrs.insert_or_assign("rate", AttrValue::of_float(v));
  } else if (!rate && has_default) {
    spec.attrs.insert_or_assign("rate", AttrValue::of_float(defaults::kTfDropoutRate));
  }
  return spec;
}

}  // namespace

LayerNodeSpec recognize_layer(const ApiCall& call, const BindingTable&) {
  const std::string p = normalize_path(call.callee);

  if (auto keras_kind = keras_layer_path_kind(p)) {
    const std::string& kind = *keras_kind;
    if (kind == "dense") return recognize_dense(call, 0);
    if (kind == "conv1d") return recognize_conv(call, 0, 1);
    if (kind == "conv2d") return recognize_conv(call, 0, 2);
    if (kind == "conv3d") return recognize_conv(call, 0, 3);
    if (kind == "maxpool2d") return recognize_pool(call, 0, false, true);
    if (kind == "avgpool2d") return recognize_pool(call, 0, true, true);
    if (kind == "reshape") return recognize_reshape(call, 0, false);
    if (kind == "dropout") return recognize_dropout(call, 0, false, false);
    if (kind == "activation") {
      LayerNodeSpec spec;
      spec.layer_type = "activation";
      const ArgValue* a = call.arg(0);
      if (!a) a = call.kwarg("activation");
      set_activation_attrs(spec.attrs, activation_name(a));
      return spec;
    }
    LayerNodeSpec spec;
    spec.layer_type = kind;  // flatten, batchnorm, inputlayer, unknown
    return spec;
  }

  if (auto tf = tf_layer_entry(p)) {
    int base = tf->input_args;
    std::string kind = tf->kind;
    if (kind == "dense") return recognize_dense(call, base);
    if (kind == "conv2d") return recognize_conv(call, base, 2);
    if (kind == "conv1d") return recognize_conv(call, base, 1);
    if (kind == "maxpool2d") return recognize_pool(call, base, false, false);
    if (kind == "avgpool2d") return recognize_pool(call, base, true, false);
    if (kind == "reshape") return recognize_reshape(call, base, true);
    if (kind == "dropout")
      return recognize_dropout(call, base, p == "tensorflow.nn.dropout",
                               p == "tensorflow.layers.dropout");
    if (kind == "activation") {
      LayerNodeSpec spec;
      spec.layer_type = "activation";
      set_activation_attrs(spec.attrs, std::string(last_segment(p)));
      return spec;
    }
    LayerNodeSpec spec;
    spec.layer_type = kind;
    return spec;
  }

  return LayerNodeSpec{};  // unknown
}

// ---------------------------------------------------------------------------
// Graph extraction
// ---------------------------------------------------------------------------

namespace {

struct LearnerInfo {
  bool optimizer_linked = false;
  bool has_initializer = false;
  bool has_training_loop = false;
  bool grads_reset = true;  // managed by both supported dialects
  std::optional<LossEntry> loss;
  bool from_logits = false;
  int loss_line = 0;
  std::optional<std::string> optimizer;
  std::vector<std::string> metrics;
  std::optional<std::int64_t> epochs, batch_size;
  bool labels_seen = false;
};

class GraphBuilder {
 public:
  GraphBuilder(const ScriptSource& src, const ParseResult& parsed, Dialect dialect)
      : src_(src), parsed_(parsed), dialect_(dialect) {}

  ExtractResult build() {
    program_ = g_.add_node(NodeKind::Program, 1);
    g_.node(program_).set("dialect", AttrValue::of_text(dialect_name()));
    arch_ = g_.add_node(NodeKind::Architecture, 1);
    g_.add_edge(program_, EdgeLabel::HasArchitecture, arch_);

    for (const auto& [target, source] : parsed_.var_aliases) alias_[target] = source;
    for (int i = 0; i < int(parsed_.calls.size()); ++i) {
      const std::string& t = parsed_.calls[size_t(i)].assign_target;
      if (!t.empty()) var_origin_[t] = i;
    }

    if (dialect_ == Dialect::Keras)
      walk_keras();
    else
      walk_tf1();

    finish_learner();

    if (layer_count_ == 0 && !model_constructs_seen_)
      throw NoModelFound("no model or training constructs recognized");

    ExtractResult res;
    res.graph = std::move(g_);
    res.notes = std::move(notes_);
    return res;
  }

 private:
  std::string dialect_name() const {
    return dialect_ == Dialect::Keras ? "keras" : "tensorflow_v1";
  }

  std::string resolve_var(std::string name) const {
    for (int i = 0; i < 8; ++i) {
      auto it = alias_.find(name);
      if (it == alias_.end()) return name;
      name = it->second;
    }
    return name;
  }

  const ApiCall* origin_call(const std::string& var) const {
    auto it = var_origin_.find(resolve_var(var));
    if (it == var_origin_.end()) return nullptr;
    return &parsed_.calls[size_t(it->second)];
  }

  // Expands a bare callee through wildcard imports so `Dense` resolves to
  // keras.layers.Dense after `from keras.layers import *`.
  std::string wildcard_expand(const std::string& p) const {
    if (p.find('.') != std::string::npos) return p;
    for (const std::string& m : parsed_.wildcard_modules) {
      std::string full = normalize_path(m) + "." + p;
      bool known_layer = starts_with(full, "keras.layers.") && keras_layer_kind(p);
      if (known_layer || is_sequential_ctor(full)) return full;
    }
    return p;
  }

  NodeId ensure_input_layer(int line) {
    if (!input_) {
      input_ = g_.add_node(NodeKind::InputLayer, line);
      g_.add_edge(arch_, EdgeLabel::StartsWith, *input_);
      tail_ = *input_;
    }
    return *input_;
  }

  void set_input_shape(const AttrValue::IntList& raw, bool includes_batch, int line) {
    ensure_input_layer(line);
    TensorShape s;
    s.dims.push_back(Dim::batch());
    size_t start = includes_batch ? 1 : 0;
    for (size_t i = start; i < raw.size(); ++i) {
      std::int64_t x = raw[i];
      s.dims.push_back(x >= 1 ? Dim::known(x) : Dim::unknown());
    }
    g_.node(*input_).set("out_shape", AttrValue::of_ints(encode_shape(s)));
  }

  NodeId append_layer(const LayerNodeSpec& spec, int line) {
    ensure_input_layer(line);
    NodeId layer = g_.add_node(NodeKind::Layer, line);
    g_.node(layer).attrs = spec.attrs;
    g_.node(layer).set("layer_type", AttrValue::of_text(spec.layer_type));
    g_.add_edge(*tail_, EdgeLabel::Next, layer);
    tail_ = layer;
    ++layer_count_;
    return layer;
  }

  void guard_loop_layer(const ApiCall& call) {
    if (call.in_overcap_loop)
      throw UnsupportedConstruct("layer built in a loop beyond the unroll cap",
                                 call.source_line);
  }

  // ---- keras ----

  const ApiCall* layer_call_of_arg(const ArgValue& a) const {
    if (a.kind == ArgValue::Kind::CallRef && a.call_index >= 0)
      return &parsed_.calls[size_t(a.call_index)];
    if (a.kind == ArgValue::Kind::NameRef) return origin_call(a.name);
    return nullptr;
  }

  void add_keras_layer(const ApiCall& raw_ctor) {
    guard_loop_layer(raw_ctor);
    ApiCall ctor = raw_ctor;
    ctor.callee = wildcard_expand(normalize_path(ctor.callee));
    LayerNodeSpec spec = recognize_layer(ctor, parsed_.bindings);
    const ArgValue* ishape = ctor.kwarg("input_shape");
    bool includes_batch = false;
    if (!ishape) {
      ishape = ctor.kwarg("batch_input_shape");
      includes_batch = ishape != nullptr;
    }
    if (ishape) {
      Literal l = arg_literal(*ishape);
      if (l.kind == Literal::Kind::IntList)
        set_input_shape(l.xs, includes_batch, ctor.source_line);
      else
        ensure_input_layer(ctor.source_line);
    }
    if (spec.layer_type == "inputlayer") {
      ensure_input_layer(ctor.source_line);
      return;
    }
    append_layer(spec, ctor.source_line);
  }

  void walk_keras() {
    for (const ApiCall& call : parsed_.calls) {
      std::string p = wildcard_expand(normalize_path(call.callee));

      if (ends_with(p, "()")) {
        std::string inner = p.substr(0, p.size() - 2);
        if (keras_layer_path_kind(inner) && *keras_layer_path_kind(inner) != "unknown")
          throw UnsupportedTopology("functional-style layer application", call.source_line);
      }
      if (is_functional_model_ctor(p))
        throw UnsupportedTopology("functional model API is not supported", call.source_line);

      if (is_sequential_ctor(p)) {
        model_constructs_seen_ = true;
        if (model_var_.empty()) {
          model_var_ = call.assign_target.empty() ? "@model" : call.assign_target;
          g_.node(arch_).source_line = call.source_line;
          if (const ArgValue* layers = call.arg(0)) {
            if (layers->kind == ArgValue::Kind::List)
              for (const ArgValue& item : layers->items)
                if (const ApiCall* ctor = layer_call_of_arg(item)) add_keras_layer(*ctor);
          }
        } else if (!second_model_noted_) {
          second_model_noted_ = true;
          notes_.push_back("multiple models built; only the first one is analyzed");
        }
        continue;
      }

      std::string receiver = resolve_var(call.receiver);
      std::string method = last_segment(call.callee);
      bool on_model = !model_var_.empty() && receiver == model_var_;
      bool on_other_model = second_model_noted_ && !on_model && !receiver.empty() &&
                            origin_sequential(receiver);

      if (on_other_model) continue;

      if (on_model && method == "add") {
        model_constructs_seen_ = true;
        if (const ArgValue* a = call.arg(0)) {
          if (const ApiCall* ctor = layer_call_of_arg(*a)) {
            add_keras_layer(*ctor);
          } else {
            guard_loop_layer(call);
            append_layer(LayerNodeSpec{}, call.source_line);
          }
        }
        continue;
      }
      if (on_model && method == "compile") {
        model_constructs_seen_ = true;
        handle_compile(call);
        continue;
      }
      if (on_model && (method == "fit" || method == "fit_generator")) {
        model_constructs_seen_ = true;
        learner_.has_training_loop = true;
        if (auto e = as_int(call.kwarg("epochs"))) learner_.epochs = *e;
        if (auto b = as_int(call.kwarg("batch_size"))) learner_.batch_size = *b;
        if (call.arg(1) || call.kwarg("y")) learner_.labels_seen = true;
        data_seen_ = data_seen_ || call.arg(0) || call.kwarg("x");
        continue;
      }
    }
    if (model_var_.empty()) {
      // Keras layer calls without a Sequential container: not a model we
      // understand, unless nothing model-like appeared at all (NoModelFound).
      return;
    }
    ensure_input_layer(g_.node(arch_).source_line.value_or(1));
  }

  bool origin_sequential(const std::string& var) const {
    const ApiCall* c = origin_call(var);
    return c && is_sequential_ctor(wildcard_expand(normalize_path(c->callee)));
  }

  void handle_compile(const ApiCall& call) {
    const ArgValue* opt = call.kwarg("optimizer");
    if (!opt) opt = call.arg(0);
    if (opt) {
      if (auto t = as_text(opt)) {
        learner_.optimizer = lower(*t);
        learner_.optimizer_linked = true;
      } else if (const ApiCall* ctor = layer_call_of_arg(*opt)) {
        if (auto name = optimizer_from_path(normalize_path(ctor->callee))) {
          learner_.optimizer = *name;
          learner_.optimizer_linked = true;
        }
      } else if (opt->kind == ArgValue::Kind::NameRef) {
        if (auto name = optimizer_from_path(normalize_path(opt->name))) {
          learner_.optimizer = *name;
          learner_.optimizer_linked = true;
        }
      }
    }

    const ArgValue* loss = call.kwarg("loss");
    if (!loss) loss = call.arg(1);
    if (loss) {
      if (auto t = as_text(loss)) {
        learner_.loss = LossEntry{normalize_loss_name(*t), false};
        learner_.loss_line = call.source_line;
      } else if (const ApiCall* ctor = layer_call_of_arg(*loss)) {
        std::string p = normalize_path(ctor->callee);
        if (starts_with(p, "keras.losses.")) {
          if (auto name = keras_loss_class(last_segment(p))) {
            learner_.loss = LossEntry{*name, false};
            learner_.loss_line = ctor->source_line;
            if (auto fl = as_bool(ctor->kwarg("from_logits"))) learner_.from_logits = *fl;
          }
        }
      } else if (loss->kind == ArgValue::Kind::NameRef) {
        std::string p = normalize_path(loss->name);
        if (starts_with(p, "keras.losses.")) {
          learner_.loss = LossEntry{normalize_loss_name(last_segment(p)), false};
          learner_.loss_line = call.source_line;
        }
      }
    }

    if (const ArgValue* metrics = call.kwarg("metrics")) {
      if (metrics->kind == ArgValue::Kind::List)
        for (const ArgValue& m : metrics->items)
          if (auto t = as_text(&m)) learner_.metrics.push_back(lower(*t));
    }
  }

  // ---- tf v1 ----

  struct PlaceholderInfo {
    AttrValue::IntList shape;
    bool has_shape = false;
    int line = 0;
    bool consumed = false;
  };

  std::optional<NodeId> resolve_tensor(const ArgValue& a, int line) {
    if (a.kind == ArgValue::Kind::CallRef) {
      auto it = call_node_.find(a.call_index);
      if (it != call_node_.end()) return it->second;
      return std::nullopt;
    }
    if (a.kind != ArgValue::Kind::NameRef) return std::nullopt;
    std::string var = resolve_var(a.name);
    auto t = tensor_of_.find(var);
    if (t != tensor_of_.end()) return t->second;
    auto ph = placeholders_.find(var);
    if (ph != placeholders_.end()) {
      if (input_ && ph->second.consumed == false && layer_count_ > 0)
        throw UnsupportedTopology("second input feeds the layer stack", line);
      ph->second.consumed = true;
      NodeId in = ensure_input_layer(ph->second.line);
      if (ph->second.has_shape) set_input_shape(ph->second.shape, true, ph->second.line);
      tensor_of_[var] = in;
      return in;
    }
    return std::nullopt;
  }

  void walk_tf1() {
    for (int idx = 0; idx < int(parsed_.calls.size()); ++idx) {
      const ApiCall& call = parsed_.calls[size_t(idx)];
      std::string p = normalize_path(call.callee);

      if (p == "tensorflow.placeholder") {
        model_constructs_seen_ = true;
        PlaceholderInfo info;
        info.line = call.source_line;
        const ArgValue* shape = call.arg(1);
        if (!shape) shape = call.kwarg("shape");
        if (shape) {
          Literal l = arg_literal(*shape);
          if (l.kind == Literal::Kind::IntList) {
            info.shape = l.xs;
            info.has_shape = true;
          }
        }
        if (!call.assign_target.empty()) placeholders_[call.assign_target] = info;
        continue;
      }

      if (auto entry = tf_layer_entry(p)) {
        model_constructs_seen_ = true;
        guard_loop_layer(call);
        std::optional<NodeId> in_node;
        if (const ArgValue* a = call.arg(0)) in_node = resolve_tensor(*a, call.source_line);
        if (in_node && tail_ && *in_node != *tail_ && g_.node(*in_node).kind != NodeKind::InputLayer)
          throw UnsupportedTopology("layer input is not the current chain tail",
                                    call.source_line);
        if (in_node && tail_ && g_.node(*in_node).kind == NodeKind::InputLayer &&
            layer_count_ > 0)
          throw UnsupportedTopology("branching from the input layer", call.source_line);
        LayerNodeSpec spec = recognize_layer(call, parsed_.bindings);
        NodeId layer = append_layer(spec, call.source_line);
        call_node_[idx] = layer;
        if (!call.assign_target.empty()) tensor_of_[call.assign_target] = layer;
        continue;
      }

      if (auto loss = tf_loss_entry(p)) {
        model_constructs_seen_ = true;
        if (!learner_.loss) {
          learner_.loss = *loss;
          learner_.loss_line = call.source_line;
        }
        if (!call.assign_target.empty()) loss_vars_.insert(call.assign_target);
        loss_calls_.insert(idx);
        continue;
      }

      if (p == "tensorflow.reduce_mean" || p == "tensorflow.reduce_sum") {
        // A loss wrapped in a reduction keeps its identity.
        if (const ArgValue* a = call.arg(0)) {
          bool wraps_loss =
              (a->kind == ArgValue::Kind::CallRef && loss_calls_.count(a->call_index)) ||
              (a->kind == ArgValue::Kind::NameRef && loss_vars_.count(resolve_var(a->name)));
          if (wraps_loss && !call.assign_target.empty()) {
            loss_vars_.insert(call.assign_target);
            loss_calls_.insert(idx);
          }
        }
        continue;
      }

      if (auto opt = optimizer_from_path(p)) {
        model_constructs_seen_ = true;
        if (!learner_.optimizer) learner_.optimizer = *opt;
        if (!call.assign_target.empty()) optimizer_vars_.insert(call.assign_target);
        continue;
      }

      if (ends_with(p, ".minimize")) {
        bool chained = p.find("Optimizer().minimize") != std::string::npos;
        bool via_var = optimizer_vars_.count(resolve_var(call.receiver)) > 0;
        if (chained || via_var) {
          learner_.optimizer_linked = true;
          model_constructs_seen_ = true;
        }
        continue;
      }

      if (p == "tensorflow.global_variables_initializer" ||
          p == "tensorflow.initialize_all_variables") {
        learner_.has_initializer = true;
        continue;
      }

      if (p == "tensorflow.Session" || p == "tensorflow.InteractiveSession") {
        if (!call.assign_target.empty()) session_vars_.insert(call.assign_target);
        continue;
      }

      if (last_segment(call.callee) == "run" &&
          session_vars_.count(resolve_var(call.receiver))) {
        if (call.in_loop) learner_.has_training_loop = true;
        data_seen_ = true;
        continue;
      }
    }

    ensure_input_layer(1);

    // A placeholder that never feeds the layer chain holds the labels.
    for (auto& [var, info] : placeholders_) {
      if (info.consumed || learner_.labels_seen) continue;
      if (tensor_of_.count(var)) continue;
      learner_.labels_seen = true;
      labels_shape_ = info.has_shape ? std::optional<AttrValue::IntList>(info.shape)
                                     : std::nullopt;
    }
  }

  // ---- shared tail ----

  void finish_learner() {
    NodeId learner = g_.add_node(NodeKind::Learner, 1);
    g_.add_edge(program_, EdgeLabel::HasLearner, learner);
    Node& ln = g_.node(learner);
    ln.set("dialect", AttrValue::of_text(dialect_name()));
    ln.set("optimizer_linked", AttrValue::of_bool(learner_.optimizer_linked));
    ln.set("has_training_loop", AttrValue::of_bool(learner_.has_training_loop));
    ln.set("grads_reset", AttrValue::of_bool(learner_.grads_reset));
    bool init = dialect_ == Dialect::Keras ? true : learner_.has_initializer;
    ln.set("has_initializer", AttrValue::of_bool(init));

    if (learner_.loss) {
      NodeId loss = g_.add_node(NodeKind::Loss, learner_.loss_line);
      g_.add_edge(learner, EdgeLabel::HasLoss, loss);
      g_.node(loss).set("name", AttrValue::of_text(learner_.loss->name));
      g_.node(loss).set("logits_based", AttrValue::of_bool(learner_.loss->logits_based));
      if (learner_.from_logits) g_.node(loss).set("from_logits", AttrValue::of_bool(true));
    }
    if (learner_.optimizer) {
      NodeId opt = g_.add_node(NodeKind::Optimizer, 1);
      g_.add_edge(learner, EdgeLabel::HasOptimizer, opt);
      g_.node(opt).set("name", AttrValue::of_text(*learner_.optimizer));
    }
    for (const std::string& m : learner_.metrics) {
      NodeId metric = g_.add_node(NodeKind::Metric, 1);
      g_.add_edge(learner, EdgeLabel::HasMetric, metric);
      g_.node(metric).set("name", AttrValue::of_text(m));
    }
    if (learner_.epochs || learner_.batch_size) {
      NodeId hp = g_.add_node(NodeKind::Hyperparameters, 1);
      g_.add_edge(learner, EdgeLabel::HasHyperparams, hp);
      if (learner_.epochs) g_.node(hp).set("epochs", AttrValue::of_int(*learner_.epochs));
      if (learner_.batch_size)
        g_.node(hp).set("batch_size", AttrValue::of_int(*learner_.batch_size));
    }

    NodeId data = g_.add_node(NodeKind::Data, 1);
    g_.add_edge(program_, EdgeLabel::HasData, data);
    if (learner_.labels_seen) {
      NodeId labels = g_.add_node(NodeKind::Labels, 1);
      g_.add_edge(data, EdgeLabel::HasLabels, labels);
      g_.add_edge(arch_, EdgeLabel::EndsWith, labels);
      if (labels_shape_) {
        TensorShape s;
        s.dims.push_back(Dim::batch());
        for (size_t i = 1; i < labels_shape_->size(); ++i) {
          std::int64_t x = (*labels_shape_)[i];
          s.dims.push_back(x >= 1 ? Dim::known(x) : Dim::unknown());
        }
        g_.node(labels).set("shape", AttrValue::of_ints(encode_shape(s)));
      }
    }
  }

  const ScriptSource& src_;
  const ParseResult& parsed_;
  Dialect dialect_;
  AttributedGraph g_;
  NodeId program_, arch_;
  std::optional<NodeId> input_;
  std::optional<NodeId> tail_;
  int layer_count_ = 0;
  bool model_constructs_seen_ = false;
  std::vector<std::string> notes_;

  std::map<std::string, std::string> alias_;
  std::map<std::string, int> var_origin_;

  std::string model_var_;
  bool second_model_noted_ = false;

  std::map<std::string, PlaceholderInfo> placeholders_;
  std::map<std::string, NodeId> tensor_of_;
  std::map<int, NodeId> call_node_;
  std::set<std::string> optimizer_vars_, session_vars_, loss_vars_;
  std::set<int> loss_calls_;
  std::optional<AttrValue::IntList> labels_shape_;

  LearnerInfo learner_;
  bool data_seen_ = false;
};

}  // namespace

Dialect detect_dialect(const ParseResult& parsed, Dialect requested) {
  if (requested != Dialect::Auto) return requested;
  for (const ApiCall& c : parsed.calls) {
    std::string p = normalize_path(c.callee);
    if (p == "tensorflow.placeholder" || p == "tensorflow.Session" ||
        p == "tensorflow.InteractiveSession" || starts_with(p, "tensorflow.layers."))
      return Dialect::TensorFlowV1;
  }
  return Dialect::Keras;
}

ExtractResult extract_graph(const ScriptSource& src, const ExtractOptions& opts) {
  ParseOptions popts;
  popts.max_unroll = opts.max_unroll;
  ParseResult parsed = parse_script(src, popts);
  Dialect dialect = opts.dialect != Dialect::Auto ? opts.dialect
                                                  : detect_dialect(parsed, src.dialect);
  GraphBuilder builder(src, parsed, dialect);
  return builder.build();
}

}  // namespace dlint
