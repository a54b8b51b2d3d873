#include "dlint/shape.hpp"

#include <numeric>
#include <sstream>

namespace dlint {

bool TensorShape::fully_known_after_batch() const {
  for (size_t i = 1; i < dims.size(); ++i)
    if (!dims[i].is_known()) return false;
  return !dims.empty();
}

std::optional<std::int64_t> TensorShape::elements_per_item() const {
  std::int64_t prod = 1;
  for (size_t i = 0; i < dims.size(); ++i) {
    if (dims[i].is_batch()) continue;
    if (!dims[i].is_known()) return std::nullopt;
    prod *= dims[i].extent;
  }
  return prod;
}

std::string TensorShape::to_string() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i) os << ",";
    if (dims[i].is_batch())
      os << "B";
    else if (dims[i].is_unknown())
      os << "?";
    else
      os << dims[i].extent;
  }
  os << "]";
  return os.str();
}

AttrValue::IntList encode_shape(const TensorShape& s) {
  AttrValue::IntList enc;
  enc.reserve(s.dims.size());
  for (const Dim& d : s.dims) {
    if (d.is_batch())
      enc.push_back(kBatchDim);
    else if (d.is_unknown())
      enc.push_back(kUnknownDim);
    else
      enc.push_back(d.extent);
  }
  return enc;
}

TensorShape decode_shape(const AttrValue::IntList& enc) {
  TensorShape s;
  s.dims.reserve(enc.size());
  for (std::int64_t x : enc) {
    if (x == kBatchDim)
      s.dims.push_back(Dim::batch());
    else if (x == kUnknownDim || x < 1)
      s.dims.push_back(Dim::unknown());
    else
      s.dims.push_back(Dim::known(x));
  }
  return s;
}

std::optional<TensorShape> shape_attr(const Node& n, const std::string& name) {
  const AttrValue* v = n.attr(name);
  if (!v || !v->is_ints()) return std::nullopt;
  return decode_shape(v->as_ints());
}

std::optional<Padding> parse_padding(const std::string& s) {
  if (s == "valid") return Padding::Valid;
  if (s == "same") return Padding::Same;
  return std::nullopt;
}

std::optional<std::int64_t> conv_or_pool_extent(std::int64_t input, std::int64_t window,
                                                std::int64_t stride, Padding padding) {
  if (input < 1 || window < 1 || stride < 1) return std::nullopt;
  if (padding == Padding::Same) return (input + stride - 1) / stride;
  if (window > input) return std::nullopt;
  return (input - window) / stride + 1;
}

ReshapeVerdict reshape_check(const TensorShape& in, const AttrValue::IntList& target,
                             bool target_includes_batch) {
  std::optional<std::int64_t> per_item = in.elements_per_item();
  if (!per_item) return ReshapeVerdict::Indeterminate;

  AttrValue::IntList body = target;
  bool batch_ok = true;
  if (target_includes_batch) {
    if (body.empty()) return ReshapeVerdict::Indeterminate;
    std::int64_t head = body.front();
    body.erase(body.begin());
    if (head >= 0) {
      // An explicit count in the first position pins the symbolic batch.
      batch_ok = false;
    }
    // head == -1 keeps the batch only when the remaining extents absorb
    // exactly one item; checked below once the body product is known.
  }

  int wildcards = 0;
  std::int64_t prod = 1;
  for (std::int64_t x : body) {
    if (x == -1) {
      ++wildcards;
      continue;
    }
    if (x < 1) return ReshapeVerdict::Indeterminate;
    prod *= x;
  }
  if (wildcards > 1) return ReshapeVerdict::Indeterminate;

  if (!batch_ok) return ReshapeVerdict::BatchAltered;
  if (target_includes_batch && wildcards == 0 && prod != *per_item)
    return ReshapeVerdict::BatchAltered;  // leading -1 absorbs a non-batch count

  if (wildcards == 1) {
    if (prod == 0 || *per_item % prod != 0) return ReshapeVerdict::DataLoss;
    return ReshapeVerdict::Ok;
  }
  return prod == *per_item ? ReshapeVerdict::Ok : ReshapeVerdict::DataLoss;
}

namespace {

std::optional<std::int64_t> int_list_at(const Node& n, const std::string& attr, size_t i) {
  const AttrValue* v = n.attr(attr);
  if (!v || !v->is_ints() || i >= v->as_ints().size()) return std::nullopt;
  return v->as_ints()[i];
}

struct SpatialAxes {
  size_t h = 1, w = 2, c = 3;
};

SpatialAxes axes_for(const Node& layer) {
  SpatialAxes a;
  if (layer.text_attr("data_format") == "channels_first") {
    a.h = 2;
    a.w = 3;
    a.c = 1;
  }
  return a;
}

void set_shape(Node& n, const std::string& attr, const TensorShape& s) {
  n.set(attr, AttrValue::of_ints(encode_shape(s)));
}

void record_error(Node& n, const char* code) {
  n.set("shape_error", AttrValue::of_text(code));
}

// Output shape of one layer over `in`; empty optional means unknown from
// here on. Errors are recorded on the node.
std::optional<TensorShape> layer_out_shape(Node& layer, const TensorShape& in) {
  const std::string kind = layer.text_attr("layer_type", "unknown");

  auto identity = [&]() -> std::optional<TensorShape> { return in; };

  if (kind == "dropout" || kind == "batchnorm" || kind == "activation")
    return identity();

  if (kind == "dense") {
    if (in.rank() != 2) {
      record_error(layer, kShapeErrRankMismatch);
      return std::nullopt;
    }
    TensorShape out;
    out.dims.push_back(Dim::batch());
    if (const AttrValue* units = layer.attr("units"); units && units->is_int())
      out.dims.push_back(Dim::known(units->as_int()));
    else
      out.dims.push_back(Dim::unknown());
    return out;
  }

  if (kind == "flatten") {
    if (in.rank() < 2) {
      record_error(layer, kShapeErrRankMismatch);
      return std::nullopt;
    }
    TensorShape out;
    out.dims.push_back(Dim::batch());
    if (auto prod = in.elements_per_item())
      out.dims.push_back(Dim::known(*prod));
    else
      out.dims.push_back(Dim::unknown());
    return out;
  }

  if (kind == "reshape") {
    const AttrValue* target = layer.attr("target");
    if (!target || !target->is_ints()) return std::nullopt;
    bool includes_batch = layer.bool_attr("target_includes_batch");
    ReshapeVerdict verdict = reshape_check(in, target->as_ints(), includes_batch);
    if (verdict == ReshapeVerdict::DataLoss) {
      record_error(layer, kShapeErrReshapeDataLoss);
      return std::nullopt;
    }
    if (verdict == ReshapeVerdict::BatchAltered) {
      record_error(layer, kShapeErrReshapeBatchAltered);
      return std::nullopt;
    }
    // Ok or Indeterminate: the explicit target dictates the shape downstream.
    TensorShape out;
    out.dims.push_back(Dim::batch());
    AttrValue::IntList body = target->as_ints();
    if (includes_batch && !body.empty()) body.erase(body.begin());
    std::optional<std::int64_t> per_item = in.elements_per_item();
    std::int64_t fixed = 1;
    for (std::int64_t x : body)
      if (x >= 1) fixed *= x;
    for (std::int64_t x : body) {
      if (x >= 1) {
        out.dims.push_back(Dim::known(x));
      } else if (x == -1 && per_item && fixed > 0 && *per_item % fixed == 0) {
        out.dims.push_back(Dim::known(*per_item / fixed));
      } else {
        out.dims.push_back(Dim::unknown());
      }
    }
    return out;
  }

  bool is_conv2d = kind == "conv2d";
  bool is_pool2d = kind == "maxpool2d" || kind == "avgpool2d";
  if (is_conv2d || is_pool2d) {
    if (in.rank() != 4) {
      record_error(layer, kShapeErrRankMismatch);
      return std::nullopt;
    }
    SpatialAxes ax = axes_for(layer);
    std::optional<Padding> pad = parse_padding(layer.text_attr("padding", "valid"));
    TensorShape out = in;
    const std::string window_attr = is_conv2d ? "kernel" : "pool_size";
    size_t spatial[2] = {ax.h, ax.w};
    for (size_t i = 0; i < 2; ++i) {
      size_t axis = spatial[i];
      Dim d = in.dims[axis];
      std::optional<std::int64_t> window = int_list_at(layer, window_attr, i);
      std::optional<std::int64_t> stride = int_list_at(layer, "strides", i);
      if (!d.is_known() || !window || !stride || !pad || *window < 1 || *stride < 1) {
        out.dims[axis] = Dim::unknown();
        continue;
      }
      std::optional<std::int64_t> extent = conv_or_pool_extent(d.extent, *window, *stride, *pad);
      if (!extent) {
        record_error(layer, kShapeErrSpatialUnderflow);
        return std::nullopt;
      }
      out.dims[axis] = Dim::known(*extent);
    }
    if (is_conv2d) {
      if (const AttrValue* f = layer.attr("filters"); f && f->is_int())
        out.dims[ax.c] = Dim::known(f->as_int());
      else
        out.dims[ax.c] = Dim::unknown();
    }
    return out;
  }

  if (kind == "conv1d") {
    if (in.rank() != 3) {
      record_error(layer, kShapeErrRankMismatch);
      return std::nullopt;
    }
    TensorShape out = in;
    Dim d = in.dims[1];
    std::optional<Padding> pad = parse_padding(layer.text_attr("padding", "valid"));
    std::optional<std::int64_t> window = int_list_at(layer, "kernel", 0);
    std::optional<std::int64_t> stride = int_list_at(layer, "strides", 0);
    if (d.is_known() && window && stride && pad && *window >= 1 && *stride >= 1) {
      std::optional<std::int64_t> extent = conv_or_pool_extent(d.extent, *window, *stride, *pad);
      if (!extent) {
        record_error(layer, kShapeErrSpatialUnderflow);
        return std::nullopt;
      }
      out.dims[1] = Dim::known(*extent);
    } else {
      out.dims[1] = Dim::unknown();
    }
    if (const AttrValue* f = layer.attr("filters"); f && f->is_int())
      out.dims[2] = Dim::known(f->as_int());
    else
      out.dims[2] = Dim::unknown();
    return out;
  }

  // conv3d is parsed but its shape arithmetic is out of scope; unknown layer
  // kinds also pass through unannotated so later rules still run.
  return std::nullopt;
}

}  // namespace

AttributedGraph propagate_shapes(AttributedGraph g) {
  std::optional<NodeId> input = g.first_of_kind(NodeKind::InputLayer);
  if (!input) return g;
  std::optional<TensorShape> carried = shape_attr(g.node(*input), "out_shape");

  std::optional<NodeId> cur = g.out_neighbor(*input, EdgeLabel::Next);
  while (cur) {
    Node& layer = g.node(*cur);
    if (carried) {
      set_shape(layer, "in_shape", *carried);
      carried = layer_out_shape(layer, *carried);
    } else if (layer.text_attr("layer_type") == "reshape") {
      // An explicit reshape target re-establishes the shape even when the
      // incoming one is unknown; nothing can be verified about it though.
      if (const AttrValue* target = layer.attr("target"); target && target->is_ints()) {
        TensorShape out;
        out.dims.push_back(Dim::batch());
        AttrValue::IntList body = target->as_ints();
        if (layer.bool_attr("target_includes_batch") && !body.empty())
          body.erase(body.begin());
        for (std::int64_t x : body)
          out.dims.push_back(x >= 1 ? Dim::known(x) : Dim::unknown());
        carried = out;
      }
    }
    if (carried) set_shape(layer, "out_shape", *carried);
    cur = g.out_neighbor(*cur, EdgeLabel::Next);
  }
  return g;
}

}  // namespace dlint
