#ifndef DLINT_SHAPE_HPP
#define DLINT_SHAPE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dlint/graph.hpp"

namespace dlint {

// One dimension of an activation tensor: a known positive extent, the
// symbolic batch dimension, or unknown.
struct Dim {
  enum class Tag { Known, Batch, Unknown } tag = Tag::Unknown;
  std::int64_t extent = 0;

  static Dim known(std::int64_t n) { return Dim{Tag::Known, n}; }
  static Dim batch() { return Dim{Tag::Batch, 0}; }
  static Dim unknown() { return Dim{Tag::Unknown, 0}; }

  bool is_known() const { return tag == Tag::Known; }
  bool is_batch() const { return tag == Tag::Batch; }
  bool is_unknown() const { return tag == Tag::Unknown; }
  bool operator==(const Dim&) const = default;
};

struct TensorShape {
  std::vector<Dim> dims;

  size_t rank() const { return dims.size(); }
  bool fully_known_after_batch() const;
  // Product of known non-batch extents; nullopt when any is unknown.
  std::optional<std::int64_t> elements_per_item() const;
  std::string to_string() const;
  bool operator==(const TensorShape&) const = default;
};

// Graph attrs encode shapes as IntList with sentinels for the symbolic dims.
inline constexpr std::int64_t kBatchDim = -1;
inline constexpr std::int64_t kUnknownDim = -2;

AttrValue::IntList encode_shape(const TensorShape& s);
TensorShape decode_shape(const AttrValue::IntList& enc);
std::optional<TensorShape> shape_attr(const Node& n, const std::string& name);

enum class Padding { Valid, Same };
std::optional<Padding> parse_padding(const std::string& s);

// Output spatial extent of a convolution or pooling window. Valid padding
// yields floor((input-window)/stride)+1 and requires window <= input;
// same padding yields ceil(input/stride). Nullopt signals spatial underflow.
std::optional<std::int64_t> conv_or_pool_extent(std::int64_t input, std::int64_t window,
                                                std::int64_t stride, Padding padding);

enum class ReshapeVerdict { Ok, DataLoss, BatchAltered, Indeterminate };

// Element-count and batch-preservation check for a reshape target. The
// target carries explicit dims; `target_includes_batch` tells whether its
// first entry addresses the batch dimension.
ReshapeVerdict reshape_check(const TensorShape& in, const AttrValue::IntList& target,
                             bool target_includes_batch);

// Names of the shape_error annotation values consumed by the UT rules.
inline constexpr const char* kShapeErrRankMismatch = "rank_mismatch";
inline constexpr const char* kShapeErrSpatialUnderflow = "spatial_underflow";
inline constexpr const char* kShapeErrReshapeDataLoss = "reshape_data_loss";
inline constexpr const char* kShapeErrReshapeBatchAltered = "reshape_batch_altered";

// Walks the layer chain and fills in_shape/out_shape per layer kind. Shape
// failures never throw: the offending node gets a `shape_error` attr and
// propagation continues with unknown dims so later rules still run.
AttributedGraph propagate_shapes(AttributedGraph g);

}  // namespace dlint

#endif
