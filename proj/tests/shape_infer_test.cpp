#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "dlint/graph.hpp"
#include "dlint/shape.hpp"

using namespace dlint;

namespace {

struct Chain {
  AttributedGraph g;
  NodeId input;
  NodeId tail;

  explicit Chain(std::vector<std::int64_t> input_shape) {
    NodeId program = g.add_node(NodeKind::Program);
    NodeId arch = g.add_node(NodeKind::Architecture);
    input = g.add_node(NodeKind::InputLayer);
    g.add_edge(program, EdgeLabel::HasArchitecture, arch);
    g.add_edge(arch, EdgeLabel::StartsWith, input);
    g.node(input).set("out_shape", AttrValue::of_ints(std::move(input_shape)));
    tail = input;
  }

  NodeId layer(const char* type, AttrMap attrs = {}) {
    NodeId id = g.add_node(NodeKind::Layer);
    g.node(id).attrs = std::move(attrs);
    g.node(id).set("layer_type", AttrValue::of_text(type));
    g.add_edge(tail, EdgeLabel::Next, id);
    tail = id;
    return id;
  }
};

AttrMap conv2d(std::int64_t filters, std::int64_t k, std::int64_t stride, const char* pad) {
  AttrMap a;
  a.emplace("filters", AttrValue::of_int(filters));
  a.emplace("kernel", AttrValue::of_ints({k, k}));
  a.emplace("strides", AttrValue::of_ints({stride, stride}));
  a.emplace("padding", AttrValue::of_text(pad));
  return a;
}

AttrMap pool2d(std::int64_t k, std::int64_t stride, const char* pad) {
  AttrMap a;
  a.emplace("pool_size", AttrValue::of_ints({k, k}));
  a.emplace("strides", AttrValue::of_ints({stride, stride}));
  a.emplace("padding", AttrValue::of_text(pad));
  return a;
}

std::vector<std::int64_t> out_of(const AttributedGraph& g, NodeId id) {
  const AttrValue* v = g.node(id).attr("out_shape");
  REQUIRE(v);
  return v->as_ints();
}

}  // namespace

TEST_CASE("conv_or_pool_extent matches the padding formulas") {
  CHECK(conv_or_pool_extent(28, 5, 1, Padding::Valid) == 24);
  CHECK(conv_or_pool_extent(28, 3, 2, Padding::Same) == 14);
  CHECK(conv_or_pool_extent(2, 3, 1, Padding::Valid) == std::nullopt);
  CHECK(conv_or_pool_extent(7, 2, 2, Padding::Valid) == 3);
  CHECK(conv_or_pool_extent(7, 2, 2, Padding::Same) == 4);
  CHECK(conv_or_pool_extent(1, 1, 1, Padding::Valid) == 1);
}

TEST_CASE("reshape_check classifies targets") {
  TensorShape in;
  in.dims = {Dim::batch(), Dim::known(784)};
  CHECK(reshape_check(in, {28, 28, 1}, false) == ReshapeVerdict::Ok);
  CHECK(reshape_check(in, {28, 28, 2}, false) == ReshapeVerdict::DataLoss);
  CHECK(reshape_check(in, {50, 784}, true) == ReshapeVerdict::BatchAltered);
  CHECK(reshape_check(in, {-1, 784}, true) == ReshapeVerdict::Ok);
  // A leading -1 that absorbs a non-batch factor redistributes items.
  CHECK(reshape_check(in, {-1, 392}, true) == ReshapeVerdict::BatchAltered);
  CHECK(reshape_check(in, {-1, 28, 28}, false) == ReshapeVerdict::Ok);
  CHECK(reshape_check(in, {-1, 3}, false) == ReshapeVerdict::DataLoss);

  TensorShape vague;
  vague.dims = {Dim::batch(), Dim::unknown()};
  CHECK(reshape_check(vague, {28, 28}, false) == ReshapeVerdict::Indeterminate);
}

TEST_CASE("conv and flatten propagate the documented shapes") {
  Chain c({kBatchDim, 28, 28, 1});
  NodeId conv = c.layer("conv2d", conv2d(32, 5, 1, "valid"));
  NodeId flat = c.layer("flatten");
  AttributedGraph g = propagate_shapes(c.g);
  CHECK(out_of(g, conv) == std::vector<std::int64_t>{kBatchDim, 24, 24, 32});
  CHECK(out_of(g, flat) == std::vector<std::int64_t>{kBatchDim, 24 * 24 * 32});
}

TEST_CASE("dense on a 4-d tensor records a rank mismatch") {
  Chain c({kBatchDim, 28, 28, 1});
  AttrMap dense;
  dense.emplace("units", AttrValue::of_int(10));
  NodeId d = c.layer("dense", std::move(dense));
  AttributedGraph g = propagate_shapes(c.g);
  CHECK(g.node(d).text_attr("shape_error") == kShapeErrRankMismatch);
  CHECK(g.node(d).attr("out_shape") == nullptr);
}

TEST_CASE("spatial underflow is annotated and downstream stays unknown") {
  Chain c({kBatchDim, 2, 2, 1});
  NodeId conv = c.layer("conv2d", conv2d(8, 3, 1, "valid"));
  NodeId flat = c.layer("flatten");
  AttributedGraph g = propagate_shapes(c.g);
  CHECK(g.node(conv).text_attr("shape_error") == kShapeErrSpatialUnderflow);
  CHECK(g.node(flat).attr("out_shape") == nullptr);
  CHECK(g.node(flat).attr("shape_error") == nullptr);
}

TEST_CASE("reshape errors are annotated and shapes recover afterwards") {
  Chain c({kBatchDim, 784});
  AttrMap bad;
  bad.emplace("target", AttrValue::of_ints({28, 28, 2}));
  bad.emplace("target_includes_batch", AttrValue::of_bool(false));
  NodeId r = c.layer("reshape", std::move(bad));
  AttrMap fix;
  fix.emplace("target", AttrValue::of_ints({28, 28, 1}));
  fix.emplace("target_includes_batch", AttrValue::of_bool(false));
  NodeId r2 = c.layer("reshape", std::move(fix));
  NodeId flat = c.layer("flatten");
  AttributedGraph g = propagate_shapes(c.g);
  CHECK(g.node(r).text_attr("shape_error") == kShapeErrReshapeDataLoss);
  // The second reshape has an explicit target, so knowledge resumes.
  CHECK(out_of(g, r2) == std::vector<std::int64_t>{kBatchDim, 28, 28, 1});
  CHECK(out_of(g, flat) == std::vector<std::int64_t>{kBatchDim, 784});
}

TEST_CASE("identity layers conserve the per-item product, dense does not") {
  Chain c({kBatchDim, 16, 16, 3});
  NodeId drop = c.layer("dropout");
  NodeId bn = c.layer("batchnorm");
  NodeId act = c.layer("activation", {{"activation", AttrValue::of_text("relu")}});
  NodeId flat = c.layer("flatten");
  AttrMap dense;
  dense.emplace("units", AttrValue::of_int(10));
  NodeId d = c.layer("dense", std::move(dense));
  AttributedGraph g = propagate_shapes(c.g);

  auto per_item = [&](NodeId id) {
    return decode_shape(out_of(g, id)).elements_per_item().value();
  };
  CHECK(per_item(drop) == 16 * 16 * 3);
  CHECK(per_item(bn) == 16 * 16 * 3);
  CHECK(per_item(act) == 16 * 16 * 3);
  CHECK(per_item(flat) == 16 * 16 * 3);
  CHECK(per_item(d) == 10);
}

TEST_CASE("flatten yields rank 2 and conv2d preserves rank 4") {
  Chain c({kBatchDim, 32, 32, 3});
  NodeId conv = c.layer("conv2d", conv2d(8, 3, 1, "same"));
  NodeId flat = c.layer("flatten");
  AttributedGraph g = propagate_shapes(c.g);
  CHECK(decode_shape(out_of(g, conv)).rank() == 4);
  CHECK(decode_shape(out_of(g, flat)).rank() == 2);
}

TEST_CASE("channels_first layouts flip the spatial axes") {
  Chain c({kBatchDim, 3, 28, 28});
  AttrMap a = conv2d(16, 5, 1, "valid");
  a.emplace("data_format", AttrValue::of_text("channels_first"));
  NodeId conv = c.layer("conv2d", std::move(a));
  AttributedGraph g = propagate_shapes(c.g);
  CHECK(out_of(g, conv) == std::vector<std::int64_t>{kBatchDim, 16, 24, 24});
}

TEST_CASE("unknown dims stay unknown without errors") {
  Chain c({kBatchDim, kUnknownDim, kUnknownDim, 3});
  NodeId conv = c.layer("conv2d", conv2d(8, 3, 1, "valid"));
  AttributedGraph g = propagate_shapes(c.g);
  CHECK(out_of(g, conv) == std::vector<std::int64_t>{kBatchDim, kUnknownDim, kUnknownDim, 8});
  CHECK(g.node(conv).attr("shape_error") == nullptr);
}

// Small-scale version of the acceptance oracle: random conv/pool stacks
// against an independent reimplementation of the two padding formulas.
namespace {

std::int64_t oracle_extent(std::int64_t in, std::int64_t w, std::int64_t s, bool same) {
  if (same) return (in + s - 1) / s;
  return (in - w) / s + 1;  // caller guarantees w <= in
}

}  // namespace

TEST_CASE("random stacks agree with the brute-force oracle") {
  std::mt19937 rng(1234);
  for (int trial = 0; trial < 100; ++trial) {
    std::int64_t h = 8 + std::int64_t(rng() % 249);
    std::int64_t w = 8 + std::int64_t(rng() % 249);
    std::int64_t ch = 1 + std::int64_t(rng() % 8);
    Chain c({kBatchDim, h, w, ch});
    std::vector<NodeId> ids;
    std::vector<std::vector<std::int64_t>> expected;
    std::int64_t eh = h, ew = w, ec = ch;
    bool dead = false;
    int depth = 1 + int(rng() % 12);
    for (int i = 0; i < depth && !dead; ++i) {
      bool is_pool = rng() % 3 == 0;
      std::int64_t k = 1 + std::int64_t(rng() % 5);
      std::int64_t s = 1 + std::int64_t(rng() % 3);
      bool same = rng() % 2 == 0;
      if (is_pool) {
        ids.push_back(c.layer("maxpool2d", pool2d(k, s, same ? "same" : "valid")));
      } else {
        std::int64_t f = 1 + std::int64_t(rng() % 64);
        ids.push_back(c.layer("conv2d", conv2d(f, k, s, same ? "same" : "valid")));
        ec = f;
      }
      if (!same && (k > eh || k > ew)) {
        dead = true;  // underflow: no expectation past this layer
        expected.push_back({});
        break;
      }
      eh = oracle_extent(eh, k, s, same);
      ew = oracle_extent(ew, k, s, same);
      expected.push_back({kBatchDim, eh, ew, ec});
    }
    AttributedGraph g = propagate_shapes(c.g);
    for (size_t i = 0; i < expected.size(); ++i) {
      if (expected[i].empty()) {
        CHECK(g.node(ids[i]).text_attr("shape_error") == kShapeErrSpatialUnderflow);
      } else {
        CHECK(out_of(g, ids[i]) == expected[i]);
      }
    }
  }
}
