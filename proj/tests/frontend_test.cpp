#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "dlint/errors.hpp"
#include "dlint/frontend.hpp"
#include "dlint/shape.hpp"

using namespace dlint;

namespace {

ScriptSource src_of(const std::string& text, Dialect d = Dialect::Auto) {
  ScriptSource s;
  s.path = "test.py";
  s.text = text;
  s.dialect = d;
  return s;
}

std::vector<const Node*> chain_layers(const AttributedGraph& g) {
  std::vector<const Node*> out;
  auto input = g.first_of_kind(NodeKind::InputLayer);
  REQUIRE(input);
  for (NodeId id : next_closure(g, *input, nullptr)) out.push_back(&g.node(id));
  return out;
}

const Node* single(const AttributedGraph& g, NodeKind k) {
  auto ids = g.nodes_of_kind(k);
  REQUIRE(ids.size() == 1);
  return &g.node(ids[0]);
}

}  // namespace

TEST_CASE("binding table resolves variables at the use site") {
  ParseResult r = parse_script(src_of("k = 5\n"
                                      "from keras.layers import Conv2D\n"
                                      "c = Conv2D(32, (k, k))\n"));
  REQUIRE(r.calls.size() == 1);
  const ApiCall& call = r.calls[0];
  CHECK(call.callee == "keras.layers.Conv2D");
  REQUIRE(call.args.size() == 2);
  Literal kernel = call.args[1].lit;
  REQUIRE(kernel.kind == Literal::Kind::IntList);
  CHECK(kernel.xs == std::vector<std::int64_t>{5, 5});
}

TEST_CASE("literal range loops unroll") {
  ParseResult r = parse_script(src_of("from keras.layers import Dense\n"
                                      "for i in range(2):\n"
                                      "    model.add(Dense(64))\n"));
  int dense_calls = 0;
  for (const ApiCall& c : r.calls)
    if (c.callee == "keras.layers.Dense") ++dense_calls;
  CHECK(dense_calls == 2);
}

TEST_CASE("empty file parses to nothing") {
  ParseResult r = parse_script(src_of(""));
  CHECK(r.calls.empty());
  CHECK(r.bindings.empty());
}

TEST_CASE("last write wins in the binding table") {
  ParseResult r = parse_script(src_of("n = 1\nn = 7\nm = n\n"));
  CHECK(r.bindings.at("m").i == 7);
}

TEST_CASE("recognize_layer fills documented defaults") {
  ParseResult r = parse_script(src_of("from keras.layers import Conv2D, Dense, Activation\n"
                                      "a = Conv2D(32, (3, 3))\n"
                                      "b = Dense(1, activation='sigmoid')\n"
                                      "c = Activation('relu')\n"));
  REQUIRE(r.calls.size() == 3);

  LayerNodeSpec conv = recognize_layer(r.calls[0], r.bindings);
  CHECK(conv.layer_type == "conv2d");
  CHECK(conv.attrs.at("filters").as_int() == 32);
  CHECK(conv.attrs.at("kernel").as_ints() == AttrValue::IntList{3, 3});
  CHECK(conv.attrs.at("strides").as_ints() == AttrValue::IntList{1, 1});
  CHECK(conv.attrs.at("padding").as_text() == "valid");
  CHECK(conv.attrs.at("activation").as_text() == "none");
  CHECK(conv.attrs.at("use_bias").as_bool() == true);
  CHECK(conv.attrs.at("kernel_initializer").as_text() == "glorot_uniform");
  CHECK(conv.attrs.at("bias_initializer").as_text() == "zeros");

  LayerNodeSpec dense = recognize_layer(r.calls[1], r.bindings);
  CHECK(dense.layer_type == "dense");
  CHECK(dense.attrs.at("units").as_int() == 1);
  CHECK(dense.attrs.at("activation").as_text() == "sigmoid");
  CHECK(dense.attrs.at("nonlinear").as_bool() == true);

  LayerNodeSpec act = recognize_layer(r.calls[2], r.bindings);
  CHECK(act.layer_type == "activation");
  CHECK(act.attrs.at("activation").as_text() == "relu");
  CHECK(act.attrs.at("nonlinear").as_bool() == true);
}

TEST_CASE("unknown layers degrade to layer_type unknown") {
  ParseResult r = parse_script(src_of("from keras.layers import LocallyConnected2D\n"
                                      "x = LocallyConnected2D(3)\n"));
  REQUIRE(r.calls.size() == 1);
  CHECK(recognize_layer(r.calls[0], r.bindings).layer_type == "unknown");
}

TEST_CASE("minimal sequential script extracts the documented graph") {
  ExtractResult res = extract_graph(
      src_of("from keras.models import Sequential\n"
             "from keras.layers import Dense\n"
             "model = Sequential()\n"
             "model.add(Dense(10, input_shape=(4,)))\n"
             "model.compile(loss='mse', optimizer='sgd')\n"
             "model.fit(x, y)\n"));
  const AttributedGraph& g = res.graph;
  CHECK(conforms(g));
  CHECK(g.nodes_of_kind(NodeKind::Program).size() == 1);
  CHECK(g.nodes_of_kind(NodeKind::Architecture).size() == 1);

  const Node* input = single(g, NodeKind::InputLayer);
  CHECK(shape_attr(*input, "out_shape")->to_string() == "[B,4]");

  auto layers = chain_layers(g);
  REQUIRE(layers.size() == 1);
  CHECK(layers[0]->text_attr("layer_type") == "dense");
  CHECK(layers[0]->int_attr("units") == 10);

  CHECK(single(g, NodeKind::Loss)->text_attr("name") == "mse");
  CHECK(single(g, NodeKind::Optimizer)->text_attr("name") == "sgd");
  const Node* learner = single(g, NodeKind::Learner);
  CHECK(learner->bool_attr("has_training_loop") == true);
  CHECK(learner->bool_attr("optimizer_linked") == true);
  CHECK(single(g, NodeKind::Labels) != nullptr);
}

TEST_CASE("motivating example: nine layers, softmax tail, binary loss") {
  ExtractResult res = extract_graph(
      src_of("from keras.models import Sequential\n"
             "from keras.layers import Conv2D, MaxPooling2D, Flatten, Dense\n"
             "model = Sequential()\n"
             "model.add(Conv2D(224, (11, 11), activation='relu', input_shape=(224, 224, 3)))\n"
             "model.add(MaxPooling2D(pool_size=(2, 2)))\n"
             "model.add(Conv2D(55, (5, 5), activation='relu'))\n"
             "model.add(MaxPooling2D(pool_size=(2, 2)))\n"
             "model.add(Conv2D(13, (3, 3), activation='relu'))\n"
             "model.add(MaxPooling2D(pool_size=(2, 2)))\n"
             "model.add(Flatten())\n"
             "model.add(Dense(256, activation='relu'))\n"
             "model.add(Dense(2, activation='softmax'))\n"
             "model.compile(loss='binary_crossentropy', optimizer='sgd')\n"
             "model.fit(x, y, epochs=10, batch_size=32)\n"));
  const AttributedGraph& g = res.graph;
  auto layers = chain_layers(g);
  REQUIRE(layers.size() == 9);
  const char* expected[] = {"conv2d",    "maxpool2d", "conv2d", "maxpool2d", "conv2d",
                            "maxpool2d", "flatten",   "dense",  "dense"};
  for (size_t i = 0; i < 9; ++i) CHECK(layers[i]->text_attr("layer_type") == expected[i]);
  CHECK(layers[8]->text_attr("activation") == "softmax");
  CHECK(single(g, NodeKind::Loss)->text_attr("name") == "binary_crossentropy");
  const Node* hp = single(g, NodeKind::Hyperparameters);
  CHECK(hp->int_attr("epochs") == 10);
  CHECK(hp->int_attr("batch_size") == 32);
}

TEST_CASE("tf-v1 learner flags from the recognizer table") {
  ExtractResult res = extract_graph(
      src_of("import tensorflow as tf\n"
             "x = tf.placeholder(tf.float32, [None, 4])\n"
             "y = tf.placeholder(tf.float32, [None, 1])\n"
             "out = tf.layers.dense(x, 1)\n"
             "loss = tf.losses.mean_squared_error(y, out)\n"
             "train = tf.train.AdamOptimizer(0.1).minimize(loss)\n"
             "sess = tf.Session()\n"
             "for i in range(100):\n"
             "    sess.run(train)\n"));
  const Node* learner = single(res.graph, NodeKind::Learner);
  CHECK(learner->text_attr("dialect") == "tensorflow_v1");
  CHECK(learner->bool_attr("optimizer_linked") == true);
  CHECK(learner->bool_attr("has_training_loop") == true);
  CHECK(learner->bool_attr("has_initializer") == false);
}

TEST_CASE("tf-v1 minimize inside the training loop still links the optimizer") {
  ExtractResult res = extract_graph(
      src_of("import tensorflow as tf\n"
             "x = tf.placeholder(tf.float32, [None, 4])\n"
             "y = tf.placeholder(tf.float32, [None, 1])\n"
             "pred = tf.layers.dense(x, 1)\n"
             "loss = tf.losses.mean_squared_error(y, pred)\n"
             "opt = tf.train.GradientDescentOptimizer(0.01)\n"
             "with tf.Session() as sess:\n"
             "    for i in range(1000):\n"
             "        train = opt.minimize(loss)\n"
             "        sess.run(train)\n"));
  const Node* learner = single(res.graph, NodeKind::Learner);
  CHECK(learner->bool_attr("optimizer_linked") == true);
  CHECK(learner->bool_attr("has_training_loop") == true);
  CHECK(learner->bool_attr("has_initializer") == false);
}

TEST_CASE("tf-v1 chains follow dataflow and reject branching") {
  CHECK_THROWS_AS(
      extract_graph(src_of("import tensorflow as tf\n"
                           "x = tf.placeholder(tf.float32, [None, 8, 8, 1])\n"
                           "a = tf.layers.conv2d(x, 8, [3, 3])\n"
                           "b = tf.layers.conv2d(x, 8, [3, 3])\n")),
      UnsupportedTopology);
}

TEST_CASE("functional keras constructs are rejected") {
  CHECK_THROWS_AS(extract_graph(src_of("from keras.layers import Dense, Input\n"
                                       "i = Input(shape=(4,))\n"
                                       "x = Dense(10)(i)\n")),
                  UnsupportedTopology);
}

TEST_CASE("no model constructs means NoModelFound") {
  CHECK_THROWS_AS(extract_graph(src_of("a = 1\nb = a + 2\n")), NoModelFound);
  CHECK_THROWS_AS(extract_graph(src_of("")), NoModelFound);
}

TEST_CASE("syntax errors carry a line") {
  try {
    extract_graph(src_of("model = Sequential()\nif weird:\n    pass\n"));
    FAIL("expected SyntaxError");
  } catch (const SyntaxError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("layer-building loops beyond the cap are rejected") {
  ExtractOptions opts;
  opts.max_unroll = 64;
  CHECK_THROWS_AS(extract_graph(src_of("from keras.models import Sequential\n"
                                       "from keras.layers import Dense\n"
                                       "model = Sequential()\n"
                                       "for i in range(100):\n"
                                       "    model.add(Dense(8))\n"),
                                opts),
                  UnsupportedConstruct);
  // Training-style loops over large ranges pass through.
  ExtractResult ok = extract_graph(src_of("from keras.models import Sequential\n"
                                          "from keras.layers import Dense\n"
                                          "model = Sequential()\n"
                                          "model.add(Dense(8, input_shape=(4,)))\n"
                                          "model.compile(loss='mse', optimizer='sgd')\n"
                                          "for i in range(100000):\n"
                                          "    model.fit(x, y)\n"),
                                   opts);
  CHECK(single(ok.graph, NodeKind::Learner)->bool_attr("has_training_loop") == true);
}

TEST_CASE("a second sequential model is noted and skipped") {
  ExtractResult res = extract_graph(src_of("from keras.models import Sequential\n"
                                           "from keras.layers import Dense\n"
                                           "m1 = Sequential()\n"
                                           "m1.add(Dense(4, input_shape=(2,)))\n"
                                           "m2 = Sequential()\n"
                                           "m2.add(Dense(6))\n"
                                           "m2.add(Dense(6))\n"
                                           "m1.compile(loss='mse', optimizer='sgd')\n"
                                           "m1.fit(x, y)\n"));
  CHECK(res.notes.size() == 1);
  auto layers = chain_layers(res.graph);
  REQUIRE(layers.size() == 1);
  CHECK(layers[0]->int_attr("units") == 4);
}

TEST_CASE("sequential list form and wildcard imports work") {
  ExtractResult res =
      extract_graph(src_of("from keras.models import *\n"
                           "from keras.layers import *\n"
                           "model = Sequential([\n"
                           "    Dense(32, activation='relu', input_shape=(8,)),\n"
                           "    Dense(1, activation='sigmoid'),\n"
                           "])\n"
                           "model.compile(loss='binary_crossentropy', optimizer='adam')\n"
                           "model.fit(x, y)\n"));
  auto layers = chain_layers(res.graph);
  REQUIRE(layers.size() == 2);
  CHECK(layers[0]->int_attr("units") == 32);
  CHECK(layers[1]->text_attr("activation") == "sigmoid");
}

TEST_CASE("single-use function definitions are inlined") {
  ExtractResult res = extract_graph(src_of("from keras.models import Sequential\n"
                                           "from keras.layers import Dense\n"
                                           "def build_model(width):\n"
                                           "    m = Sequential()\n"
                                           "    m.add(Dense(width, input_shape=(4,)))\n"
                                           "    return m\n"
                                           "model = build_model(24)\n"
                                           "model.compile(loss='mse', optimizer='sgd')\n"
                                           "model.fit(x, y)\n"));
  auto layers = chain_layers(res.graph);
  REQUIRE(layers.size() == 1);
  CHECK(layers[0]->int_attr("units") == 24);
  CHECK(single(res.graph, NodeKind::Learner)->bool_attr("has_training_loop") == true);
}

TEST_CASE("golden dump of a minimal extracted graph") {
  ExtractResult res = extract_graph(
      src_of("from keras.models import Sequential\n"
             "from keras.layers import Dense\n"
             "model = Sequential()\n"
             "model.add(Dense(10, activation='softmax', input_shape=(4,)))\n"
             "model.compile(loss='mse', optimizer='sgd')\n"
             "model.fit(x, y)\n"));
  const char* expected =
      "0 Program @1 {dialect=\"keras\"}\n"
      "1 Architecture @3 {}\n"
      "2 InputLayer @4 {out_shape=[-1,4]}\n"
      "3 Layer @4 {activation=\"softmax\", bias_initializer=\"zeros\", "
      "kernel_initializer=\"glorot_uniform\", layer_type=\"dense\", nonlinear=true, "
      "units=10, use_bias=true}\n"
      "4 Learner @1 {dialect=\"keras\", grads_reset=true, has_initializer=true, "
      "has_training_loop=true, optimizer_linked=true}\n"
      "5 Loss @5 {logits_based=false, name=\"mse\"}\n"
      "6 Optimizer @1 {name=\"sgd\"}\n"
      "7 Data @1 {}\n"
      "8 Labels @1 {}\n"
      "0 -has_architecture-> 1\n"
      "0 -has_learner-> 4\n"
      "0 -has_data-> 7\n"
      "1 -starts_with-> 2\n"
      "1 -ends_with-> 8\n"
      "2 -next-> 3\n"
      "4 -has_loss-> 5\n"
      "4 -has_optimizer-> 6\n"
      "7 -has_labels-> 8\n";
  CHECK(debug_dump(res.graph) == expected);
}

TEST_CASE("extraction is deterministic") {
  std::string text =
      "from keras.models import Sequential\n"
      "from keras.layers import Dense, Dropout\n"
      "model = Sequential()\n"
      "model.add(Dense(64, activation='relu', input_shape=(10,)))\n"
      "model.add(Dropout(0.5))\n"
      "model.add(Dense(1, activation='sigmoid'))\n"
      "model.compile(loss='binary_crossentropy', optimizer='adam')\n"
      "model.fit(x, y)\n";
  ExtractResult a = extract_graph(src_of(text));
  ExtractResult b = extract_graph(src_of(text));
  CHECK(debug_dump(a.graph) == debug_dump(b.graph));
}

TEST_CASE("layer order matches source order on generated scripts") {
  std::mt19937 rng(11);
  const char* ctors[] = {"Dense(8)", "Dropout(0.5)", "Flatten()", "BatchNormalization()",
                         "Activation('relu')"};
  const char* kinds[] = {"dense", "dropout", "flatten", "batchnorm", "activation"};
  for (int trial = 0; trial < 25; ++trial) {
    std::string text =
        "from keras.models import Sequential\n"
        "from keras.layers import Dense, Dropout, Flatten, BatchNormalization, Activation\n"
        "model = Sequential()\n";
    std::vector<std::string> expected;
    int n = 1 + int(rng() % 8);
    for (int i = 0; i < n; ++i) {
      int pick = int(rng() % 5);
      text += "model.add(" + std::string(ctors[pick]) + ")\n";
      expected.push_back(kinds[pick]);
    }
    ExtractResult res = extract_graph(src_of(text));
    auto layers = chain_layers(res.graph);
    REQUIRE(layers.size() == expected.size());
    for (size_t i = 0; i < expected.size(); ++i)
      CHECK(layers[i]->text_attr("layer_type") == expected[i]);
  }
}

TEST_CASE("every layer node carries its source line") {
  ExtractResult res = extract_graph(src_of("from keras.models import Sequential\n"
                                           "from keras.layers import Dense\n"
                                           "model = Sequential()\n"
                                           "model.add(Dense(10, input_shape=(4,)))\n"
                                           "model.add(Dense(1))\n"));
  auto layers = chain_layers(res.graph);
  REQUIRE(layers.size() == 2);
  CHECK(layers[0]->source_line == 4);
  CHECK(layers[1]->source_line == 5);
}

TEST_CASE("keras loss objects resolve with from_logits") {
  ExtractResult res = extract_graph(
      src_of("import tensorflow as tf\n"
             "from tensorflow.keras.models import Sequential\n"
             "from tensorflow.keras.layers import Dense\n"
             "model = Sequential()\n"
             "model.add(Dense(10, input_shape=(4,)))\n"
             "model.compile(loss=tf.keras.losses.CategoricalCrossentropy(from_logits=True),\n"
             "              optimizer='adam')\n"
             "model.fit(x, y)\n"),
      ExtractOptions{Dialect::Keras, 64});
  const Node* loss = single(res.graph, NodeKind::Loss);
  CHECK(loss->text_attr("name") == "categorical_crossentropy");
  CHECK(loss->bool_attr("from_logits") == true);
}

TEST_CASE("a loss wrapped in reduce_mean keeps its identity") {
  ExtractResult res = extract_graph(
      src_of("import tensorflow as tf\n"
             "x = tf.placeholder(tf.float32, [None, 784])\n"
             "y_ = tf.placeholder(tf.float32, [None, 10])\n"
             "y = tf.layers.dense(x, 10)\n"
             "loss = tf.reduce_mean(\n"
             "    tf.nn.softmax_cross_entropy_with_logits(labels=y_, logits=y))\n"
             "train = tf.train.AdamOptimizer(1e-4).minimize(loss)\n"
             "init = tf.global_variables_initializer()\n"
             "sess = tf.Session()\n"
             "sess.run(init)\n"
             "for i in range(100):\n"
             "    sess.run(train)\n"));
  const Node* loss = single(res.graph, NodeKind::Loss);
  CHECK(loss->text_attr("name") == "softmax_cross_entropy");
  CHECK(loss->bool_attr("logits_based") == true);
  const Node* learner = single(res.graph, NodeKind::Learner);
  CHECK(learner->bool_attr("optimizer_linked") == true);
  CHECK(learner->bool_attr("has_initializer") == true);
  CHECK(learner->bool_attr("has_training_loop") == true);
}

TEST_CASE("initializer objects resolve like their string forms") {
  ParseResult r = parse_script(
      src_of("import tensorflow as tf\n"
             "from keras.layers import Dense\n"
             "a = Dense(8, kernel_initializer=tf.zeros_initializer())\n"
             "b = Dense(8, bias_initializer=keras.initializers.Constant(0.5))\n"
             "c = Dense(8, kernel_initializer=some_custom_thing())\n"));
  REQUIRE(r.calls.size() >= 3);
  LayerNodeSpec a = recognize_layer(r.calls[1], r.bindings);
  CHECK(a.attrs.at("kernel_initializer").as_text() == "zeros");
  LayerNodeSpec b = recognize_layer(r.calls[3], r.bindings);
  CHECK(b.attrs.at("bias_initializer").as_text() == "constant");
  LayerNodeSpec c = recognize_layer(r.calls[5], r.bindings);
  CHECK(c.attrs.find("kernel_initializer") == c.attrs.end());
}

TEST_CASE("tf reshape records a batch-inclusive target") {
  ExtractResult res = extract_graph(
      src_of("import tensorflow as tf\n"
             "x = tf.placeholder(tf.float32, [None, 784])\n"
             "img = tf.reshape(x, [-1, 28, 28, 1])\n"
             "flat = tf.layers.flatten(img)\n"));
  auto layers = chain_layers(res.graph);
  REQUIRE(layers.size() == 2);
  CHECK(layers[0]->text_attr("layer_type") == "reshape");
  CHECK(layers[0]->attr("target")->as_ints() == AttrValue::IntList{-1, 28, 28, 1});
  CHECK(layers[0]->bool_attr("target_includes_batch") == true);
}
