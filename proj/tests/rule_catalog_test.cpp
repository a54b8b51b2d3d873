#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <set>

#include "dlint/errors.hpp"
#include "dlint/rules.hpp"
#include "dlint/shape.hpp"
#include "test_graphs.hpp"

using namespace dlint;
using dlint::testing::ModelChain;

namespace {

AttributedGraph prepared(AttributedGraph g) {
  return annotate_structure(propagate_shapes(std::move(g)));
}

std::set<std::string> fault_codes(const AttributedGraph& g) {
  std::set<std::string> out;
  for (const FaultRecord& f : fault_records(g)) out.insert(f.code);
  return out;
}

std::set<std::string> check_codes(AttributedGraph g) {
  return fault_codes(run_to_fixpoint(prepared(std::move(g)), catalog()));
}

const RulePattern& rule(int id) {
  for (const RulePattern& r : catalog())
    if (r.id == id) return r;
  REQUIRE(false);
  return catalog().front();
}

}  // namespace

TEST_CASE("rule metadata is stable") {
  CHECK(rule_doc(4).code == "IPS-04");
  CHECK(rule_doc(4).severity == Severity::Error);
  CHECK(rule_doc(4).title == "Unnecessary Activation Removal");
  CHECK(rule_doc(22).code == "SI-22");
  CHECK(rule_doc(22).severity == Severity::Warning);
  CHECK(rule_doc(22).title == "Maximum Information Utilization");
  CHECK_THROWS_AS(rule_doc(24), UnknownRuleError);
  CHECK_THROWS_AS(rule_doc(0), UnknownRuleError);
}

TEST_CASE("categories partition the ids and severities follow them") {
  REQUIRE(rule_table().size() == 23);
  REQUIRE(catalog().size() == 23);
  for (const RuleMeta& m : rule_table()) {
    Category want = m.id <= 5    ? Category::IPS
                    : m.id <= 9  ? Category::UT
                    : m.id <= 14 ? Category::APIM
                                 : Category::SI;
    CHECK(m.category == want);
    Severity sev = m.id == 2 ? Severity::Warning
                   : m.category == Category::SI ? Severity::Warning
                                                : Severity::Error;
    CHECK(m.severity == sev);
    CHECK(rule_by_code(m.code) == &m);
  }
  for (size_t i = 0; i < catalog().size(); ++i) {
    CHECK(catalog()[i].id == int(i) + 1);
    CHECK(catalog()[i].code == rule_table()[i].code);
    CHECK(!catalog()[i].variants.empty());
  }
}

TEST_CASE("constant kernel initializer fires only rule 1") {
  ModelChain m({-1, 28, 28, 1});
  NodeId conv = m.conv(32, 3, "relu");
  m.g.node(conv).set("kernel_initializer", AttrValue::of_text("zeros"));
  m.conv(64, 3, "relu");
  m.flatten();
  m.dense(10, "softmax");
  m.set_loss("categorical_crossentropy");
  CHECK(check_codes(std::move(m.g)) == std::set<std::string>{"IPS-01"});
}

TEST_CASE("non-zero bias initializer fires rule 2") {
  ModelChain m({-1, 28, 28, 1});
  NodeId conv = m.conv(32, 3, "relu");
  m.g.node(conv).set("bias_initializer", AttrValue::of_text("ones"));
  m.flatten();
  m.dense(10, "softmax");
  m.set_loss("categorical_crossentropy");
  CHECK(check_codes(std::move(m.g)) == std::set<std::string>{"IPS-02"});
}

TEST_CASE("rule 3 fires on linear hidden layers and respects exemptions") {
  SUBCASE("hidden conv without activation") {
    ModelChain m({-1, 28, 28, 1});
    m.conv(32, 3, "none");
    m.flatten();
    m.dense(10, "softmax");
    m.set_loss("categorical_crossentropy");
    CHECK(check_codes(std::move(m.g)) == std::set<std::string>{"IPS-03"});
  }
  SUBCASE("a following activation layer satisfies the requirement") {
    ModelChain m({-1, 28, 28, 1});
    m.conv(32, 3, "none");
    m.activation("relu");
    m.flatten();
    m.dense(10, "softmax");
    m.set_loss("categorical_crossentropy");
    CHECK(check_codes(std::move(m.g)).empty());
  }
  SUBCASE("regression output layer is exempt") {
    ModelChain m({-1, 4});
    m.dense(16, "relu");
    m.dense(1, "none");
    m.set_loss("mse");
    CHECK(check_codes(std::move(m.g)).empty());
  }
  SUBCASE("logits-based loss exempts the output layer") {
    ModelChain m({-1, 4});
    m.dense(16, "relu");
    m.dense(10, "none");
    m.set_loss("softmax_cross_entropy", /*logits_based=*/true);
    CHECK(check_codes(std::move(m.g)).empty());
  }
  SUBCASE("classification output without activation fires 3 and 5") {
    ModelChain m({-1, 4});
    m.dense(16, "relu");
    m.dense(10, "none");
    m.set_loss("categorical_crossentropy");
    CHECK(check_codes(std::move(m.g)) == std::set<std::string>{"IPS-03", "IPS-05"});
  }
}

TEST_CASE("rule 4 inline variant: activation layer after an activated layer") {
  ModelChain m({-1, 28, 28, 1});
  m.conv(32, 3, "relu");
  m.activation("relu");
  m.flatten();
  m.dense(10, "softmax");
  m.set_loss("categorical_crossentropy");
  CHECK(check_codes(std::move(m.g)) == std::set<std::string>{"IPS-04"});
}

TEST_CASE("rule 5 variants") {
  SUBCASE("relu output under a probability loss") {
    ModelChain m({-1, 4});
    m.dense(16, "relu");
    m.dense(10, "relu");
    m.set_loss("categorical_crossentropy");
    CHECK(check_codes(std::move(m.g)) == std::set<std::string>{"IPS-05"});
  }
  SUBCASE("softmax over a single unit") {
    ModelChain m({-1, 4});
    m.dense(16, "relu");
    m.dense(1, "softmax");
    m.set_loss("categorical_crossentropy");
    CHECK(check_codes(std::move(m.g)) == std::set<std::string>{"IPS-05"});
  }
}

TEST_CASE("rule 10 compatibility matrix") {
  auto with_loss = [](const char* act, const char* loss, bool logits) {
    ModelChain m({-1, 4});
    m.dense(16, "relu");
    m.dense(2, act);
    m.set_loss(loss, logits);
    return check_codes(std::move(m.g));
  };
  CHECK(with_loss("softmax", "binary_crossentropy", false) ==
        std::set<std::string>{"APIM-10"});
  CHECK(with_loss("sigmoid", "binary_crossentropy", false).empty());
  CHECK(with_loss("sigmoid", "categorical_crossentropy", false) ==
        std::set<std::string>{"APIM-10"});
  CHECK(with_loss("softmax", "categorical_crossentropy", false).empty());
  CHECK(with_loss("softmax", "softmax_cross_entropy", true) ==
        std::set<std::string>{"APIM-10"});
  CHECK(with_loss("none", "softmax_cross_entropy", true).empty());
  CHECK(with_loss("softmax", "mse", false) == std::set<std::string>{"APIM-10"});
  CHECK(with_loss("sigmoid", "mse", false).empty());  // bounded regression is legitimate
  CHECK(with_loss("sigmoid", "hinge", false) == std::set<std::string>{"APIM-10"});
  CHECK(with_loss("tanh", "hinge", false).empty());
}

TEST_CASE("learner wiring rules 11, 12, 14") {
  auto flags = [](bool linked, bool loop, bool init, const char* dialect) {
    ModelChain m({-1, 4});
    m.dense(16, "relu");
    m.dense(10, "softmax");
    m.set_loss("categorical_crossentropy");
    m.set_learner_flags(linked, loop, init, dialect);
    return check_codes(std::move(m.g));
  };
  CHECK(flags(false, true, true, "keras") == std::set<std::string>{"APIM-11"});
  CHECK(flags(true, true, false, "tensorflow_v1") == std::set<std::string>{"APIM-12"});
  CHECK(flags(true, true, false, "keras").empty());  // framework-managed init
  CHECK(flags(true, false, true, "keras") == std::set<std::string>{"APIM-14"});
}

TEST_CASE("rule 13 is registered but cannot fire with v1 frontends") {
  ModelChain m({-1, 4});
  m.dense(10, "softmax");
  m.set_loss("categorical_crossentropy");
  AttributedGraph g = prepared(std::move(m.g));
  CHECK(find_matches(rule(13), g).empty());
  // It would fire if a frontend ever reported grads_reset=false.
  g.node(m.learner).set("grads_reset", AttrValue::of_bool(false));
  CHECK(find_matches(rule(13), g).size() == 1);
}

TEST_CASE("ordering rules 15, 16, 17") {
  SUBCASE("dropout before max-pooling") {
    ModelChain m({-1, 28, 28, 1});
    m.conv(32, 3, "relu");
    m.dropout(0.25);
    m.maxpool();
    m.flatten();
    m.dense(10, "softmax");
    m.set_loss("categorical_crossentropy");
    CHECK(check_codes(std::move(m.g)) == std::set<std::string>{"SI-15"});
  }
  SUBCASE("bias under batchnorm, activation transparent") {
    ModelChain m({-1, 28, 28, 1});
    m.conv(32, 3, "none");
    m.activation("relu");
    m.batchnorm();
    m.flatten();
    m.dense(10, "softmax");
    m.set_loss("categorical_crossentropy");
    CHECK(check_codes(std::move(m.g)) == std::set<std::string>{"SI-16"});
  }
  SUBCASE("dropout does not hide the bias from rule 16") {
    ModelChain m({-1, 28, 28, 1});
    m.conv(32, 3, "relu");
    m.dropout(0.3);
    m.batchnorm();
    m.flatten();
    m.dense(10, "softmax");
    m.set_loss("categorical_crossentropy");
    CHECK(check_codes(std::move(m.g)) == std::set<std::string>{"SI-17"});
  }
}

TEST_CASE("monotone sequence rules against a brute-force pairwise oracle") {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 2 + int(rng() % 6);
    std::vector<std::int64_t> filters, kernels;
    ModelChain m({-1, 512, 512, 3});
    for (int i = 0; i < n; ++i) {
      filters.push_back(1 + std::int64_t(rng() % 64));
      kernels.push_back(1 + std::int64_t(rng() % 7));
      m.conv(filters.back(), kernels.back(), "relu");
      if (rng() % 2) m.maxpool(1 + std::int64_t(rng() % 2));
    }
    m.flatten();
    m.dense(10, "softmax");
    m.set_loss("categorical_crossentropy");

    bool filters_decrease = false, kernels_decrease = false;
    for (int i = 0; i + 1 < n; ++i) {
      filters_decrease = filters_decrease || filters[i + 1] < filters[i];
      kernels_decrease =
          kernels_decrease || kernels[i + 1] * kernels[i + 1] < kernels[i] * kernels[i];
    }
    std::set<std::string> codes = check_codes(std::move(m.g));
    CHECK(codes.count("SI-20") == size_t(filters_decrease));
    CHECK(codes.count("SI-21") == size_t(kernels_decrease));
  }
}

TEST_CASE("sequence faults anchor at the first layer of the first offending pair") {
  ModelChain m({-1, 256, 256, 3});
  NodeId first = m.conv(224, 11, "relu");
  m.conv(55, 5, "relu");
  m.conv(13, 3, "relu");
  m.flatten();
  m.dense(2, "sigmoid");
  m.set_loss("binary_crossentropy");
  AttributedGraph final_graph = run_to_fixpoint(prepared(std::move(m.g)), catalog());
  int si20 = 0, si21 = 0;
  for (const FaultRecord& f : fault_records(final_graph)) {
    if (f.code == "SI-20") {
      ++si20;
      CHECK(f.anchor == first);
    }
    if (f.code == "SI-21") {
      ++si21;
      CHECK(f.anchor == first);
    }
  }
  CHECK(si20 == 1);
  CHECK(si21 == 1);
}

TEST_CASE("rule 18 fires on growing hidden widths and growing areas") {
  SUBCASE("hidden dense widths grow") {
    ModelChain m({-1, 64});
    m.dense(128, "relu");
    m.dense(512, "relu");
    m.dense(10, "softmax");
    m.set_loss("categorical_crossentropy");
    CHECK(check_codes(std::move(m.g)) == std::set<std::string>{"SI-18"});
  }
  SUBCASE("output layer width is exempt") {
    ModelChain m({-1, 64});
    m.dense(128, "relu");
    m.dense(512, "softmax");
    m.set_loss("categorical_crossentropy");
    CHECK(check_codes(std::move(m.g)).empty());
  }
}

TEST_CASE("rule 19 flags average pooling and strided convolution") {
  SUBCASE("average pooling") {
    ModelChain m({-1, 28, 28, 1});
    m.conv(32, 3, "relu");
    m.avgpool();
    m.flatten();
    m.dense(10, "softmax");
    m.set_loss("categorical_crossentropy");
    CHECK(check_codes(std::move(m.g)) == std::set<std::string>{"SI-19"});
  }
  SUBCASE("strided convolution") {
    ModelChain m({-1, 28, 28, 1});
    m.conv(32, 3, "relu", /*stride=*/2);
    m.flatten();
    m.dense(10, "softmax");
    m.set_loss("categorical_crossentropy");
    CHECK(check_codes(std::move(m.g)) == std::set<std::string>{"SI-19"});
  }
}

TEST_CASE("rule 22 threshold arithmetic on generated stacks") {
  for (int convs = 0; convs <= 15; ++convs) {
    for (int pools = 0; pools <= 15; ++pools) {
      ModelChain m({-1, 1 << 16, 1 << 16, 3});
      for (int i = 0; i < convs; ++i) m.conv(8, 1, "relu");
      for (int i = 0; i < pools; ++i) m.maxpool(1);
      AttributedGraph g = prepared(std::move(m.g));
      bool fired = !find_matches(rule(22), g).empty();
      bool expected = (convs + pools >= 10) && (3 * pools > convs + pools);
      CHECK(fired == expected);
    }
  }
}

TEST_CASE("rule 23 homogeneity detection") {
  SUBCASE("deep stack with all-distinct convolutions fires") {
    ModelChain m({-1, 128, 128, 3});
    std::int64_t filters[] = {16, 24, 32, 48, 64, 96, 128};
    for (int i = 0; i < 7; ++i) {
      m.conv(filters[i], 3, "relu");
      if (i % 2 == 1) m.maxpool();
    }
    CHECK(7 + 3 >= 10);
    m.flatten();
    m.dense(10, "softmax");
    m.set_loss("categorical_crossentropy");
    std::set<std::string> codes = check_codes(std::move(m.g));
    CHECK(codes.count("SI-23") == 1);
  }
  SUBCASE("homogeneous pairs keep a deep stack quiet") {
    ModelChain m({-1, 128, 128, 3});
    std::int64_t filters[] = {32, 32, 64, 64, 128, 128, 128};
    for (int i = 0; i < 7; ++i) {
      m.conv(filters[i], 3, "relu");
      if (i % 2 == 1) m.maxpool();
    }
    m.flatten();
    m.dense(10, "softmax");
    m.set_loss("categorical_crossentropy");
    std::set<std::string> codes = check_codes(std::move(m.g));
    CHECK(codes.count("SI-23") == 0);
  }
  SUBCASE("a pooling layer breaks a homogeneous run") {
    ModelChain m({-1, 4096, 4096, 3});
    for (int i = 0; i < 5; ++i) {
      m.conv(32, 3, "relu");
      m.maxpool();
    }
    m.flatten();
    m.dense(10, "softmax");
    m.set_loss("categorical_crossentropy");
    std::set<std::string> codes = check_codes(std::move(m.g));
    CHECK(codes.count("SI-23") == 1);
    CHECK(codes.count("SI-22") == 1);  // 5 pools in a 10-deep stack
  }
}

TEST_CASE("unknown layer kinds are skipped, not reported") {
  ModelChain m({-1, 28, 28, 1});
  m.conv(32, 3, "relu");
  m.layer("unknown");
  m.flatten();
  m.dense(10, "softmax");
  m.set_loss("categorical_crossentropy");
  CHECK(check_codes(std::move(m.g)).empty());
}
