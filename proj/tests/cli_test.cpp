#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dlint/analysis.hpp"
#include "dlint/errors.hpp"

using namespace dlint;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path dir;
  TempDir() {
    dir = fs::temp_directory_path() / ("dlint_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~TempDir() { fs::remove_all(dir); }
  std::string write(const std::string& name, const std::string& text) {
    fs::path p = dir / name;
    std::ofstream(p) << text;
    return p.string();
  }
};

const char* kCleanScript =
    "from keras.models import Sequential\n"
    "from keras.layers import Dense\n"
    "model = Sequential()\n"
    "model.add(Dense(16, activation='relu', input_shape=(4,)))\n"
    "model.add(Dense(3, activation='softmax'))\n"
    "model.compile(loss='categorical_crossentropy', optimizer='adam')\n"
    "model.fit(x, y)\n";

const char* kAvgPoolScript =
    "from keras.models import Sequential\n"
    "from keras.layers import Conv2D, AveragePooling2D, Flatten, Dense\n"
    "model = Sequential()\n"
    "model.add(Conv2D(16, (3, 3), activation='relu', input_shape=(16, 16, 1)))\n"
    "model.add(AveragePooling2D((2, 2)))\n"
    "model.add(Flatten())\n"
    "model.add(Dense(3, activation='softmax'))\n"
    "model.compile(loss='categorical_crossentropy', optimizer='adam')\n"
    "model.fit(x, y)\n"
    "\n";

const char* kBadLossScript =
    "from keras.models import Sequential\n"
    "from keras.layers import Dense\n"
    "model = Sequential()\n"
    "model.add(Dense(16, activation='relu', input_shape=(4,)))\n"
    "model.add(Dense(3, activation='softmax'))\n"
    "model.compile(loss='binary_crossentropy', optimizer='adam')\n"
    "model.fit(x, y)\n";

ScriptSource src_of(const std::string& text) {
  ScriptSource s;
  s.path = "mem.py";
  s.text = text;
  return s;
}

}  // namespace

TEST_CASE("exit codes track the worst finding") {
  AnalysisOptions opts;
  CHECK(exit_code_for({analyze_source(src_of(kCleanScript), opts)}) == kExitClean);
  CHECK(exit_code_for({analyze_source(src_of(kAvgPoolScript), opts)}) == kExitWarnings);
  CHECK(exit_code_for({analyze_source(src_of(kBadLossScript), opts)}) == kExitErrors);
  CHECK(exit_code_for({analyze_source(src_of("def broken(:\n"), opts)}) == kExitToolError);
}

TEST_CASE("analysis failures surface as TOOL-ERR diagnostics, never throws") {
  AnalysisOptions opts;
  FileOutcome out = analyze_source(src_of("class X:\n    pass\n"), opts);
  CHECK(out.tool_error);
  REQUIRE(out.report.diagnostics.size() == 1);
  CHECK(out.report.diagnostics[0].code == "TOOL-ERR");
}

TEST_CASE("disabling a code suppresses its findings") {
  AnalysisOptions opts;
  opts.disabled.insert("SI-19");
  FileOutcome out = analyze_source(src_of(kAvgPoolScript), opts);
  CHECK(out.report.diagnostics.empty());
  CHECK(exit_code_for({out}) == kExitClean);
}

TEST_CASE("only-category filter keeps nine SI rules") {
  AnalysisOptions opts;
  opts.only = "SI";
  std::vector<RulePattern> rules = filtered_catalog(opts);
  CHECK(rules.size() == 9);
  for (const RulePattern& r : rules) CHECK(r.id >= 15);

  opts.only = "UT-07";
  CHECK(filtered_catalog(opts).size() == 1);
}

TEST_CASE("list-rules prints 23 rows and honors filters") {
  std::ostringstream os;
  run_list_rules("", Format::Text, os);
  std::string text = os.str();
  int rows = 0;
  for (char c : text)
    if (c == '\n') ++rows;
  CHECK(rows == 23);

  std::ostringstream si;
  run_list_rules("SI", Format::Text, si);
  rows = 0;
  for (char c : si.str())
    if (c == '\n') ++rows;
  CHECK(rows == 9);

  std::ostringstream js;
  run_list_rules("", Format::Json, js);
  CHECK(js.str().find("\"IPS-01\"") != std::string::npos);
}

TEST_CASE("check renders deterministically and orders files by path") {
  TempDir tmp;
  std::string b = tmp.write("b.py", kAvgPoolScript);
  std::string a = tmp.write("a.py", kBadLossScript);
  AnalysisOptions opts;
  std::ostringstream o1, o2;
  int c1 = run_check({b, a}, opts, o1);
  int c2 = run_check({b, a}, opts, o2);
  CHECK(c1 == kExitErrors);
  CHECK(c1 == c2);
  CHECK(o1.str() == o2.str());
  CHECK(o1.str().find(a) < o1.str().find(b));
}

TEST_CASE("manifest loading validates codes and rejects empties") {
  TempDir tmp;
  std::string empty = tmp.write("empty.tsv", "\n# nothing\n");
  CHECK_THROWS_AS(load_manifest(empty), ManifestError);

  std::string bad = tmp.write("bad.tsv", "case.py\tNOT-A-CODE\n");
  CHECK_THROWS_AS(load_manifest(bad), ManifestError);

  std::string good = tmp.write("good.tsv",
                               "case.py\tUT-06,SI-19\tUT-06=12\tallow-extra\n"
                               "clean.py\t-\n");
  std::vector<CorpusCase> cases = load_manifest(good);
  REQUIRE(cases.size() == 2);
  CHECK(cases[0].expected == std::set<std::string>{"UT-06", "SI-19"});
  CHECK(cases[0].line_hints.at("UT-06") == 12);
  CHECK(cases[0].tags.count("allow-extra") == 1);
  CHECK(cases[1].expected.empty());
}

TEST_CASE("eval arithmetic: one missed case halves recall") {
  TempDir tmp;
  tmp.write("hit.py", kAvgPoolScript);
  tmp.write("miss.py", kCleanScript);
  std::string manifest = tmp.write("m.tsv",
                                   "hit.py\tSI-19\n"
                                   "miss.py\tUT-06\n");
  AnalysisOptions opts;
  EvalSummary sum = evaluate_corpus(load_manifest(manifest), opts, nullptr);
  CHECK(sum.tp == 1);
  CHECK(sum.fn == 1);
  CHECK(sum.fp == 0);
  REQUIRE(sum.recall());
  CHECK(*sum.recall() == doctest::Approx(0.5));
  REQUIRE(sum.precision());
  CHECK(*sum.precision() == doctest::Approx(1.0));
}

TEST_CASE("recall and precision go n/a on empty denominators") {
  EvalSummary sum;
  CHECK(!sum.recall());
  CHECK(!sum.precision());
}

TEST_CASE("unexpected findings count as false positives unless allow-extra") {
  TempDir tmp;
  tmp.write("warny.py", kAvgPoolScript);
  std::string strict = tmp.write("strict.tsv", "warny.py\t-\n");
  AnalysisOptions opts;
  EvalSummary s1 = evaluate_corpus(load_manifest(strict), opts, nullptr);
  CHECK(s1.fp == 1);

  std::string lax = tmp.write("lax.tsv", "warny.py\t-\t\tallow-extra\n");
  EvalSummary s2 = evaluate_corpus(load_manifest(lax), opts, nullptr);
  CHECK(s2.fp == 0);
}

TEST_CASE("config file keys merge into options") {
  TempDir tmp;
  std::string cfg = tmp.write("cfg", "format=json\ndisable=SI-19,SI-20\nmax_unroll=8\n"
                                     "dialect=tf1\ntrace=1\n# comment\n");
  AnalysisOptions opts;
  apply_config(load_config_file(cfg), opts);
  CHECK(opts.format == Format::Json);
  CHECK(opts.disabled == std::set<std::string>{"SI-19", "SI-20"});
  CHECK(opts.max_unroll == 8);
  CHECK(opts.dialect == Dialect::TensorFlowV1);
  CHECK(opts.trace);
}

TEST_CASE("missing files become TOOL-ERR with exit 3") {
  AnalysisOptions opts;
  std::ostringstream os;
  CHECK(run_check({"/nonexistent/nope.py"}, opts, os) == kExitToolError);
  CHECK(os.str().find("TOOL-ERR") != std::string::npos);
}

TEST_CASE("trace flag emits one line per application") {
  AnalysisOptions opts;
  opts.trace = true;
  FileOutcome out = analyze_source(src_of(kAvgPoolScript), opts);
  CHECK(out.trace_log.find("SI-19") != std::string::npos);
}

namespace {

int run_binary(const std::string& args, std::string* output) {
  std::string cmd = std::string(DLINT_BIN) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  char buf[512];
  output->clear();
  while (fgets(buf, sizeof buf, pipe)) *output += buf;
  int status = ::pclose(pipe);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("the installed binary honors the exit-code and flag contract") {
  TempDir tmp;
  std::string clean = tmp.write("clean.py", kCleanScript);
  std::string warny = tmp.write("warny.py", kAvgPoolScript);
  std::string bad = tmp.write("bad.py", kBadLossScript);
  std::string broken = tmp.write("broken.py", "def broken(:\n");

  std::string out;
  CHECK(run_binary("check " + clean, &out) == 0);
  CHECK(run_binary("check " + warny, &out) == 1);
  CHECK(out.find("[SI-19] warning") != std::string::npos);
  CHECK(run_binary("check " + bad, &out) == 2);
  CHECK(run_binary("check " + broken, &out) == 3);
  CHECK(out.find("TOOL-ERR") != std::string::npos);

  CHECK(run_binary("check --disable SI-19 " + warny, &out) == 0);
  CHECK(run_binary("check --format json " + bad, &out) == 2);
  CHECK(out.find("\"version\": 1") != std::string::npos);

  CHECK(run_binary("list-rules", &out) == 0);
  CHECK(out.find("SI-23") != std::string::npos);

  std::string manifest = tmp.write("m.tsv", "warny.py\tSI-19\n");
  CHECK(run_binary("eval " + manifest, &out) == 0);
  CHECK(out.find("recall=100.0%") != std::string::npos);

  std::string cfg = tmp.write("dlint.cfg", "disable=SI-19\n");
  std::string env_cmd = "DLINT_CONFIG=" + cfg + " " + DLINT_BIN + " check " + warny + " 2>&1";
  FILE* pipe = ::popen(env_cmd.c_str(), "r");
  REQUIRE(pipe);
  char buf[256];
  std::string env_out;
  while (fgets(buf, sizeof buf, pipe)) env_out += buf;
  int status = ::pclose(pipe);
  CHECK(WEXITSTATUS(status) == 0);
}

TEST_CASE("an activated output feeding a logits-based loss is reported") {
  AnalysisOptions opts;
  FileOutcome out = analyze_source(
      src_of("import tensorflow as tf\n"
             "x = tf.placeholder(tf.float32, [None, 784])\n"
             "y_ = tf.placeholder(tf.float32, [None, 10])\n"
             "hidden = tf.layers.dense(x, 128, activation=tf.nn.relu)\n"
             "logits = tf.layers.dense(hidden, 10)\n"
             "probs = tf.nn.softmax(logits)\n"
             "loss = tf.losses.softmax_cross_entropy(onehot_labels=y_, logits=probs)\n"
             "train = tf.train.AdamOptimizer(1e-4).minimize(loss)\n"
             "init = tf.global_variables_initializer()\n"
             "with tf.Session() as sess:\n"
             "    sess.run(init)\n"
             "    for i in range(100):\n"
             "        sess.run(train)\n"),
      opts);
  REQUIRE(out.report.diagnostics.size() == 1);
  CHECK(out.report.diagnostics[0].code == "APIM-10");
}

TEST_CASE("bundled baselines behave at the binary level") {
  std::string out;
  CHECK(run_binary("check " DLINT_CORPUS_DIR "/clean/lenet_tf.py", &out) == 0);
  CHECK(run_binary("check " DLINT_CORPUS_DIR "/clean/vgg16_keras.py", &out) == 0);
  CHECK(run_binary("check " DLINT_CORPUS_DIR "/cases/shrinking_cnn.py", &out) == 2);
  CHECK(out.find("[APIM-10]") != std::string::npos);
  CHECK(out.find("[SI-20]") != std::string::npos);
  CHECK(out.find("[SI-21]") != std::string::npos);
}
