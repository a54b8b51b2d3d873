#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dlint/analysis.hpp"

namespace {

dlint::AnalysisOptions base_options() {
  dlint::AnalysisOptions opts;
  if (const char* cfg = std::getenv("DLINT_CONFIG"))
    dlint::apply_config(dlint::load_config_file(cfg), opts);
  return opts;
}

void add_common_flags(CLI::App* cmd, std::string& format, std::string& disable,
                      std::string& only, std::string& dialect, int& max_unroll, bool& trace) {
  cmd->add_option("--format", format, "Output format: text or json")
      ->check(CLI::IsMember({"text", "json"}));
  cmd->add_option("--disable", disable, "Comma-separated rule codes to disable");
  cmd->add_option("--only", only, "Restrict to one category (IPS, UT, APIM, SI) or code");
  cmd->add_option("--dialect", dialect, "Source dialect: auto, keras or tf1")
      ->check(CLI::IsMember({"auto", "keras", "tf1"}));
  cmd->add_option("--max-unroll", max_unroll, "Literal range() unroll cap");
  cmd->add_flag("--trace", trace, "Print one line per rule application");
}

void merge_flags(dlint::AnalysisOptions& opts, const std::string& format,
                 const std::string& disable, const std::string& only,
                 const std::string& dialect, int max_unroll, bool trace) {
  if (!format.empty()) opts.format = format == "json" ? dlint::Format::Json : dlint::Format::Text;
  if (!disable.empty()) {
    std::string cur;
    for (char c : disable + ",") {
      if (c == ',') {
        if (!cur.empty()) opts.disabled.insert(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
  }
  if (!only.empty()) opts.only = only;
  if (dialect == "keras") opts.dialect = dlint::Dialect::Keras;
  if (dialect == "tf1") opts.dialect = dlint::Dialect::TensorFlowV1;
  if (max_unroll > 0) opts.max_unroll = max_unroll;
  if (trace) opts.trace = true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dlint - static checks for deep-learning training scripts"};
  app.require_subcommand(1);

  std::string format, disable, only, dialect;
  int max_unroll = 0;
  bool trace = false;

  auto* check = app.add_subcommand("check", "Analyze scripts and report findings");
  std::vector<std::string> paths;
  check->add_option("paths", paths, "Python scripts to analyze")->required();
  add_common_flags(check, format, disable, only, dialect, max_unroll, trace);

  auto* eval = app.add_subcommand("eval", "Score the tool against a labeled corpus");
  std::string manifest;
  eval->add_option("manifest", manifest, "Corpus manifest (one case per line)")->required();
  add_common_flags(eval, format, disable, only, dialect, max_unroll, trace);

  auto* list = app.add_subcommand("list-rules", "Print the rule catalog");
  add_common_flags(list, format, disable, only, dialect, max_unroll, trace);

  CLI11_PARSE(app, argc, argv);

  dlint::AnalysisOptions opts = base_options();
  merge_flags(opts, format, disable, only, dialect, max_unroll, trace);

  if (check->parsed()) return dlint::run_check(paths, opts, std::cout);
  if (eval->parsed()) return dlint::run_eval(manifest, opts, std::cout);
  return dlint::run_list_rules(opts.only, opts.format, std::cout);
}
