#ifndef DLINT_ANALYSIS_HPP
#define DLINT_ANALYSIS_HPP

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dlint/report.hpp"

namespace dlint {

struct AnalysisOptions {
  Format format = Format::Text;
  std::set<std::string> disabled;   // codes, e.g. "SI-19"
  std::string only;                 // category or code filter, empty = all
  Dialect dialect = Dialect::Auto;
  int max_unroll = 64;
  bool trace = false;
};

// Exit codes of the check pipeline.
inline constexpr int kExitClean = 0;
inline constexpr int kExitWarnings = 1;
inline constexpr int kExitErrors = 2;
inline constexpr int kExitToolError = 3;

struct FileOutcome {
  std::string path;
  Report report;
  bool tool_error = false;
  std::string trace_log;
};

// Full pipeline on in-memory source; never throws. Analysis failures come
// back as a TOOL-ERR diagnostic with tool_error set.
FileOutcome analyze_source(const ScriptSource& src, const AnalysisOptions& opts);

// Rules surviving the --only/--disable filters.
std::vector<RulePattern> filtered_catalog(const AnalysisOptions& opts);

int exit_code_for(const std::vector<FileOutcome>& outcomes);

// `check` over files: analyzes in parallel, renders ordered by path.
int run_check(const std::vector<std::string>& paths, const AnalysisOptions& opts,
              std::ostream& out);

struct CorpusCase {
  std::string path;                       // resolved against the manifest dir
  std::set<std::string> expected;         // codes
  std::map<std::string, int> line_hints;  // code -> expected line
  std::set<std::string> tags;             // e.g. allow-extra
};

std::vector<CorpusCase> load_manifest(const std::string& manifest_path);

struct RuleTally {
  int tp = 0, fp = 0, fn = 0;
};

struct EvalSummary {
  std::map<std::string, RuleTally> per_rule;
  int tp = 0, fp = 0, fn = 0;
  std::optional<double> recall() const;
  std::optional<double> precision() const;
};

EvalSummary evaluate_corpus(const std::vector<CorpusCase>& cases, const AnalysisOptions& opts,
                            std::ostream* table_out);

// `eval` over a manifest; prints the per-case table plus the summary.
int run_eval(const std::string& manifest_path, const AnalysisOptions& opts, std::ostream& out);

int run_list_rules(const std::string& only, Format format, std::ostream& out);

// Flat key=value config file support (DLINT_CONFIG).
std::map<std::string, std::string> load_config_file(const std::string& path);
void apply_config(const std::map<std::string, std::string>& kv, AnalysisOptions& opts);

}  // namespace dlint

#endif
