#ifndef DLINT_REPORT_HPP
#define DLINT_REPORT_HPP

#include <optional>
#include <string>
#include <vector>

#include "dlint/graph.hpp"
#include "dlint/rules.hpp"
#include "dlint/script.hpp"

namespace dlint {

enum class Format { Text, Json };

struct Diagnostic {
  std::string code;
  Severity severity = Severity::Error;
  std::string message;
  std::string rule_title;
  std::string file;
  std::optional<int> line;
  std::string remediation;

  bool operator==(const Diagnostic&) const = default;
};

struct Report {
  std::string file;
  std::vector<Diagnostic> diagnostics;
  int errors = 0;
  int warnings = 0;

  void recount();
};

// One diagnostic per Fault node of a checked graph, ordered by
// (file, line, severity, code); errors precede warnings at equal positions.
Report collect(const AttributedGraph& final_graph, const ScriptSource& src);

void sort_diagnostics(std::vector<Diagnostic>& diags);

// text: one line per diagnostic `file:line: [CODE] severity: message
// (hint: remediation)`. json: versioned object {version, file, summary,
// diagnostics}. Both renderings are deterministic.
std::string render(const Report& report, Format format);

// Inverse of the json rendering; used by consumers and the round-trip tests.
Report parse_report_json(const std::string& text);

}  // namespace dlint

#endif
