#include "dlint/report.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"

namespace dlint {

void Report::recount() {
  errors = 0;
  warnings = 0;
  for (const Diagnostic& d : diagnostics)
    (d.severity == Severity::Error ? errors : warnings) += 1;
}

void sort_diagnostics(std::vector<Diagnostic>& diags) {
  std::sort(diags.begin(), diags.end(), [](const Diagnostic& a, const Diagnostic& b) {
    if (a.file != b.file) return a.file < b.file;
    int la = a.line.value_or(INT32_MAX), lb = b.line.value_or(INT32_MAX);
    if (la != lb) return la < lb;
    if (a.severity != b.severity) return a.severity == Severity::Error;
    return a.code < b.code;
  });
}

Report collect(const AttributedGraph& final_graph, const ScriptSource& src) {
  Report rep;
  rep.file = src.path;
  for (const FaultRecord& f : fault_records(final_graph)) {
    Diagnostic d;
    d.code = f.code;
    d.message = f.message;
    d.file = src.path;
    if (final_graph.has_node(f.anchor)) d.line = final_graph.node(f.anchor).source_line;
    if (const RuleMeta* meta = rule_by_code(f.code)) {
      d.severity = meta->severity;
      d.rule_title = meta->title;
      d.remediation = meta->remediation;
    }
    rep.diagnostics.push_back(std::move(d));
  }
  sort_diagnostics(rep.diagnostics);
  rep.recount();
  return rep;
}

std::string render(const Report& report, Format format) {
  if (format == Format::Text) {
    std::ostringstream os;
    for (const Diagnostic& d : report.diagnostics) {
      os << d.file << ":";
      if (d.line) os << *d.line << ":";
      os << " [" << d.code << "] " << to_string(d.severity) << ": " << d.message;
      if (!d.remediation.empty()) os << " (hint: " << d.remediation << ")";
      os << "\n";
    }
    os << report.file << ": " << report.errors << " error(s), " << report.warnings
       << " warning(s)\n";
    return os.str();
  }

  nlohmann::ordered_json j;
  j["version"] = 1;
  j["file"] = report.file;
  j["summary"] = {{"errors", report.errors}, {"warnings", report.warnings}};
  j["diagnostics"] = nlohmann::ordered_json::array();
  for (const Diagnostic& d : report.diagnostics) {
    nlohmann::ordered_json e;
    e["code"] = d.code;
    e["severity"] = to_string(d.severity);
    e["message"] = d.message;
    e["rule"] = d.rule_title;
    e["file"] = d.file;
    if (d.line)
      e["line"] = *d.line;
    else
      e["line"] = nullptr;
    e["remediation"] = d.remediation;
    j["diagnostics"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

Report parse_report_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  Report rep;
  rep.file = j.at("file").get<std::string>();
  rep.errors = j.at("summary").at("errors").get<int>();
  rep.warnings = j.at("summary").at("warnings").get<int>();
  for (const auto& e : j.at("diagnostics")) {
    Diagnostic d;
    d.code = e.at("code").get<std::string>();
    d.severity = e.at("severity").get<std::string>() == "error" ? Severity::Error
                                                                : Severity::Warning;
    d.message = e.at("message").get<std::string>();
    d.rule_title = e.at("rule").get<std::string>();
    d.file = e.at("file").get<std::string>();
    if (!e.at("line").is_null()) d.line = e.at("line").get<int>();
    d.remediation = e.at("remediation").get<std::string>();
    rep.diagnostics.push_back(std::move(d));
  }
  return rep;
}

}  // namespace dlint
