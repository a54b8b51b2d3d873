#include "dlint/analysis.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "dlint/errors.hpp"
#include "dlint/frontend.hpp"
#include "dlint/shape.hpp"

namespace dlint {

std::vector<RulePattern> filtered_catalog(const AnalysisOptions& opts) {
  std::vector<RulePattern> rules;
  for (const RulePattern& r : catalog()) {
    const RuleMeta& m = rule_doc(r.id);
    if (!opts.only.empty()) {
      bool keep = opts.only == m.code || opts.only == to_string(m.category);
      if (!keep) continue;
    }
    if (opts.disabled.count(m.code)) continue;
    rules.push_back(r);
  }
  return rules;
}

FileOutcome analyze_source(const ScriptSource& src, const AnalysisOptions& opts) {
  FileOutcome out;
  out.path = src.path;
  out.report.file = src.path;
  try {
    ExtractOptions eopts;
    eopts.dialect = opts.dialect;
    eopts.max_unroll = opts.max_unroll;
    ExtractResult extracted = extract_graph(src, eopts);
    AttributedGraph g = propagate_shapes(std::move(extracted.graph));
    g = annotate_structure(std::move(g));

    std::ostringstream trace_os;
    TraceFn trace = nullptr;
    if (opts.trace) {
      trace = [&trace_os](int rule_id, NodeId anchor, const std::string& code) {
        trace_os << "(" << rule_id << ", " << anchor.value << ", " << code << ")\n";
      };
    }
    AttributedGraph final_graph = run_to_fixpoint(std::move(g), filtered_catalog(opts), trace);
    out.report = collect(final_graph, src);
    out.trace_log = trace_os.str();

    for (const std::string& note : extracted.notes) {
      Diagnostic d;
      d.code = "TOOL-WARN";
      d.severity = Severity::Warning;
      d.message = note;
      d.file = src.path;
      out.report.diagnostics.push_back(std::move(d));
    }
    sort_diagnostics(out.report.diagnostics);
    out.report.recount();
  } catch (const AnalysisError& e) {
    out.tool_error = true;
    Diagnostic d;
    d.code = "TOOL-ERR";
    d.severity = Severity::Error;
    d.message = e.what();
    d.file = src.path;
    if (e.line() > 0) d.line = e.line();
    out.report.diagnostics = {std::move(d)};
    out.report.recount();
  } catch (const std::exception& e) {
    out.tool_error = true;
    Diagnostic d;
    d.code = "TOOL-ERR";
    d.severity = Severity::Error;
    d.message = std::string("internal error: ") + e.what();
    d.file = src.path;
    out.report.diagnostics = {std::move(d)};
    out.report.recount();
  }
  return out;
}

int exit_code_for(const std::vector<FileOutcome>& outcomes) {
  int code = kExitClean;
  for (const FileOutcome& o : outcomes) {
    if (o.tool_error) return kExitToolError;
    if (o.report.errors > 0)
      code = std::max(code, kExitErrors);
    else if (o.report.warnings > 0)
      code = std::max(code, kExitWarnings);
  }
  return code;
}

namespace {

ScriptSource read_source(const std::string& path, Dialect dialect) {
  ScriptSource src;
  src.path = path;
  src.dialect = dialect;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AnalysisError("cannot read file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  src.text = buf.str();
  return src;
}

FileOutcome analyze_path(const std::string& path, const AnalysisOptions& opts) {
  try {
    return analyze_source(read_source(path, opts.dialect), opts);
  } catch (const std::exception& e) {
    FileOutcome out;
    out.path = path;
    out.tool_error = true;
    Diagnostic d;
    d.code = "TOOL-ERR";
    d.severity = Severity::Error;
    d.message = e.what();
    d.file = path;
    out.report.file = path;
    out.report.diagnostics = {std::move(d)};
    out.report.recount();
    return out;
  }
}

}  // namespace

int run_check(const std::vector<std::string>& paths, const AnalysisOptions& opts,
              std::ostream& out) {
  std::vector<FileOutcome> outcomes;
  if (paths.size() <= 1) {
    for (const std::string& p : paths) outcomes.push_back(analyze_path(p, opts));
  } else {
    std::vector<std::future<FileOutcome>> futures;
    futures.reserve(paths.size());
    for (const std::string& p : paths)
      futures.push_back(std::async(std::launch::async,
                                   [&opts, p]() { return analyze_path(p, opts); }));
    for (auto& f : futures) outcomes.push_back(f.get());
  }
  std::stable_sort(outcomes.begin(), outcomes.end(),
                   [](const FileOutcome& a, const FileOutcome& b) { return a.path < b.path; });

  if (opts.format == Format::Json && outcomes.size() > 1) {
    out << "[\n";
    for (size_t i = 0; i < outcomes.size(); ++i) {
      std::string body = render(outcomes[i].report, Format::Json);
      if (!body.empty() && body.back() == '\n') body.pop_back();
      out << body << (i + 1 < outcomes.size() ? ",\n" : "\n");
    }
    out << "]\n";
  } else {
    for (const FileOutcome& o : outcomes) {
      if (opts.trace && !o.trace_log.empty()) out << o.trace_log;
      out << render(o.report, opts.format);
    }
  }
  return exit_code_for(outcomes);
}

// ---------------------------------------------------------------------------
// Corpus evaluation
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  size_t b = s.find_last_not_of(" \t\r\n");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

std::string dirname_of(const std::string& path) {
  size_t slash = path.find_last_of('/');
  return slash == std::string::npos ? "." : path.substr(0, slash);
}

}  // namespace

std::vector<CorpusCase> load_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ManifestError("cannot read manifest: " + manifest_path);
  std::string dir = dirname_of(manifest_path);
  std::vector<CorpusCase> cases;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<std::string> cols = split(line, '\t');
    CorpusCase c;
    c.path = dir + "/" + trim(cols[0]);
    if (cols.size() > 1) {
      std::string codes = trim(cols[1]);
      if (!codes.empty() && codes != "-") {
        for (const std::string& code : split(codes, ',')) {
          std::string cc = trim(code);
          if (cc.empty()) continue;
          if (cc != "TOOL-ERR" && !rule_by_code(cc))
            throw ManifestError("unknown rule code '" + cc + "' in manifest line " +
                                std::to_string(lineno));
          c.expected.insert(cc);
        }
      }
    }
    if (cols.size() > 2) {
      for (const std::string& hint : split(trim(cols[2]), ',')) {
        std::string h = trim(hint);
        if (h.empty()) continue;
        size_t eq = h.find('=');
        if (eq == std::string::npos)
          throw ManifestError("bad line hint '" + h + "' in manifest line " +
                              std::to_string(lineno));
        c.line_hints[h.substr(0, eq)] = std::atoi(h.c_str() + eq + 1);
      }
    }
    if (cols.size() > 3) {
      for (const std::string& tag : split(trim(cols[3]), ','))
        if (!trim(tag).empty()) c.tags.insert(trim(tag));
    }
    cases.push_back(std::move(c));
  }
  if (cases.empty()) throw ManifestError("manifest lists no cases: " + manifest_path);
  return cases;
}

std::optional<double> EvalSummary::recall() const {
  if (tp + fn == 0) return std::nullopt;
  return double(tp) / double(tp + fn);
}

std::optional<double> EvalSummary::precision() const {
  if (tp + fp == 0) return std::nullopt;
  return double(tp) / double(tp + fp);
}

EvalSummary evaluate_corpus(const std::vector<CorpusCase>& cases, const AnalysisOptions& opts,
                            std::ostream* table_out) {
  EvalSummary sum;
  if (table_out)
    *table_out << "case\texpected\tfound\tTP\tFP\tFN\n";

  for (const CorpusCase& c : cases) {
    FileOutcome outcome = analyze_path(c.path, opts);

    std::map<std::string, std::set<int>> found;  // code -> lines
    for (const Diagnostic& d : outcome.report.diagnostics)
      found[d.code].insert(d.line.value_or(0));

    int tp = 0, fp = 0, fn = 0;
    bool allow_extra = c.tags.count("allow-extra") > 0;

    for (const std::string& code : c.expected) {
      auto it = found.find(code);
      bool hit = it != found.end();
      if (hit) {
        auto hint = c.line_hints.find(code);
        if (hint != c.line_hints.end() && !it->second.count(hint->second)) hit = false;
      }
      if (hit) {
        ++tp;
        ++sum.per_rule[code].tp;
      } else {
        ++fn;
        ++sum.per_rule[code].fn;
      }
    }
    for (const auto& [code, lines] : found) {
      if (c.expected.count(code)) continue;
      if (allow_extra) continue;
      ++fp;
      ++sum.per_rule[code].fp;
    }

    sum.tp += tp;
    sum.fp += fp;
    sum.fn += fn;

    if (table_out) {
      auto join = [](const std::set<std::string>& xs) {
        std::string out;
        for (const std::string& x : xs) out += (out.empty() ? "" : ",") + x;
        return out.empty() ? "-" : out;
      };
      std::set<std::string> found_codes;
      for (const auto& [code, lines] : found) found_codes.insert(code);
      *table_out << c.path << "\t" << join(c.expected) << "\t" << join(found_codes) << "\t"
                 << tp << "\t" << fp << "\t" << fn << "\n";
    }
  }
  return sum;
}

int run_eval(const std::string& manifest_path, const AnalysisOptions& opts, std::ostream& out) {
  std::vector<CorpusCase> cases;
  try {
    cases = load_manifest(manifest_path);
  } catch (const AnalysisError& e) {
    out << "error: " << e.what() << "\n";
    return kExitToolError;
  }
  EvalSummary sum = evaluate_corpus(cases, opts, &out);

  out << "\nper-rule results:\n";
  for (const auto& [code, tally] : sum.per_rule) {
    out << "  " << code << ": TP=" << tally.tp << " FP=" << tally.fp << " FN=" << tally.fn
        << "\n";
  }
  auto pct = [](std::optional<double> v) {
    if (!v) return std::string("n/a");
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << (*v * 100.0) << "%";
    return os.str();
  };
  out << "overall: TP=" << sum.tp << " FP=" << sum.fp << " FN=" << sum.fn
      << " recall=" << pct(sum.recall()) << " precision=" << pct(sum.precision()) << "\n";
  bool perfect = sum.fp == 0 && sum.fn == 0;
  return perfect ? kExitClean : kExitErrors;
}

int run_list_rules(const std::string& only, Format format, std::ostream& out) {
  std::vector<const RuleMeta*> rows;
  for (const RuleMeta& m : rule_table()) {
    if (!only.empty() && only != m.code && only != to_string(m.category)) continue;
    rows.push_back(&m);
  }
  if (format == Format::Json) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const RuleMeta* m : rows) {
      j.push_back({{"id", m->id},
                   {"code", m->code},
                   {"category", to_string(m->category)},
                   {"severity", to_string(m->severity)},
                   {"title", m->title},
                   {"principle", m->principle},
                   {"remediation", m->remediation}});
    }
    out << j.dump(2) << "\n";
  } else {
    for (const RuleMeta* m : rows) {
      out << std::left << std::setw(3) << m->id << " " << std::setw(8) << m->code
          << std::setw(9) << to_string(m->severity) << m->title << "\n";
    }
  }
  return kExitClean;
}

std::map<std::string, std::string> load_config_file(const std::string& path) {
  std::map<std::string, std::string> kv;
  std::ifstream in(path);
  if (!in) return kv;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos) continue;
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

void apply_config(const std::map<std::string, std::string>& kv, AnalysisOptions& opts) {
  auto get = [&](const char* k) -> const std::string* {
    auto it = kv.find(k);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (const std::string* v = get("format")) opts.format = *v == "json" ? Format::Json : Format::Text;
  if (const std::string* v = get("disable"))
    for (const std::string& code : split(*v, ','))
      if (!trim(code).empty()) opts.disabled.insert(trim(code));
  if (const std::string* v = get("only")) opts.only = *v;
  if (const std::string* v = get("dialect")) {
    if (*v == "keras") opts.dialect = Dialect::Keras;
    if (*v == "tf1") opts.dialect = Dialect::TensorFlowV1;
  }
  if (const std::string* v = get("max_unroll")) opts.max_unroll = std::atoi(v->c_str());
  if (const std::string* v = get("trace")) opts.trace = *v == "1" || *v == "true";
}

}  // namespace dlint
