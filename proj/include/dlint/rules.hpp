#ifndef DLINT_RULES_HPP
#define DLINT_RULES_HPP

#include <string>
#include <vector>

#include "dlint/graph.hpp"
#include "dlint/rewrite.hpp"

namespace dlint {

enum class Category { IPS, UT, APIM, SI };
enum class Severity { Error, Warning };

const char* to_string(Category c);
const char* to_string(Severity s);

struct RuleMeta {
  int id = 0;
  std::string code;        // stable public contract, e.g. "UT-07"
  Category category = Category::IPS;
  Severity severity = Severity::Error;
  std::string title;
  std::string principle;   // one-line statement of the design rule
  std::string remediation; // suggested fix shown in reports
};

// All 23 rule descriptors, ordered by id.
const std::vector<RuleMeta>& rule_table();

// Throws UnknownRuleError outside 1..23. Codes are never renumbered.
const RuleMeta& rule_doc(int id);

const RuleMeta* rule_by_code(const std::string& code);

// The verification rules as rewrite patterns, ordered by id. Priorities:
// 1 = tensor-alignment checks, 2 = structure and API checks, 3 = design
// inefficiency checks.
const std::vector<RulePattern>& catalog();

// Band-0 markup: derives the structural attributes the patterns match on
// (chain positions, learning/output flags, effective activations, feature
// map areas, conv/pool counts, loss family). Runs after shape propagation
// and before the fixpoint. Purely additive on attributes.
AttributedGraph annotate_structure(AttributedGraph g);

}  // namespace dlint

#endif
