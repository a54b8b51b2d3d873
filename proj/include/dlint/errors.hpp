#ifndef DLINT_ERRORS_HPP
#define DLINT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dlint {

// Base for every error the analysis pipeline can raise. The CLI maps any
// AnalysisError to a TOOL-ERR diagnostic and exit code 3; nothing escapes.
class AnalysisError : public std::runtime_error {
 public:
  AnalysisError(std::string what, int line = 0)
      : std::runtime_error(std::move(what)), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class SyntaxError : public AnalysisError {
 public:
  using AnalysisError::AnalysisError;
};

class UnsupportedConstruct : public AnalysisError {
 public:
  using AnalysisError::AnalysisError;
};

class UnsupportedTopology : public AnalysisError {
 public:
  using AnalysisError::AnalysisError;
};

class NoModelFound : public AnalysisError {
 public:
  using AnalysisError::AnalysisError;
};

class GraphError : public AnalysisError {
 public:
  using AnalysisError::AnalysisError;
};

class UnknownRuleError : public AnalysisError {
 public:
  using AnalysisError::AnalysisError;
};

class StaleMatchError : public AnalysisError {
 public:
  using AnalysisError::AnalysisError;
};

class IterationCapError : public AnalysisError {
 public:
  using AnalysisError::AnalysisError;
};

class ManifestError : public AnalysisError {
 public:
  using AnalysisError::AnalysisError;
};

}  // namespace dlint

#endif
