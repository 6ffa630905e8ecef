#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace alignmeter {

/// Bad or unreadable input data (files, columns, ids). The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An analysis ran but could not produce a trustworthy result (e.g. sampler
/// non-convergence). The CLI maps this to exit code 1.
class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ValidationIssue {
  std::size_t row = 0;  // 1-based line in the source file, 0 when not row-specific
  std::string column;
  std::string kind;
  std::string message;
};

struct ValidationReport {
  std::string source;
  std::size_t rows_read = 0;
  std::vector<ValidationIssue> issues;

  bool ok() const { return issues.empty(); }
  std::string summary(std::size_t max_items = 5) const;
  std::string to_json() const;
};

/// Thrown when a table fails validation; carries the full report.
class ValidationError : public InputError {
 public:
  explicit ValidationError(ValidationReport report);
  const ValidationReport& report() const noexcept { return report_; }

 private:
  ValidationReport report_;
};

}  // namespace alignmeter
