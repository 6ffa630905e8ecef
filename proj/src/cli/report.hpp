#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace alignmeter::cli {

/// Collects output files and writes them under the output directory.
class ReportWriter {
 public:
  ReportWriter(const AnalysisConfig& config, std::string command);

  /// Metadata block embedded in every JSON report.
  Json meta() const;

  void write_json(const std::string& name, Json body);
  void write_csv(const std::string& name, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows);
  void write_text(const std::string& name, const std::string& text);

  const std::vector<std::filesystem::path>& written() const noexcept { return written_; }

 private:
  std::filesystem::path path_for(const std::string& name);

  const AnalysisConfig& config_;
  std::string command_;
  std::vector<std::filesystem::path> written_;
};

/// Shortest round-trip text; "NA" for NaN.
std::string num(double v);
std::string num(std::optional<double> v);
/// JSON number or null for NaN/absent.
Json jnum(double v);
Json jnum(std::optional<double> v);

}  // namespace alignmeter::cli
