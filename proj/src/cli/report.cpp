#include "report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "alignmeter/csv.hpp"
#include "alignmeter/error.hpp"

namespace alignmeter::cli {

std::string num(double v) { return csv::format_double(v); }

std::string num(std::optional<double> v) { return v ? num(*v) : std::string("NA"); }

Json jnum(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json jnum(std::optional<double> v) { return v ? jnum(*v) : Json(nullptr); }

ReportWriter::ReportWriter(const AnalysisConfig& config, std::string command)
    : config_(config), command_(std::move(command)) {}

Json ReportWriter::meta() const {
  Json m;
  m["tool"] = "alignmeter";
  m["version"] = ALIGNMETER_VERSION;
  m["command"] = command_;
  m["seed"] = config_.seed;
  m["config_hash"] = config_.hash();
  return m;
}

std::filesystem::path ReportWriter::path_for(const std::string& name) {
  std::error_code ec;
  std::filesystem::create_directories(config_.out, ec);
  if (ec) throw InputError("cannot create output directory '" + config_.out.string() + "': " + ec.message());
  auto p = config_.out / name;
  written_.push_back(p);
  return p;
}

void ReportWriter::write_text(const std::string& name, const std::string& text) {
  const auto p = path_for(name);
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw InputError("failed writing '" + p.string() + "'");
}

void ReportWriter::write_json(const std::string& name, Json body) {
  Json doc = Json::object();
  doc["meta"] = meta();
  for (auto& [key, value] : body.items()) doc[key] = value;
  write_text(name, doc.dump(2) + "\n");
}

void ReportWriter::write_csv(const std::string& name, const std::vector<std::string>& header,
                             const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  csv::write_row(out, header);
  for (const auto& r : rows) csv::write_row(out, r);
  write_text(name, out.str());
}

}  // namespace alignmeter::cli
