#include "alignmeter/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "alignmeter/csv.hpp"

namespace alignmeter {

// ---- validation report -------------------------------------------------------

std::string ValidationReport::summary(std::size_t max_items) const {
  std::ostringstream out;
  out << source << ": " << issues.size() << " validation issue(s)";
  for (std::size_t i = 0; i < issues.size() && i < max_items; ++i) {
    const auto& issue = issues[i];
    out << "\n  ";
    if (issue.row) out << "row " << issue.row << ": ";
    out << issue.message;
  }
  if (issues.size() > max_items) out << "\n  ... (" << issues.size() - max_items << " more)";
  return out.str();
}

std::string ValidationReport::to_json() const {
  nlohmann::ordered_json j;
  j["source"] = source;
  j["rows_read"] = rows_read;
  j["ok"] = ok();
  j["issues"] = nlohmann::ordered_json::array();
  for (const auto& issue : issues) {
    j["issues"].push_back(
        {{"row", issue.row}, {"column", issue.column}, {"kind", issue.kind}, {"message", issue.message}});
  }
  return j.dump(2);
}

ValidationError::ValidationError(ValidationReport report)
    : InputError(report.summary()), report_(std::move(report)) {}

// ---- enums and keys ----------------------------------------------------------

std::string_view to_string(RaterFamily family) {
  switch (family) {
    case RaterFamily::human: return "human";
    case RaterFamily::model: return "model";
    case RaterFamily::ensemble: return "ensemble";
    case RaterFamily::baseline: return "baseline";
  }
  return "unknown";
}

std::optional<RaterFamily> parse_rater_family(std::string_view text) {
  if (text == "human") return RaterFamily::human;
  if (text == "model") return RaterFamily::model;
  if (text == "ensemble") return RaterFamily::ensemble;
  if (text == "baseline") return RaterFamily::baseline;
  return std::nullopt;
}

std::string SourceKey::label() const { return prompt_id ? rater_id + "|" + *prompt_id : rater_id; }

SourceKey parse_source_key(std::string_view text) {
  const auto bar = text.find('|');
  if (bar == std::string_view::npos) return {std::string(text), std::nullopt};
  return {std::string(text.substr(0, bar)), std::string(text.substr(bar + 1))};
}

// ---- ratings -----------------------------------------------------------------

ValidationReport validate_ratings(std::span<const RatingRecord> records,
                                  const std::map<std::string, ScaleBounds>& bounds,
                                  std::span<const std::size_t> rows) {
  ValidationReport report;
  report.rows_read = records.size();
  auto row_of = [&](std::size_t i) { return rows.empty() ? i + 1 : rows[i]; };

  for (const auto& [task, b] : bounds) {
    if (!(b.min < b.max) || !std::isfinite(b.min) || !std::isfinite(b.max)) {
      report.issues.push_back({0, "score", "degenerate_bounds",
                               "task '" + task + "' has bounds [" + csv::format_double(b.min) + ", " +
                                   csv::format_double(b.max) + "]; need finite min < max"});
    }
  }

  using Key = std::tuple<std::string_view, std::string_view, std::string_view, std::string_view, bool>;
  std::map<Key, std::size_t> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::size_t row = row_of(i);
    if (r.rater_id.empty() || r.task_id.empty() || r.unit_id.empty()) {
      report.issues.push_back({row, "", "missing_key", "rater, task and unit ids must be non-empty"});
    }
    if (!std::isfinite(r.score)) {
      report.issues.push_back({row, "score", "non_finite", "score is not finite"});
    } else if (auto it = bounds.find(r.task_id); it != bounds.end()) {
      if (r.score < it->second.min || r.score > it->second.max) {
        report.issues.push_back({row, "score", "out_of_bounds",
                                 "score " + csv::format_double(r.score) + " outside [" +
                                     csv::format_double(it->second.min) + ", " + csv::format_double(it->second.max) +
                                     "] for task '" + r.task_id + "'"});
      }
    }
    // Only humans and baselines are unprompted.
    if (!r.prompt_id && (r.rater_family == RaterFamily::model || r.rater_family == RaterFamily::ensemble)) {
      report.issues.push_back({row, "prompt_id", "missing_prompt",
                               std::string(to_string(r.rater_family)) + " rater '" + r.rater_id +
                                   "' requires a prompt id"});
    }
    const Key key{r.rater_id, r.task_id, r.unit_id, r.prompt_id ? std::string_view(*r.prompt_id) : "",
                  r.prompt_id.has_value()};
    if (auto [it, inserted] = seen.emplace(key, row); !inserted) {
      report.issues.push_back({row, "", "duplicate_key",
                               "duplicate (rater, task, unit, prompt) = (" + r.rater_id + ", " + r.task_id + ", " +
                                   r.unit_id + ", " + (r.prompt_id ? *r.prompt_id : "") + "), first seen at row " +
                                   std::to_string(it->second)});
    }
  }
  return report;
}

RatingsTable::RatingsTable(std::vector<RatingRecord> records, std::map<std::string, ScaleBounds> bounds)
    : records_(std::move(records)), bounds_(std::move(bounds)) {
  auto report = validate_ratings(records_, bounds_);
  if (!report.ok()) {
    report.source = "ratings";
    throw ValidationError(std::move(report));
  }
}

std::optional<ScaleBounds> RatingsTable::bounds_for(std::string_view task) const {
  if (auto it = bounds_.find(std::string(task)); it != bounds_.end()) return it->second;
  return std::nullopt;
}

std::vector<std::string> RatingsTable::tasks() const {
  std::set<std::string> s;
  for (const auto& r : records_) s.insert(r.task_id);
  return {s.begin(), s.end()};
}

std::vector<std::string> RatingsTable::units() const {
  std::set<std::string> s;
  for (const auto& r : records_) s.insert(r.unit_id);
  return {s.begin(), s.end()};
}

std::vector<SourceKey> RatingsTable::sources() const {
  std::set<SourceKey> s;
  for (const auto& r : records_) s.insert({r.rater_id, r.prompt_id});
  return {s.begin(), s.end()};
}

std::vector<SourceKey> RatingsTable::sources_for_task(std::string_view task) const {
  std::set<SourceKey> s;
  for (const auto& r : records_) {
    if (r.task_id == task) s.insert({r.rater_id, r.prompt_id});
  }
  return {s.begin(), s.end()};
}

std::optional<RaterFamily> RatingsTable::family_of(std::string_view rater) const {
  for (const auto& r : records_) {
    if (r.rater_id == rater) return r.rater_family;
  }
  return std::nullopt;
}

bool RatingsTable::has_rater(std::string_view rater) const { return family_of(rater).has_value(); }

std::map<std::string, double> RatingsTable::scores(const SourceKey& source, std::string_view task) const {
  std::optional<std::string> prompt = source.prompt_id;
  if (!prompt) {
    std::set<std::optional<std::string>> prompts;
    for (const auto& r : records_) {
      if (r.rater_id == source.rater_id && r.task_id == task) prompts.insert(r.prompt_id);
    }
    if (!prompts.count(std::nullopt) && prompts.size() > 1) {
      throw std::invalid_argument("source '" + source.rater_id + "' has several prompts on task '" +
                                  std::string(task) + "'; name one as rater|prompt");
    }
    if (!prompts.count(std::nullopt) && prompts.size() == 1) prompt = *prompts.begin();
  }
  std::map<std::string, double> out;
  for (const auto& r : records_) {
    if (r.rater_id == source.rater_id && r.task_id == task && r.prompt_id == prompt) out.emplace(r.unit_id, r.score);
  }
  return out;
}

namespace {

std::map<std::string, std::size_t> header_index(const csv::Row& header) {
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < header.fields.size(); ++i) {
    std::string name = header.fields[i];
    if (i == 0 && name.size() >= 3 && name.compare(0, 3, "\xEF\xBB\xBF") == 0) name.erase(0, 3);
    idx.emplace(name, i);
  }
  return idx;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

RatingsTable read_ratings(std::istream& in, const RatingsSchema& schema, std::string source_name) {
  const auto rows = csv::read(in, schema.delimiter);
  ValidationReport report;
  report.source = source_name;
  if (rows.empty()) {
    report.issues.push_back({0, "", "empty_file", "no header row"});
    throw ValidationError(std::move(report));
  }
  const auto idx = header_index(rows.front());
  auto column = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
    if (auto it = idx.find(name); it != idx.end()) return it->second;
    if (required) report.issues.push_back({rows.front().line, name, "missing_column", "missing column '" + name + "'"});
    return std::nullopt;
  };
  const auto c_rater = column(schema.rater_id, true);
  const auto c_family = column(schema.rater_family, true);
  const auto c_task = column(schema.task_id, true);
  const auto c_unit = column(schema.unit_id, true);
  const auto c_prompt = column(schema.prompt_id, false);
  const auto c_score = column(schema.score, true);
  if (!report.ok()) throw ValidationError(std::move(report));

  std::vector<RatingRecord> records;
  std::vector<std::size_t> lines;
  records.reserve(rows.size() - 1);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& row = rows[k];
    if (row.fields.size() != rows.front().fields.size()) {
      report.issues.push_back({row.line, "", "field_count",
                               "expected " + std::to_string(rows.front().fields.size()) + " fields, found " +
                                   std::to_string(row.fields.size())});
      continue;
    }
    RatingRecord r;
    r.rater_id = row.fields[*c_rater];
    r.task_id = row.fields[*c_task];
    r.unit_id = row.fields[*c_unit];
    if (c_prompt && !row.fields[*c_prompt].empty()) r.prompt_id = row.fields[*c_prompt];
    const auto family = parse_rater_family(row.fields[*c_family]);
    if (!family) {
      report.issues.push_back({row.line, schema.rater_family, "bad_family",
                               "unknown rater family '" + row.fields[*c_family] + "'"});
      continue;
    }
    r.rater_family = *family;
    if (!csv::parse_double(row.fields[*c_score], r.score)) {
      report.issues.push_back(
          {row.line, schema.score, "unparseable_score", "cannot parse score '" + row.fields[*c_score] + "'"});
      continue;
    }
    records.push_back(std::move(r));
    lines.push_back(row.line);
  }

  auto checks = validate_ratings(records, schema.bounds, lines);
  report.issues.insert(report.issues.end(), checks.issues.begin(), checks.issues.end());
  report.rows_read = rows.size() - 1;
  if (!report.ok()) {
    std::stable_sort(report.issues.begin(), report.issues.end(),
                     [](const auto& a, const auto& b) { return a.row < b.row; });
    throw ValidationError(std::move(report));
  }
  return RatingsTable(std::move(records), schema.bounds);
}

RatingsTable load_ratings(const std::filesystem::path& path, const RatingsSchema& schema) {
  auto in = open_input(path);
  return read_ratings(in, schema, path.string());
}

void write_ratings(std::ostream& out, const RatingsTable& table) {
  csv::write_row(out, {"rater_id", "rater_family", "task_id", "unit_id", "prompt_id", "score"});
  for (const auto& r : table.records()) {
    csv::write_row(out, {r.rater_id, std::string(to_string(r.rater_family)), r.task_id, r.unit_id,
                         r.prompt_id.value_or(""), csv::format_double(r.score)});
  }
}

// ---- outcomes ----------------------------------------------------------------

OutcomeTable::OutcomeTable(std::vector<OutcomeRow> rows) : rows_(std::move(rows)) {
  ValidationReport report;
  report.source = "outcomes";
  report.rows_read = rows_.size();
  std::map<std::pair<std::string_view, std::string_view>, std::size_t> seen;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& r = rows_[i];
    if (!std::isfinite(r.value)) report.issues.push_back({i + 1, "value", "non_finite", "outcome value is not finite"});
    if (r.unit_id.empty() || r.outcome_id.empty()) {
      report.issues.push_back({i + 1, "", "missing_key", "unit and outcome ids must be non-empty"});
    }
    if (auto [it, inserted] = seen.emplace(std::pair{std::string_view(r.unit_id), std::string_view(r.outcome_id)}, i + 1);
        !inserted) {
      report.issues.push_back({i + 1, "", "duplicate_key",
                               "duplicate (unit, outcome) = (" + r.unit_id + ", " + r.outcome_id + "), first at row " +
                                   std::to_string(it->second)});
    }
  }
  if (!report.ok()) throw ValidationError(std::move(report));
}

std::vector<std::string> OutcomeTable::outcome_ids() const {
  std::set<std::string> s;
  for (const auto& r : rows_) s.insert(r.outcome_id);
  return {s.begin(), s.end()};
}

bool OutcomeTable::has_outcome(std::string_view outcome) const {
  return std::any_of(rows_.begin(), rows_.end(), [&](const auto& r) { return r.outcome_id == outcome; });
}

std::map<std::string, double> OutcomeTable::values(std::string_view outcome) const {
  std::map<std::string, double> out;
  for (const auto& r : rows_) {
    if (r.outcome_id == outcome) out.emplace(r.unit_id, r.value);
  }
  return out;
}

std::map<std::string, int> OutcomeTable::years(std::string_view outcome) const {
  std::map<std::string, int> out;
  for (const auto& r : rows_) {
    if (r.outcome_id == outcome && r.year) out.emplace(r.unit_id, *r.year);
  }
  return out;
}

OutcomeTable read_outcomes(std::istream& in, const OutcomeSchema& schema, std::string source_name) {
  const auto rows = csv::read(in, schema.delimiter);
  ValidationReport report;
  report.source = source_name;
  if (rows.empty()) {
    report.issues.push_back({0, "", "empty_file", "no header row"});
    throw ValidationError(std::move(report));
  }
  const auto idx = header_index(rows.front());
  auto column = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
    if (auto it = idx.find(name); it != idx.end()) return it->second;
    if (required) report.issues.push_back({rows.front().line, name, "missing_column", "missing column '" + name + "'"});
    return std::nullopt;
  };
  const auto c_unit = column(schema.unit_id, true);
  const auto c_outcome = column(schema.outcome_id, true);
  const auto c_value = column(schema.value, true);
  const auto c_year = column(schema.year, false);
  if (!report.ok()) throw ValidationError(std::move(report));

  std::vector<OutcomeRow> out;
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& row = rows[k];
    if (row.fields.size() != rows.front().fields.size()) {
      report.issues.push_back({row.line, "", "field_count", "wrong number of fields"});
      continue;
    }
    OutcomeRow r;
    r.unit_id = row.fields[*c_unit];
    r.outcome_id = row.fields[*c_outcome];
    if (!csv::parse_double(row.fields[*c_value], r.value) || !std::isfinite(r.value)) {
      report.issues.push_back(
          {row.line, schema.value, "unparseable_value", "cannot parse value '" + row.fields[*c_value] + "'"});
      continue;
    }
    if (c_year && !row.fields[*c_year].empty()) {
      double y = 0;
      if (!csv::parse_double(row.fields[*c_year], y) || y != std::floor(y)) {
        report.issues.push_back({row.line, schema.year, "unparseable_year", "cannot parse year"});
        continue;
      }
      r.year = static_cast<int>(y);
    }
    if (auto [it, inserted] = seen.emplace(std::pair{r.unit_id, r.outcome_id}, row.line); !inserted) {
      report.issues.push_back({row.line, "", "duplicate_key",
                               "duplicate (unit, outcome) = (" + r.unit_id + ", " + r.outcome_id + "), first at row " +
                                   std::to_string(it->second)});
      continue;
    }
    out.push_back(std::move(r));
  }
  report.rows_read = rows.size() - 1;
  if (!report.ok()) throw ValidationError(std::move(report));
  return OutcomeTable(std::move(out));
}

OutcomeTable load_outcomes(const std::filesystem::path& path, const OutcomeSchema& schema) {
  auto in = open_input(path);
  return read_outcomes(in, schema, path.string());
}

void write_outcomes(std::ostream& out, const OutcomeTable& table) {
  csv::write_row(out, {"unit_id", "outcome_id", "value", "year"});
  for (const auto& r : table.rows()) {
    csv::write_row(out, {r.unit_id, r.outcome_id, csv::format_double(r.value), r.year ? std::to_string(*r.year) : ""});
  }
}

UnitValues load_unit_metadata(const std::filesystem::path& path, std::string_view column,
                              std::string_view unit_column, char delimiter) {
  auto in = open_input(path);
  const auto rows = csv::read(in, delimiter);
  if (rows.empty()) throw InputError("'" + path.string() + "' is empty");
  const auto idx = header_index(rows.front());
  const auto u = idx.find(std::string(unit_column));
  const auto c = idx.find(std::string(column));
  if (u == idx.end() || c == idx.end()) {
    throw InputError("'" + path.string() + "' lacks column '" +
                     std::string(u == idx.end() ? unit_column : column) + "'");
  }
  UnitValues values;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& row = rows[k];
    if (row.fields.size() != rows.front().fields.size()) {
      throw InputError(path.string() + ": row " + std::to_string(row.line) + " has the wrong number of fields");
    }
    if (row.fields[c->second].empty()) continue;
    double v = 0;
    if (!csv::parse_double(row.fields[c->second], v) || !std::isfinite(v)) {
      throw InputError(path.string() + ": row " + std::to_string(row.line) + ": cannot parse '" +
                       row.fields[c->second] + "'");
    }
    if (!values.emplace(row.fields[u->second], v).second) {
      throw InputError(path.string() + ": row " + std::to_string(row.line) + ": duplicate unit '" +
                       row.fields[u->second] + "'");
    }
  }
  return values;
}

// ---- joins and transforms ----------------------------------------------------

JoinedPanel join_values(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
  JoinedPanel panel;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      panel.units.push_back(ia->first);
      panel.x.push_back(ia->second);
      panel.y.push_back(ib->second);
      ++ia;
      ++ib;
    }
  }
  if (panel.n() < 2) {
    throw std::invalid_argument("join shares " + std::to_string(panel.n()) + " unit(s); at least 2 required");
  }
  return panel;
}

JoinedPanel join_panel(const RatingsTable& ratings, const OutcomeTable& outcomes, const SourceKey& rater,
                       std::string_view task, std::string_view outcome) {
  return join_values(ratings.scores(rater, task), outcomes.values(outcome));
}

std::vector<double> minmax_scale(std::span<const double> values, ScaleBounds bounds) {
  if (!(bounds.min < bounds.max) || !std::isfinite(bounds.min) || !std::isfinite(bounds.max)) {
    throw std::invalid_argument("minmax_scale: bounds must satisfy finite min < max");
  }
  const double range = bounds.max - bounds.min;
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back((v - bounds.min) / range);
  return out;
}

std::string baseline_rater_id(BaselineKind kind) {
  return kind == BaselineKind::experience ? "baseline_experience" : "baseline_prior_outcome";
}

RatingsTable baseline_ratings(BaselineKind kind, const UnitValues& metadata, std::span<const std::string> tasks,
                              std::span<const std::string> units) {
  if (metadata.empty()) throw std::invalid_argument("baseline_ratings: metadata is empty");
  if (tasks.empty()) throw std::invalid_argument("baseline_ratings: no tasks given");
  std::vector<std::string> wanted;
  if (units.empty()) {
    for (const auto& [u, v] : metadata) wanted.push_back(u);
  } else {
    wanted.assign(units.begin(), units.end());
  }
  std::vector<std::string> missing;
  for (const auto& u : wanted) {
    if (!metadata.count(u)) missing.push_back(u);
  }
  if (!missing.empty()) {
    std::string msg = "baseline_ratings: no metadata for unit(s)";
    for (std::size_t i = 0; i < missing.size() && i < 5; ++i) msg += " '" + missing[i] + "'";
    throw std::invalid_argument(msg);
  }
  std::vector<RatingRecord> records;
  records.reserve(wanted.size() * tasks.size());
  for (const auto& task : tasks) {
    for (const auto& u : wanted) {
      records.push_back({baseline_rater_id(kind), RaterFamily::baseline, task, u, std::nullopt, metadata.at(u)});
    }
  }
  return RatingsTable(std::move(records));
}

RatingsTable aggregate_ratings(const RatingsTable& ratings, const std::map<std::string, std::string>& unit_to_group) {
  using Key = std::tuple<std::string, std::string, std::optional<std::string>, std::string>;
  std::map<Key, std::pair<double, std::size_t>> sums;
  std::map<std::string, RaterFamily> families;
  for (const auto& r : ratings.records()) {
    const auto it = unit_to_group.find(r.unit_id);
    if (it == unit_to_group.end()) throw InputError("aggregate_ratings: unit '" + r.unit_id + "' has no group");
    auto& cell = sums[{r.rater_id, r.task_id, r.prompt_id, it->second}];
    cell.first += r.score;
    ++cell.second;
    families[r.rater_id] = r.rater_family;
  }
  std::vector<RatingRecord> records;
  records.reserve(sums.size());
  for (const auto& [key, acc] : sums) {
    const auto& [rater, task, prompt, group] = key;
    records.push_back({rater, families.at(rater), task, group, prompt, acc.first / static_cast<double>(acc.second)});
  }
  return RatingsTable(std::move(records), ratings.scale_bounds());
}

}  // namespace alignmeter
