#pragma once

#include <compare>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alignmeter/error.hpp"

namespace alignmeter {

enum class RaterFamily { human, model, ensemble, baseline };

std::string_view to_string(RaterFamily family);
std::optional<RaterFamily> parse_rater_family(std::string_view text);

/// One ordinal rating of a unit on a task by a rater (under a prompt, for models).
struct RatingRecord {
  std::string rater_id;
  RaterFamily rater_family = RaterFamily::model;
  std::string task_id;
  std::string unit_id;
  std::optional<std::string> prompt_id;
  double score = 0.0;

  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

struct ScaleBounds {
  double min = 0.0;
  double max = 0.0;
};

/// A rating source: one rater, optionally pinned to one prompt.
struct SourceKey {
  std::string rater_id;
  std::optional<std::string> prompt_id;

  std::string label() const;
  friend auto operator<=>(const SourceKey&, const SourceKey&) = default;
};

/// Parses "rater" or "rater|prompt".
SourceKey parse_source_key(std::string_view text);

/// Long-format ratings keyed by (rater, task, unit, prompt). Immutable after
/// construction; the constructor validates every record and throws
/// ValidationError with the full list of problems.
class RatingsTable {
 public:
  RatingsTable() = default;
  explicit RatingsTable(std::vector<RatingRecord> records, std::map<std::string, ScaleBounds> bounds = {});

  const std::vector<RatingRecord>& records() const noexcept { return records_; }
  const std::map<std::string, ScaleBounds>& scale_bounds() const noexcept { return bounds_; }
  std::optional<ScaleBounds> bounds_for(std::string_view task) const;
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  std::vector<std::string> tasks() const;
  std::vector<std::string> units() const;
  std::vector<SourceKey> sources() const;
  std::vector<SourceKey> sources_for_task(std::string_view task) const;
  std::optional<RaterFamily> family_of(std::string_view rater) const;
  bool has_rater(std::string_view rater) const;

  /// unit -> score for one source on one task. A source without a prompt
  /// matches records whose prompt is empty; if the rater only has prompted
  /// records and exactly one prompt exists for the task, that prompt is used.
  std::map<std::string, double> scores(const SourceKey& source, std::string_view task) const;

 private:
  std::vector<RatingRecord> records_;
  std::map<std::string, ScaleBounds> bounds_;
};

/// Validates records against bounds and the key/prompt rules. `rows` maps each
/// record to a file line for the report (may be empty: records are numbered 1..n).
ValidationReport validate_ratings(std::span<const RatingRecord> records,
                                  const std::map<std::string, ScaleBounds>& bounds,
                                  std::span<const std::size_t> rows = {});

struct RatingsSchema {
  std::string rater_id = "rater_id";
  std::string rater_family = "rater_family";
  std::string task_id = "task_id";
  std::string unit_id = "unit_id";
  std::string prompt_id = "prompt_id";  // may be absent from the file
  std::string score = "score";
  char delimiter = ',';
  std::map<std::string, ScaleBounds> bounds;
};

RatingsTable load_ratings(const std::filesystem::path& path, const RatingsSchema& schema = {});
RatingsTable read_ratings(std::istream& in, const RatingsSchema& schema = {}, std::string source_name = "<stream>");
/// Canonical long-format CSV (header: rater_id,rater_family,task_id,unit_id,prompt_id,score).
void write_ratings(std::ostream& out, const RatingsTable& table);

struct OutcomeRow {
  std::string unit_id;
  std::string outcome_id;
  double value = 0.0;
  std::optional<int> year;

  friend bool operator==(const OutcomeRow&, const OutcomeRow&) = default;
};

class OutcomeTable {
 public:
  OutcomeTable() = default;
  explicit OutcomeTable(std::vector<OutcomeRow> rows);

  const std::vector<OutcomeRow>& rows() const noexcept { return rows_; }
  std::vector<std::string> outcome_ids() const;
  bool has_outcome(std::string_view outcome) const;
  std::map<std::string, double> values(std::string_view outcome) const;
  std::map<std::string, int> years(std::string_view outcome) const;

 private:
  std::vector<OutcomeRow> rows_;
};

struct OutcomeSchema {
  std::string unit_id = "unit_id";
  std::string outcome_id = "outcome_id";
  std::string value = "value";
  std::string year = "year";  // optional column
  char delimiter = ',';
};

OutcomeTable load_outcomes(const std::filesystem::path& path, const OutcomeSchema& schema = {});
OutcomeTable read_outcomes(std::istream& in, const OutcomeSchema& schema = {}, std::string source_name = "<stream>");
void write_outcomes(std::ostream& out, const OutcomeTable& table);

/// Per-unit numeric metadata (e.g. teacher experience, prior-year outcome).
using UnitValues = std::map<std::string, double>;

/// Reads a unit-keyed CSV and returns the named numeric column. Blank cells are skipped.
UnitValues load_unit_metadata(const std::filesystem::path& path, std::string_view column,
                              std::string_view unit_column = "unit_id", char delimiter = ',');

/// Aligned vectors for one (source, task) against a second variable, sorted by unit id.
struct JoinedPanel {
  std::vector<std::string> units;
  std::vector<double> x;  // rating
  std::vector<double> y;  // outcome (or second rating source)

  std::size_t n() const noexcept { return units.size(); }
};

/// Inner join on unit id. Throws std::invalid_argument when fewer than 2 units are shared.
JoinedPanel join_values(const std::map<std::string, double>& a, const std::map<std::string, double>& b);

JoinedPanel join_panel(const RatingsTable& ratings, const OutcomeTable& outcomes, const SourceKey& rater,
                       std::string_view task, std::string_view outcome);

/// Maps v to (v - min) / (max - min). Throws on min >= max.
std::vector<double> minmax_scale(std::span<const double> values, ScaleBounds bounds);

enum class BaselineKind { experience, prior_outcome };

std::string baseline_rater_id(BaselineKind kind);

/// A baseline rating source whose score is the unit's metadata value, one
/// record per (task, unit). When `units` is empty every metadata unit is used.
RatingsTable baseline_ratings(BaselineKind kind, const UnitValues& metadata, std::span<const std::string> tasks,
                              std::span<const std::string> units = {});

/// Re-keys units to a coarser analysis level (e.g. segment -> teacher-year)
/// by averaging each source's scores within a group. Units missing from the
/// map are an error.
RatingsTable aggregate_ratings(const RatingsTable& ratings, const std::map<std::string, std::string>& unit_to_group);

}  // namespace alignmeter
