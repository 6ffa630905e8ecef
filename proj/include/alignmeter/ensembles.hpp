#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alignmeter/data_model.hpp"

namespace alignmeter {

enum class EnsembleRule { weighted, unanimous };

std::string to_string(EnsembleRule rule);
std::optional<EnsembleRule> parse_ensemble_rule(std::string_view text);

struct EnsembleSpec {
  std::string name;  // rater id of the derived source
  std::vector<SourceKey> members;
  EnsembleRule rule = EnsembleRule::weighted;
  std::vector<double> weights;  // weighted rule only; empty means equal weights
};

using UnitScores = std::map<std::string, double>;

struct CombinedScores {
  UnitScores scores;
  std::size_t units_total = 0;  // union of member units
  std::size_t dropped = 0;      // units missing at least one member
  double coverage = 0.0;        // scores.size() / units_total
};

/// Per-unit weighted mean over units every member rated.
CombinedScores weighted_combine(std::span<const UnitScores> members, std::span<const double> weights);

/// Units on which every member gave exactly the same score.
CombinedScores unanimous_combine(std::span<const UnitScores> members);

struct EnsembleResult {
  RatingsTable table;  // rater_family = ensemble, prompt_id = rule name
  std::map<std::string, CombinedScores> per_task;
  double coverage = 0.0;  // retained / total over all tasks
  bool empty = false;     // no unit retained on any task
};

/// Builds the ensemble on every task that all members rated.
EnsembleResult build_ensemble(const RatingsTable& ratings, const EnsembleSpec& spec);

struct EnsembleComparison {
  std::size_t n = 0;  // ensemble units with an outcome
  bool powered = false;
  double tau_ensemble = 0.0;
  std::vector<double> member_taus;
  double tau_member_median = 0.0;
  double tau_member_mean = 0.0;
  double delta = 0.0;       // tau_ensemble - member median
  double delta_mean = 0.0;  // tau_ensemble - member mean
  double p = 1.0;           // two-sided bootstrap p for delta
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t bootstrap = 0;
  std::size_t bootstrap_used = 0;
};

/// Bootstraps units (over the union of all panels) and compares ensemble
/// alignment with the median member alignment. Fewer than `min_units`
/// ensemble units marks the comparison unpowered and skips the bootstrap.
EnsembleComparison ensemble_alignment_compare(const UnitScores& ensemble, std::span<const UnitScores> members,
                                              const UnitScores& outcome, std::size_t m, std::uint64_t seed,
                                              double level = 0.95, std::size_t min_units = 8);

}  // namespace alignmeter
