#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace alignmeter {

enum class SlopeMethod { theil_sen, repeated_median };

struct SlopeEstimate {
  double slope = 0.0;
  SlopeMethod method = SlopeMethod::theil_sen;
  std::size_t n = 0;
  std::size_t n_pairs_used = 0;
};

/// Median of (y_j - y_i) / (x_j - x_i) over pairs with x_i != x_j.
SlopeEstimate theil_sen(std::span<const double> x, std::span<const double> y);

/// Siegel's estimator: median over i of the median over j != i of the pairwise slope.
SlopeEstimate repeated_median(std::span<const double> x, std::span<const double> y);

struct BatteryConfig {
  double ci_level = 0.80;  // two-sided level whose lower bound is the one-sided 90% bound
  double null_level = 0.95;
  std::size_t permutations = 1000;
  std::size_t bootstrap = 1000;
  std::uint64_t seed = 0;
};

enum class TestStatus { passed, failed, not_run };

struct BatteryTest {
  std::string name;
  std::string column;  // short header used in the tabular report
  std::optional<double> statistic;
  std::optional<double> p;
  TestStatus status = TestStatus::not_run;
  std::string detail;
};

struct RobustnessReport {
  std::vector<BatteryTest> tests;  // always seven, in table order
  std::size_t n = 0;
  std::size_t passed = 0;
  std::size_t run = 0;
  double pass_rate = 0.0;  // passed / run

  /// "0.12, Y" style cell; the quartile test carries significance stars.
  std::string cell(std::size_t index) const;
  /// "100 (7/7)".
  std::string pass_cell() const;
};

/// Seven sign tests of a rating/outcome association. `baseline` holds the
/// experience-baseline value for each panel unit, or is empty when unavailable.
RobustnessReport robustness_battery(std::span<const double> ratings, std::span<const double> outcomes,
                                    std::span<const double> baseline, const BatteryConfig& config);

/// "***" for p < .01, "**" for p < .05, "*" for p < .10.
std::string significance_stars(double p);

}  // namespace alignmeter
