#include "alignmeter/robust_slopes.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "alignmeter/concordance.hpp"
#include "alignmeter/random.hpp"
#include "alignmeter/stats.hpp"

namespace alignmeter {
namespace {

void check_inputs(std::span<const double> x, std::span<const double> y, const char* what) {
  if (x.size() != y.size()) throw std::invalid_argument(std::string(what) + ": vectors differ in length");
  if (x.size() < 2) throw std::invalid_argument(std::string(what) + ": need at least 2 points");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw std::invalid_argument(std::string(what) + ": non-finite value");
    }
  }
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

}  // namespace

SlopeEstimate theil_sen(std::span<const double> x, std::span<const double> y) {
  check_inputs(x, y, "theil_sen");
  const std::size_t n = x.size();
  std::vector<double> slopes;
  slopes.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (x[i] != x[j]) slopes.push_back((y[j] - y[i]) / (x[j] - x[i]));
    }
  }
  if (slopes.empty()) throw std::invalid_argument("theil_sen: all x values are equal");
  SlopeEstimate out;
  out.method = SlopeMethod::theil_sen;
  out.n = n;
  out.n_pairs_used = slopes.size();
  out.slope = stats::median_inplace(slopes);
  return out;
}

SlopeEstimate repeated_median(std::span<const double> x, std::span<const double> y) {
  check_inputs(x, y, "repeated_median");
  const std::size_t n = x.size();
  std::vector<double> inner(n);
  std::vector<double> slopes;
  slopes.reserve(n);
  std::size_t used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    slopes.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && x[i] != x[j]) slopes.push_back((y[j] - y[i]) / (x[j] - x[i]));
    }
    if (slopes.empty()) throw std::invalid_argument("repeated_median: a point has no partner with distinct x");
    used += slopes.size();
    inner[i] = stats::median_inplace(slopes);
  }
  SlopeEstimate out;
  out.method = SlopeMethod::repeated_median;
  out.n = n;
  out.n_pairs_used = used / 2;
  out.slope = stats::median_inplace(inner);
  return out;
}

std::string significance_stars(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.10) return "*";
  return "";
}

std::string RobustnessReport::cell(std::size_t index) const {
  const auto& t = tests.at(index);
  if (t.status == TestStatus::not_run || !t.statistic) return "NA";
  std::string s = fixed2(*t.statistic);
  if (t.name == "q4_above_q1" && t.p) s += significance_stars(*t.p);
  s += t.status == TestStatus::passed ? ", Y" : ", N";
  return s;
}

std::string RobustnessReport::pass_cell() const {
  if (run == 0) return "NA (0/0)";
  const long pct = std::lround(100.0 * static_cast<double>(passed) / static_cast<double>(run));
  return std::to_string(pct) + " (" + std::to_string(passed) + "/" + std::to_string(run) + ")";
}

RobustnessReport robustness_battery(std::span<const double> ratings, std::span<const double> outcomes,
                                    std::span<const double> baseline, const BatteryConfig& config) {
  if (ratings.size() != outcomes.size()) throw std::invalid_argument("robustness_battery: panel lengths differ");
  if (ratings.size() < 8) throw std::invalid_argument("robustness_battery: need a panel of at least 8 units");
  if (!baseline.empty() && baseline.size() != ratings.size()) {
    throw std::invalid_argument("robustness_battery: baseline length differs from panel");
  }

  RobustnessReport report;
  report.n = ratings.size();
  auto add = [&](std::string name, std::string column, std::optional<double> stat, bool pass, std::string detail,
                 std::optional<double> p = std::nullopt) {
    BatteryTest t;
    t.name = std::move(name);
    t.column = std::move(column);
    t.statistic = stat;
    t.p = p;
    t.status = pass ? TestStatus::passed : TestStatus::failed;
    t.detail = std::move(detail);
    report.tests.push_back(std::move(t));
  };

  const TauResult tau = kendall_tau(ratings, outcomes, config.ci_level);
  add("tau_positive", "tau>0", tau.tau, tau.tau > 0.0, "Kendall tau-b");

  const double lower = tau.ci ? tau.ci->low : -1.0;
  add("lower_ci_positive", "low_90ci>0", lower, tau.ci && lower > 0.0,
      "lower bound of the two-sided " + fixed2(100.0 * config.ci_level) + "% Fieller interval");

  try {
    const auto ts = theil_sen(ratings, outcomes);
    add("theil_sen_positive", "theil_sen>0", ts.slope, ts.slope > 0.0, "Theil-Sen slope");
  } catch (const std::invalid_argument& e) {
    add("theil_sen_positive", "theil_sen>0", std::nullopt, false, e.what());
  }
  try {
    const auto rm = repeated_median(ratings, outcomes);
    add("rme_positive", "rme>0", rm.slope, rm.slope > 0.0, "repeated-median slope");
  } catch (const std::invalid_argument& e) {
    add("rme_positive", "rme>0", std::nullopt, false, e.what());
  }

  const auto perm = permutation_null_test(ratings, outcomes, config.permutations,
                                          derive_seed(config.seed, "battery/permutation"), config.null_level);
  add("tau_above_random", "tau>rand", perm.tau - perm.null_quantile, perm.tau > perm.null_quantile,
      "observed tau minus the permutation-null " + fixed2(100.0 * config.null_level) +
          "% quantile; the pass rule for this column is ambiguous in published tables",
      perm.p);

  if (baseline.empty()) {
    BatteryTest t;
    t.name = "tau_vs_experience";
    t.column = "tau>=exp";
    t.status = TestStatus::not_run;
    t.detail = "experience baseline unavailable";
    report.tests.push_back(std::move(t));
  } else {
    try {
      const auto cmp = tau_vs_baseline(ratings, baseline, outcomes, config.bootstrap,
                                       derive_seed(config.seed, "battery/baseline"));
      add("tau_vs_experience", "tau>=exp", cmp.delta, cmp.delta >= 0.0,
          "tau minus experience-baseline tau", cmp.p);
    } catch (const std::invalid_argument& e) {
      BatteryTest t;
      t.name = "tau_vs_experience";
      t.column = "tau>=exp";
      t.status = TestStatus::not_run;
      t.detail = e.what();
      report.tests.push_back(std::move(t));
    }
  }

  const auto gap = quartile_gap_test(ratings, outcomes, config.bootstrap, derive_seed(config.seed, "battery/quartile"));
  add("q4_above_q1", "q4>q1", gap.gap, gap.gap > 0.0, "mean outcome gap, top vs bottom rating quartile", gap.p);

  for (const auto& t : report.tests) {
    if (t.status == TestStatus::not_run) continue;
    ++report.run;
    if (t.status == TestStatus::passed) ++report.passed;
  }
  report.pass_rate = report.run ? static_cast<double>(report.passed) / static_cast<double>(report.run) : 0.0;
  return report;
}

}  // namespace alignmeter
