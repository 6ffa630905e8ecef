#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace alignmeter {

/// Antisymmetric pairwise-order matrix: m(i, j) = sign(v[j] - v[i]), ties 0.
class SignMatrix {
 public:
  explicit SignMatrix(std::span<const double> values);

  std::size_t size() const noexcept { return n_; }
  int operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
  std::span<const std::int8_t> entries() const noexcept { return entries_; }

 private:
  std::size_t n_ = 0;
  std::vector<std::int8_t> entries_;
};

SignMatrix sign_matrix(std::span<const double> values);

/// <X, Y>_F over all n^2 entries.
std::int64_t frobenius_inner(const SignMatrix& x, const SignMatrix& y);
/// ||X||_F^2, i.e. twice the number of untied pairs.
std::int64_t frobenius_norm_squared(const SignMatrix& x);
/// <X, Y>_F / (||X||_F ||Y||_F). Throws when either matrix is all zero.
double frobenius_tau(const SignMatrix& x, const SignMatrix& y);

/// Integer pair statistics over i < j. `score` is sum sign(dx) * sign(dy)
/// (concordant minus discordant), `untied_x/y` the pairs with dx != 0 / dy != 0.
struct PairCounts {
  std::int64_t pairs = 0;
  std::int64_t score = 0;
  std::int64_t untied_x = 0;
  std::int64_t untied_y = 0;
};

/// O(n log n) pair counting (merge-sort discordance count with tie bookkeeping).
PairCounts pair_counts(std::span<const double> x, std::span<const double> y);

/// score / sqrt(untied_x * untied_y): tau-b, identical to the Frobenius form.
double tau_from_counts(const PairCounts& counts);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

struct FiellerInterval {
  double low = 0.0;
  double high = 0.0;
  bool clamped = false;  // |tau| was 1 and got pulled inside the arctanh domain
};

/// Fisher-z interval with the Fieller-Hartley-Pearson variance 0.437 / (n - 4).
FiellerInterval fieller_ci(double tau, std::size_t n, double level);

enum class CiMethod { fieller };

struct TauResult {
  double tau = 0.0;
  std::size_t n = 0;
  std::optional<Interval> ci;  // absent when n <= 4
  double level = 0.95;
  CiMethod method = CiMethod::fieller;
  bool ci_clamped = false;
};

/// Kendall tau-b with a Fieller interval at `level`.
TauResult kendall_tau(std::span<const double> x, std::span<const double> y, double level = 0.95);

struct PermutationResult {
  double tau = 0.0;
  double p = 1.0;  // (1 + #{tau_perm >= tau_obs}) / (m + 1), one-sided
  std::size_t permutations = 0;
  double null_quantile = 0.0;  // quantile of the permutation distribution at `null_level`
  double null_level = 0.95;
};

PermutationResult permutation_null_test(std::span<const double> x, std::span<const double> y, std::size_t m,
                                        std::uint64_t seed, double null_level = 0.95);

struct QuartileGapResult {
  double gap = 0.0;  // mean outcome in top rating quartile minus bottom quartile
  double p = 1.0;    // bootstrap: (1 + #{gap_b <= 0}) / (m + 1)
  std::size_t quartile_size = 0;
  std::size_t n = 0;
  std::size_t bootstrap = 0;
};

/// Rank quartiles by rating; ties broken by position (callers pass unit-sorted panels).
double quartile_gap(std::span<const double> ratings, std::span<const double> outcomes);
QuartileGapResult quartile_gap_test(std::span<const double> ratings, std::span<const double> outcomes, std::size_t m,
                                    std::uint64_t seed);

struct BaselineComparison {
  double delta = 0.0;  // tau(x, y) - tau(baseline, y)
  double tau_x = 0.0;
  double tau_baseline = 0.0;
  Interval ci;         // percentile bootstrap interval of delta
  double p = 1.0;      // one-sided: (1 + #{delta_b <= 0}) / (m_used + 1)
  double level = 0.95;
  std::size_t bootstrap = 0;
  std::size_t bootstrap_used = 0;
};

BaselineComparison tau_vs_baseline(std::span<const double> x, std::span<const double> baseline,
                                   std::span<const double> y, std::size_t m, std::uint64_t seed,
                                   double level = 0.95);

}  // namespace alignmeter
