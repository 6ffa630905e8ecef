#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alignmeter/data_model.hpp"

namespace alignmeter {

/// U-centered distance matrix of a univariate sample (zero diagonal, zero
/// row and column sums).
class UCenteredMatrix {
 public:
  explicit UCenteredMatrix(std::span<const double> values);

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
  std::span<const double> entries() const noexcept { return entries_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> entries_;
};

UCenteredMatrix ucenter(std::span<const double> values);

/// sum_{i != j} A~_ij B~_ij / (n (n - 3)) computed from the matrices.
double u_inner(const UCenteredMatrix& a, const UCenteredMatrix& b);

/// Bias-corrected dCov^2_n in O(n log n) without forming the matrices.
double dcov2_u(std::span<const double> x, std::span<const double> y);

struct DependenceResult {
  double dcor2 = 0.0;  // may be slightly negative
  std::optional<double> p;
  std::size_t n = 0;
  std::string label_a;
  std::string label_b;
};

/// Bias-corrected squared distance correlation. Throws when either distance
/// variance is not positive (e.g. a constant vector).
DependenceResult dcor2_bias_corrected(std::span<const double> x, std::span<const double> y);

/// One-sided permutation p for dcor2: (1 + #{perm >= obs}) / (m + 1).
double dcor_significance(std::span<const double> x, std::span<const double> y, std::size_t m, std::uint64_t seed);

/// significant[k] iff p[k] <= alpha / m, m = family size.
std::vector<bool> bonferroni(std::span<const double> p_values, double alpha);

struct FisherZMean {
  double mean = 0.0;   // tanh(mean z)
  double se_z = 0.0;   // standard error in z space
  double lower = 0.0;  // tanh(mean z - se_z)
  double upper = 0.0;  // tanh(mean z + se_z)
  std::size_t count = 0;
  std::size_t clamped = 0;  // inputs pulled inside (-1, 1)
};

/// Averages correlations under Fisher's z. With weights the mean is weighted
/// and the SE uses the effective sample size (sum w)^2 / sum w^2.
FisherZMean fisher_z_mean(std::span<const double> values, std::span<const double> weights = {});

/// A rating source restricted to one task (one row/column of a dependence matrix).
struct SourceTask {
  SourceKey source;
  RaterFamily family = RaterFamily::model;
  std::string task_id;

  std::string label() const;
  friend auto operator<=>(const SourceTask&, const SourceTask&) = default;
};

struct DependenceMatrix {
  std::vector<SourceTask> sources;
  std::vector<double> dcor2;  // row-major, NaN when a pair is not computable
  std::vector<double> p;      // NaN when not tested
  std::vector<std::size_t> n;

  std::size_t size() const noexcept { return sources.size(); }
  double dcor(std::size_t i, std::size_t j) const { return dcor2[i * size() + j]; }
  double p_value(std::size_t i, std::size_t j) const { return p[i * size() + j]; }
};

/// Pairwise-complete dcor2 for every pair of (source, task) columns. When
/// `permutations` > 0 each pair gets a permutation p-value.
DependenceMatrix pairwise_dependence(const RatingsTable& ratings, const std::vector<SourceTask>& sources,
                                     std::size_t permutations, std::uint64_t seed);

/// All (source, task) columns in the table, sorted.
std::vector<SourceTask> source_tasks(const RatingsTable& ratings);

enum class Relation { with_humans, with_other_models, intramodel };
enum class TaskScope { same_task, different_task };

struct SummaryCell {
  TaskScope scope = TaskScope::same_task;
  Relation relation = Relation::with_humans;
  enum class Status { present, absent, redundant } status = Status::absent;
  FisherZMean stats;
  std::size_t pairs = 0;
};

struct DependenceSummary {
  std::vector<SummaryCell> cells;  // six cells: scope x relation
  std::size_t skipped_pairs = 0;   // pairs not involving a model, or not computable
  std::size_t clamped = 0;
};

/// Classifies every model-involving pair and Fisher-z averages each cell.
/// The intramodel same-task cell is always marked redundant.
DependenceSummary dependence_summary(const DependenceMatrix& matrix);

std::string to_string(Relation r);
std::string to_string(TaskScope s);

struct Merge {
  std::size_t left = 0;   // cluster ids: 0..n-1 leaves, n.. merged clusters in merge order
  std::size_t right = 0;
  double height = 0.0;
  std::size_t size = 0;
};

struct Dendrogram {
  std::vector<std::string> labels;
  std::vector<Merge> merges;
  std::vector<std::size_t> leaf_order;
};

/// Agglomerative clustering with complete (maximum) linkage. Ties in merge
/// height are broken by the lexicographically smallest leaf labels.
Dendrogram complete_linkage_cluster(std::span<const double> dissimilarity, const std::vector<std::string>& labels);

}  // namespace alignmeter
