#include "alignmeter/dependence.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "alignmeter/parallel.hpp"
#include "alignmeter/random.hpp"

namespace alignmeter {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_sample(std::span<const double> x, std::span<const double> y, const char* what) {
  if (x.size() != y.size()) throw std::invalid_argument(std::string(what) + ": vectors differ in length");
  if (x.size() < 4) throw std::invalid_argument(std::string(what) + ": need n >= 4");
  for (double v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite value");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite value");
  }
}

std::vector<double> centered(std::span<const double> v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  std::vector<double> out(v.begin(), v.end());
  for (auto& d : out) d -= m;
  return out;
}

// a_i = sum_j |v_i - v_j| via sorting and prefix sums.
std::vector<double> distance_row_sums(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) prefix[k + 1] = prefix[k] + v[order[k]];
  std::vector<double> sums(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double val = v[order[k]];
    const double below = val * static_cast<double>(k) - prefix[k];
    const double above = (prefix[n] - prefix[k + 1]) - val * static_cast<double>(n - 1 - k);
    sums[order[k]] = below + above;
  }
  return sums;
}

class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : tree_(n + 1, 0.0) {}
  void add(std::size_t i, double v) {
    for (++i; i < tree_.size(); i += i & (~i + 1)) tree_[i] += v;
  }
  // Sum over indices [0, i).
  double prefix(std::size_t i) const {
    double s = 0.0;
    for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::vector<double> tree_;
};

// sum_{i != j} |x_i - x_j| |y_i - y_j| in O(n log n).
double cross_distance_sum(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  std::vector<std::size_t> by_x(n);
  std::iota(by_x.begin(), by_x.end(), std::size_t{0});
  std::sort(by_x.begin(), by_x.end(), [&](auto a, auto b) { return x[a] < x[b]; });

  std::vector<double> ys(y.begin(), y.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  auto rank_of = [&](double v) {
    return static_cast<std::size_t>(std::lower_bound(ys.begin(), ys.end(), v) - ys.begin());
  };

  const std::size_t m = ys.size();
  Fenwick count(m), sum_x(m), sum_y(m), sum_xy(m);
  double tot_count = 0, tot_x = 0, tot_y = 0, tot_xy = 0;
  double total = 0.0;
  for (std::size_t idx : by_x) {
    const double xj = x[idx];
    const double yj = y[idx];
    const std::size_t r = rank_of(yj);
    // Earlier points with smaller y carry sign +1, larger y sign -1; ties drop out.
    const double c_lo = count.prefix(r), x_lo = sum_x.prefix(r), y_lo = sum_y.prefix(r), xy_lo = sum_xy.prefix(r);
    const double c_le = count.prefix(r + 1), x_le = sum_x.prefix(r + 1), y_le = sum_y.prefix(r + 1),
                 xy_le = sum_xy.prefix(r + 1);
    const double c = c_lo - (tot_count - c_le);
    const double sx = x_lo - (tot_x - x_le);
    const double sy = y_lo - (tot_y - y_le);
    const double sxy = xy_lo - (tot_xy - xy_le);
    total += xj * yj * c - xj * sy - yj * sx + sxy;

    count.add(r, 1.0);
    sum_x.add(r, xj);
    sum_y.add(r, yj);
    sum_xy.add(r, xj * yj);
    tot_count += 1.0;
    tot_x += xj;
    tot_y += yj;
    tot_xy += xj * yj;
  }
  return 2.0 * total;
}

}  // namespace

// ---- U-centering -------------------------------------------------------------

UCenteredMatrix::UCenteredMatrix(std::span<const double> values) : n_(values.size()) {
  if (n_ < 4) throw std::invalid_argument("ucenter: need n >= 4");
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("ucenter: non-finite value");
  }
  const double n = static_cast<double>(n_);
  std::vector<double> row(n_, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) row[i] += std::abs(values[i] - values[j]);
    grand += row[i];
  }
  entries_.assign(n_ * n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) {
      if (i == j) continue;
      entries_[i * n_ + j] = std::abs(values[i] - values[j]) - row[i] / (n - 2) - row[j] / (n - 2) +
                             grand / ((n - 1) * (n - 2));
    }
  }
}

UCenteredMatrix ucenter(std::span<const double> values) { return UCenteredMatrix(values); }

double u_inner(const UCenteredMatrix& a, const UCenteredMatrix& b) {
  if (a.size() != b.size()) throw std::invalid_argument("u_inner: size mismatch");
  const auto ea = a.entries();
  const auto eb = b.entries();
  double s = 0.0;
  for (std::size_t k = 0; k < ea.size(); ++k) s += ea[k] * eb[k];
  const double n = static_cast<double>(a.size());
  return s / (n * (n - 3));
}

double dcov2_u(std::span<const double> x, std::span<const double> y) {
  require_sample(x, y, "dcov2_u");
  const auto xc = centered(x);
  const auto yc = centered(y);
  const double n = static_cast<double>(x.size());
  const auto a = distance_row_sums(xc);
  const auto b = distance_row_sums(yc);
  double t2 = 0.0, a_tot = 0.0, b_tot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    t2 += a[i] * b[i];
    a_tot += a[i];
    b_tot += b[i];
  }
  const double t1 = cross_distance_sum(xc, yc);
  const double inner = t1 - 2.0 * t2 / (n - 2) + a_tot * b_tot / ((n - 1) * (n - 2));
  return inner / (n * (n - 3));
}

DependenceResult dcor2_bias_corrected(std::span<const double> x, std::span<const double> y) {
  require_sample(x, y, "dcor2_bias_corrected");
  const double vx = dcov2_u(x, x);
  const double vy = dcov2_u(y, y);
  if (!(vx > 0.0) || !(vy > 0.0)) {
    throw std::invalid_argument("dcor2_bias_corrected: distance variance is not positive (constant input?)");
  }
  DependenceResult r;
  r.n = x.size();
  r.dcor2 = dcov2_u(x, y) / std::sqrt(vx * vy);
  return r;
}

double dcor_significance(std::span<const double> x, std::span<const double> y, std::size_t m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("dcor_significance: need at least 1 permutation");
  require_sample(x, y, "dcor_significance");
  const double vx = dcov2_u(x, x);
  const double vy = dcov2_u(y, y);
  if (!(vx > 0.0) || !(vy > 0.0)) throw std::invalid_argument("dcor_significance: constant input");
  // The normalizer is permutation invariant; compare numerators with a rounding allowance.
  const double observed = dcov2_u(x, y);
  const double tolerance = 1e-12 * (std::abs(observed) + std::sqrt(vx * vy));
  std::vector<char> exceed(m, 0);
  parallel_for(m, [&](std::size_t k) {
    Rng rng = substream(seed, Stream::dcor_permutation, k);
    std::vector<double> yp(y.begin(), y.end());
    std::shuffle(yp.begin(), yp.end(), rng);
    exceed[k] = dcov2_u(x, yp) >= observed - tolerance;
  });
  const auto count = std::count(exceed.begin(), exceed.end(), 1);
  return static_cast<double>(1 + count) / static_cast<double>(m + 1);
}

std::vector<bool> bonferroni(std::span<const double> p_values, double alpha) {
  if (p_values.empty()) throw std::invalid_argument("bonferroni: empty family");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("bonferroni: alpha must lie in (0,1)");
  const double threshold = alpha / static_cast<double>(p_values.size());
  std::vector<bool> mask;
  mask.reserve(p_values.size());
  for (double p : p_values) mask.push_back(p <= threshold);
  return mask;
}

FisherZMean fisher_z_mean(std::span<const double> values, std::span<const double> weights) {
  if (values.empty()) throw std::invalid_argument("fisher_z_mean: empty input");
  if (!weights.empty() && weights.size() != values.size()) {
    throw std::invalid_argument("fisher_z_mean: weights differ in length from values");
  }
  constexpr double kEdge = 1.0 - 1e-12;
  FisherZMean out;
  out.count = values.size();
  std::vector<double> z(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    double v = values[i];
    if (!std::isfinite(v) || std::abs(v) > 1.0 + 1e-9) {
      throw std::invalid_argument("fisher_z_mean: value outside [-1, 1]");
    }
    if (std::abs(v) > kEdge) {
      v = std::copysign(kEdge, v);
      ++out.clamped;
    }
    z[i] = std::atanh(v);
  }
  std::vector<double> w(values.size(), 1.0);
  if (!weights.empty()) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
        throw std::invalid_argument("fisher_z_mean: weights must be finite and nonnegative");
      }
      w[i] = weights[i];
    }
  }
  double sw = 0, sw2 = 0, swz = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    sw += w[i];
    sw2 += w[i] * w[i];
    swz += w[i] * z[i];
  }
  if (!(sw > 0.0)) throw std::invalid_argument("fisher_z_mean: weights sum to zero");
  const double zbar = swz / sw;
  const double n_eff = sw * sw / sw2;
  if (n_eff > 1.0) {
    double ss = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) ss += w[i] * (z[i] - zbar) * (z[i] - zbar);
    const double var = ss / sw * n_eff / (n_eff - 1.0);
    out.se_z = std::sqrt(var / n_eff);
  }
  out.mean = std::tanh(zbar);
  out.lower = std::tanh(zbar - out.se_z);
  out.upper = std::tanh(zbar + out.se_z);
  return out;
}

// ---- matrices and summaries ----------------------------------------------------

std::string SourceTask::label() const { return source.label() + "@" + task_id; }

std::vector<SourceTask> source_tasks(const RatingsTable& ratings) {
  std::set<SourceTask> s;
  for (const auto& r : ratings.records()) s.insert({{r.rater_id, r.prompt_id}, r.rater_family, r.task_id});
  return {s.begin(), s.end()};
}

DependenceMatrix pairwise_dependence(const RatingsTable& ratings, const std::vector<SourceTask>& sources,
                                     std::size_t permutations, std::uint64_t seed) {
  const std::size_t k = sources.size();
  DependenceMatrix out;
  out.sources = sources;
  out.dcor2.assign(k * k, kNaN);
  out.p.assign(k * k, kNaN);
  out.n.assign(k * k, 0);

  std::vector<std::map<std::string, double>> columns;
  columns.reserve(k);
  for (const auto& s : sources) columns.push_back(ratings.scores(s.source, s.task_id));

  for (std::size_t i = 0; i < k; ++i) {
    out.dcor2[i * k + i] = 1.0;
    out.n[i * k + i] = columns[i].size();
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      JoinedPanel panel;
      try {
        panel = join_values(columns[i], columns[j]);
      } catch (const std::invalid_argument&) {
        continue;
      }
      out.n[i * k + j] = out.n[j * k + i] = panel.n();
      if (panel.n() < 4) continue;
      double d = kNaN;
      try {
        d = dcor2_bias_corrected(panel.x, panel.y).dcor2;
      } catch (const std::invalid_argument&) {
        continue;
      }
      out.dcor2[i * k + j] = out.dcor2[j * k + i] = d;
      if (permutations > 0) {
        const auto pair_seed = derive_seed(seed, sources[i].label() + "~" + sources[j].label());
        const double p = dcor_significance(panel.x, panel.y, permutations, pair_seed);
        out.p[i * k + j] = out.p[j * k + i] = p;
      }
    }
  }
  return out;
}

std::string to_string(Relation r) {
  switch (r) {
    case Relation::with_humans: return "with_humans";
    case Relation::with_other_models: return "with_other_models";
    case Relation::intramodel: return "intramodel";
  }
  return "unknown";
}

std::string to_string(TaskScope s) { return s == TaskScope::same_task ? "same_task" : "different_task"; }

DependenceSummary dependence_summary(const DependenceMatrix& matrix) {
  DependenceSummary summary;
  std::map<std::pair<TaskScope, Relation>, std::vector<double>> groups;
  const std::size_t k = matrix.size();
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const auto& a = matrix.sources[i];
      const auto& b = matrix.sources[j];
      const double d = matrix.dcor(i, j);
      const bool a_model = a.family == RaterFamily::model;
      const bool b_model = b.family == RaterFamily::model;
      std::optional<Relation> relation;
      if (a_model && b_model) {
        relation = a.source.rater_id == b.source.rater_id ? Relation::intramodel : Relation::with_other_models;
      } else if ((a_model && b.family == RaterFamily::human) || (b_model && a.family == RaterFamily::human)) {
        relation = Relation::with_humans;
      }
      if (!relation || std::isnan(d)) {
        ++summary.skipped_pairs;
        continue;
      }
      const auto scope = a.task_id == b.task_id ? TaskScope::same_task : TaskScope::different_task;
      groups[{scope, *relation}].push_back(d);
    }
  }
  for (auto scope : {TaskScope::same_task, TaskScope::different_task}) {
    for (auto relation : {Relation::with_humans, Relation::with_other_models, Relation::intramodel}) {
      SummaryCell cell;
      cell.scope = scope;
      cell.relation = relation;
      const auto it = groups.find({scope, relation});
      cell.pairs = it == groups.end() ? 0 : it->second.size();
      if (scope == TaskScope::same_task && relation == Relation::intramodel) {
        cell.status = SummaryCell::Status::redundant;
      } else if (cell.pairs > 0) {
        // Bias-corrected values can dip below zero; Fisher z handles them as-is.
        cell.stats = fisher_z_mean(it->second);
        cell.status = SummaryCell::Status::present;
        summary.clamped += cell.stats.clamped;
      }
      summary.cells.push_back(cell);
    }
  }
  return summary;
}

// ---- clustering ----------------------------------------------------------------

Dendrogram complete_linkage_cluster(std::span<const double> dissimilarity, const std::vector<std::string>& labels) {
  const std::size_t n = labels.size();
  if (n == 0) throw std::invalid_argument("complete_linkage_cluster: no items");
  if (dissimilarity.size() != n * n) throw std::invalid_argument("complete_linkage_cluster: matrix is not n x n");
  double scale = 0.0;
  for (double d : dissimilarity) {
    if (!std::isfinite(d)) throw std::invalid_argument("complete_linkage_cluster: non-finite dissimilarity");
    scale = std::max(scale, std::abs(d));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (dissimilarity[i * n + i] != 0.0) throw std::invalid_argument("complete_linkage_cluster: nonzero diagonal");
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(dissimilarity[i * n + j] - dissimilarity[j * n + i]) > 1e-12 * std::max(1.0, scale)) {
        throw std::invalid_argument("complete_linkage_cluster: matrix is not symmetric");
      }
    }
  }

  Dendrogram out;
  out.labels = labels;
  // Cluster state: id, members' smallest label, distances to other active clusters.
  std::vector<std::size_t> active(n);
  std::iota(active.begin(), active.end(), std::size_t{0});
  std::vector<std::string> min_label(labels);
  std::vector<std::size_t> sizes(n, 1);
  std::map<std::pair<std::size_t, std::size_t>, double> dist;
  auto key = [](std::size_t a, std::size_t b) { return a < b ? std::pair{a, b} : std::pair{b, a}; };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) dist[{i, j}] = dissimilarity[i * n + j];
  }
  std::vector<std::pair<std::size_t, std::size_t>> children(n, {n, n});

  while (active.size() > 1) {
    std::size_t best_a = 0, best_b = 0;
    double best = std::numeric_limits<double>::infinity();
    std::pair<std::string, std::string> best_tie;
    for (std::size_t u = 0; u < active.size(); ++u) {
      for (std::size_t v = u + 1; v < active.size(); ++v) {
        const std::size_t a = active[u], b = active[v];
        const double d = dist.at(key(a, b));
        auto tie = std::minmax(min_label[a], min_label[b]);
        std::pair<std::string, std::string> tie_key{tie.first, tie.second};
        if (d < best || (d == best && tie_key < best_tie)) {
          best = d;
          best_a = a;
          best_b = b;
          best_tie = std::move(tie_key);
        }
      }
    }
    if (min_label[best_b] < min_label[best_a]) std::swap(best_a, best_b);
    const std::size_t id = min_label.size();
    out.merges.push_back({best_a, best_b, best, sizes[best_a] + sizes[best_b]});
    min_label.push_back(std::min(min_label[best_a], min_label[best_b]));
    sizes.push_back(sizes[best_a] + sizes[best_b]);
    children.emplace_back(best_a, best_b);
    std::erase_if(active, [&](std::size_t c) { return c == best_a || c == best_b; });
    for (std::size_t c : active) dist[key(id, c)] = std::max(dist.at(key(best_a, c)), dist.at(key(best_b, c)));
    active.push_back(id);
  }

  std::function<void(std::size_t)> visit = [&](std::size_t c) {
    if (c < n) {
      out.leaf_order.push_back(c);
      return;
    }
    visit(children[c].first);
    visit(children[c].second);
  };
  visit(active.front());
  return out;
}

}  // namespace alignmeter
