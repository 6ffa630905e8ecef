#include "alignmeter/concordance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "alignmeter/parallel.hpp"
#include "alignmeter/random.hpp"
#include "alignmeter/stats.hpp"

namespace alignmeter {
namespace {

void require_finite(std::span<const double> v, const char* what) {
  for (double d : v) {
    if (!std::isfinite(d)) throw std::invalid_argument(std::string(what) + ": non-finite value");
  }
}

void require_paired(std::span<const double> x, std::span<const double> y, const char* what) {
  if (x.size() != y.size()) throw std::invalid_argument(std::string(what) + ": vectors differ in length");
  if (x.size() < 2) throw std::invalid_argument(std::string(what) + ": need at least 2 observations");
  require_finite(x, what);
  require_finite(y, what);
}

int sign_of(double d) { return (d > 0) - (d < 0); }

std::int64_t tie_pairs_sorted(std::span<const double> sorted) {
  std::int64_t ties = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= sorted.size(); ++i) {
    if (i < sorted.size() && sorted[i] == sorted[i - 1]) {
      ++run;
    } else {
      ties += static_cast<std::int64_t>(run) * static_cast<std::int64_t>(run - 1) / 2;
      run = 1;
    }
  }
  return ties;
}

// Counts pairs i < j with v[i] > v[j] while sorting v ascending.
std::int64_t count_inversions(std::vector<double>& v, std::vector<double>& buffer) {
  std::int64_t inversions = 0;
  const std::size_t n = v.size();
  buffer.resize(n);
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo < n; lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, n);
      const std::size_t hi = std::min(lo + 2 * width, n);
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (v[j] < v[i]) {
          inversions += static_cast<std::int64_t>(mid - i);
          buffer[k++] = v[j++];
        } else {
          buffer[k++] = v[i++];
        }
      }
      while (i < mid) buffer[k++] = v[i++];
      while (j < hi) buffer[k++] = v[j++];
    }
    std::swap(v, buffer);
  }
  return inversions;
}

}  // namespace

// ---- sign matrices -----------------------------------------------------------

SignMatrix::SignMatrix(std::span<const double> values) : n_(values.size()) {
  if (n_ < 2) throw std::invalid_argument("sign_matrix: need at least 2 values");
  require_finite(values, "sign_matrix");
  entries_.assign(n_ * n_, 0);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) {
      const auto s = static_cast<std::int8_t>(sign_of(values[j] - values[i]));
      entries_[i * n_ + j] = s;
      entries_[j * n_ + i] = static_cast<std::int8_t>(-s);
    }
  }
}

SignMatrix sign_matrix(std::span<const double> values) { return SignMatrix(values); }

std::int64_t frobenius_inner(const SignMatrix& x, const SignMatrix& y) {
  if (x.size() != y.size()) throw std::invalid_argument("frobenius_inner: size mismatch");
  const auto a = x.entries();
  const auto b = y.entries();
  std::int64_t sum = 0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += a[k] * b[k];
  return sum;
}

std::int64_t frobenius_norm_squared(const SignMatrix& x) { return frobenius_inner(x, x); }

double frobenius_tau(const SignMatrix& x, const SignMatrix& y) {
  const std::int64_t nx = frobenius_norm_squared(x);
  const std::int64_t ny = frobenius_norm_squared(y);
  if (nx == 0 || ny == 0) throw std::invalid_argument("frobenius_tau: all pairs tied (zero norm)");
  // Both matrices count every pair twice; halve so the arithmetic matches tau_from_counts.
  const std::int64_t inner = frobenius_inner(x, y);
  return static_cast<double>(inner / 2) / std::sqrt(static_cast<double>(nx / 2) * static_cast<double>(ny / 2));
}

// ---- tau ---------------------------------------------------------------------

PairCounts pair_counts(std::span<const double> x, std::span<const double> y) {
  require_paired(x, y, "pair_counts");
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  std::vector<double> xs(n), ys(n);
  for (std::size_t k = 0; k < n; ++k) {
    xs[k] = x[order[k]];
    ys[k] = y[order[k]];
  }

  const std::int64_t n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t tied_x = tie_pairs_sorted(xs);

  std::int64_t tied_xy = 0;
  std::size_t run = 1;
  for (std::size_t k = 1; k <= n; ++k) {
    if (k < n && xs[k] == xs[k - 1] && ys[k] == ys[k - 1]) {
      ++run;
    } else {
      tied_xy += static_cast<std::int64_t>(run) * static_cast<std::int64_t>(run - 1) / 2;
      run = 1;
    }
  }

  std::vector<double> buffer;
  const std::int64_t discordant = count_inversions(ys, buffer);
  const std::int64_t tied_y = tie_pairs_sorted(ys);

  PairCounts c;
  c.pairs = n0;
  c.untied_x = n0 - tied_x;
  c.untied_y = n0 - tied_y;
  c.score = n0 - tied_x - tied_y + tied_xy - 2 * discordant;
  return c;
}

double tau_from_counts(const PairCounts& c) {
  if (c.untied_x == 0 || c.untied_y == 0) throw std::invalid_argument("kendall_tau: all pairs tied (zero norm)");
  return static_cast<double>(c.score) / std::sqrt(static_cast<double>(c.untied_x) * static_cast<double>(c.untied_y));
}

FiellerInterval fieller_ci(double tau, std::size_t n, double level) {
  if (n <= 4) throw std::invalid_argument("fieller_ci: need n >= 5");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("fieller_ci: level must lie in (0,1)");
  if (!std::isfinite(tau) || std::abs(tau) > 1.0) throw std::invalid_argument("fieller_ci: |tau| must be <= 1");

  FiellerInterval out;
  constexpr double kEdge = 1.0 - 1e-12;
  double t = tau;
  if (std::abs(t) > kEdge) {
    t = std::copysign(kEdge, t);
    out.clamped = true;
  }
  const double z = std::atanh(t);
  const double half = stats::two_sided_z(level) * std::sqrt(0.437 / static_cast<double>(n - 4));
  out.low = std::tanh(z - half);
  out.high = std::tanh(z + half);
  if (out.clamped) {
    // Keep the reported interval containing the unclamped estimate.
    out.low = std::min(out.low, tau);
    out.high = std::max(out.high, tau);
  }
  return out;
}

TauResult kendall_tau(std::span<const double> x, std::span<const double> y, double level) {
  const PairCounts c = pair_counts(x, y);
  TauResult r;
  r.tau = tau_from_counts(c);
  r.n = x.size();
  r.level = level;
  if (r.n > 4) {
    const auto ci = fieller_ci(r.tau, r.n, level);
    r.ci = Interval{ci.low, ci.high};
    r.ci_clamped = ci.clamped;
  }
  return r;
}

// ---- resampling tests --------------------------------------------------------

PermutationResult permutation_null_test(std::span<const double> x, std::span<const double> y, std::size_t m,
                                        std::uint64_t seed, double null_level) {
  if (m < 1) throw std::invalid_argument("permutation_null_test: need at least 1 permutation");
  if (!(null_level > 0.0 && null_level < 1.0)) throw std::invalid_argument("permutation_null_test: bad null level");
  const PairCounts observed = pair_counts(x, y);
  const double tau_obs = tau_from_counts(observed);

  // Denominators are permutation invariant, so comparing integer scores is exact.
  std::vector<std::int64_t> scores(m);
  parallel_for(m, [&](std::size_t k) {
    Rng rng = substream(seed, Stream::permutation, k);
    std::vector<double> yp(y.begin(), y.end());
    std::shuffle(yp.begin(), yp.end(), rng);
    scores[k] = pair_counts(x, yp).score;
  });

  PermutationResult r;
  r.tau = tau_obs;
  r.permutations = m;
  r.null_level = null_level;
  const auto exceed = std::count_if(scores.begin(), scores.end(), [&](auto s) { return s >= observed.score; });
  r.p = static_cast<double>(1 + exceed) / static_cast<double>(m + 1);
  std::vector<double> null_taus(m);
  for (std::size_t k = 0; k < m; ++k) {
    PairCounts c = observed;
    c.score = scores[k];
    null_taus[k] = tau_from_counts(c);
  }
  r.null_quantile = stats::quantile(null_taus, null_level);
  return r;
}

double quartile_gap(std::span<const double> ratings, std::span<const double> outcomes) {
  require_paired(ratings, outcomes, "quartile_gap");
  const std::size_t n = ratings.size();
  if (n < 8) throw std::invalid_argument("quartile_gap: need at least 8 units");
  if (std::all_of(ratings.begin(), ratings.end(), [&](double r) { return r == ratings[0]; })) {
    throw std::invalid_argument("quartile_gap: all ratings tied; quartiles undefined");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ratings[a] < ratings[b]; });
  const std::size_t q = n / 4;
  double low = 0.0, high = 0.0;
  for (std::size_t k = 0; k < q; ++k) {
    low += outcomes[order[k]];
    high += outcomes[order[n - q + k]];
  }
  return (high - low) / static_cast<double>(q);
}

QuartileGapResult quartile_gap_test(std::span<const double> ratings, std::span<const double> outcomes, std::size_t m,
                                    std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("quartile_gap_test: need at least 1 bootstrap replicate");
  QuartileGapResult r;
  r.gap = quartile_gap(ratings, outcomes);
  r.n = ratings.size();
  r.quartile_size = r.n / 4;
  r.bootstrap = m;

  std::vector<char> non_positive(m, 0);
  parallel_for(m, [&](std::size_t k) {
    Rng rng = substream(seed, Stream::quartile, k);
    std::uniform_int_distribution<std::size_t> pick(0, r.n - 1);
    std::vector<std::size_t> idx(r.n);
    for (auto& i : idx) i = pick(rng);
    std::sort(idx.begin(), idx.end());  // keeps unit order for tie-breaking
    std::vector<double> rb(r.n), ob(r.n);
    for (std::size_t i = 0; i < r.n; ++i) {
      rb[i] = ratings[idx[i]];
      ob[i] = outcomes[idx[i]];
    }
    const bool degenerate = std::all_of(rb.begin(), rb.end(), [&](double v) { return v == rb[0]; });
    non_positive[k] = degenerate || quartile_gap(rb, ob) <= 0.0;
  });
  const auto count = std::count(non_positive.begin(), non_positive.end(), 1);
  r.p = static_cast<double>(1 + count) / static_cast<double>(m + 1);
  return r;
}

BaselineComparison tau_vs_baseline(std::span<const double> x, std::span<const double> baseline,
                                   std::span<const double> y, std::size_t m, std::uint64_t seed, double level) {
  require_paired(x, y, "tau_vs_baseline");
  require_paired(baseline, y, "tau_vs_baseline");
  if (m < 1) throw std::invalid_argument("tau_vs_baseline: need at least 1 bootstrap replicate");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("tau_vs_baseline: level must lie in (0,1)");

  BaselineComparison r;
  r.tau_x = tau_from_counts(pair_counts(x, y));
  r.tau_baseline = tau_from_counts(pair_counts(baseline, y));
  r.delta = r.tau_x - r.tau_baseline;
  r.level = level;
  r.bootstrap = m;

  const std::size_t n = x.size();
  std::vector<double> deltas(m, std::numeric_limits<double>::quiet_NaN());
  parallel_for(m, [&](std::size_t k) {
    Rng rng = substream(seed, Stream::baseline, k);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<double> xb(n), bb(n), yb(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = pick(rng);
      xb[i] = x[j];
      bb[i] = baseline[j];
      yb[i] = y[j];
    }
    const auto cx = pair_counts(xb, yb);
    const auto cb = pair_counts(bb, yb);
    if (cx.untied_x == 0 || cb.untied_x == 0 || cx.untied_y == 0) return;
    deltas[k] = tau_from_counts(cx) - tau_from_counts(cb);
  });
  std::erase_if(deltas, [](double d) { return std::isnan(d); });
  r.bootstrap_used = deltas.size();
  if (deltas.empty()) {
    r.ci = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    r.p = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  const double alpha = 1.0 - level;
  r.ci = {stats::quantile(deltas, alpha / 2), stats::quantile(deltas, 1 - alpha / 2)};
  const auto count = std::count_if(deltas.begin(), deltas.end(), [](double d) { return d <= 0.0; });
  r.p = static_cast<double>(1 + count) / static_cast<double>(deltas.size() + 1);
  return r;
}

}  // namespace alignmeter
