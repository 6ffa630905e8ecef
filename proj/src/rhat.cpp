#include "alignmeter/rhat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "alignmeter/stats.hpp"

namespace alignmeter {
namespace {

std::vector<std::vector<double>> split(std::span<const std::vector<double>> chains) {
  if (chains.size() < 1) throw std::invalid_argument("split_rhat: no chains");
  const std::size_t n = chains.front().size();
  for (const auto& c : chains) {
    if (c.size() != n) throw std::invalid_argument("split_rhat: chains differ in length");
  }
  if (n < 4) throw std::invalid_argument("split_rhat: need at least 4 draws per chain");
  const std::size_t half = n / 2;
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    // Odd lengths drop the middle draw.
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

double classic(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  const auto n = static_cast<double>(chains.front().size());
  std::vector<double> means(m), vars(m);
  for (std::size_t k = 0; k < m; ++k) {
    means[k] = stats::mean(chains[k]);
    vars[k] = stats::sample_variance(chains[k]);
  }
  const double w = stats::mean(vars);
  const double b = n * stats::sample_variance(means);
  if (!(w > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

// Replaces each draw by the normal score of its pooled average rank.
std::vector<std::vector<double>> rank_normalize(const std::vector<std::vector<double>>& chains) {
  std::vector<std::pair<double, std::size_t>> pooled;
  for (std::size_t k = 0; k < chains.size(); ++k) {
    for (double v : chains[k]) pooled.emplace_back(v, pooled.size());
  }
  const std::size_t s = pooled.size();
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> ranks(s);
  for (std::size_t i = 0; i < s;) {
    std::size_t j = i;
    while (j < s && pooled[j].first == pooled[i].first) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[pooled[k].second] = avg;
    i = j;
  }
  std::vector<std::vector<double>> out;
  std::size_t pos = 0;
  const auto total = static_cast<double>(s);
  for (const auto& c : chains) {
    std::vector<double> z(c.size());
    for (auto& v : z) v = stats::normal_quantile((ranks[pos++] - 0.375) / (total + 0.25));
    out.push_back(std::move(z));
  }
  return out;
}

}  // namespace

double split_rhat_classic(std::span<const std::vector<double>> chains) { return classic(split(chains)); }

double split_rhat_bulk(std::span<const std::vector<double>> chains) {
  return classic(rank_normalize(split(chains)));
}

double split_rhat(std::span<const std::vector<double>> chains) {
  const auto halves = split(chains);
  const double bulk = classic(rank_normalize(halves));
  std::vector<double> all;
  for (const auto& c : halves) all.insert(all.end(), c.begin(), c.end());
  const double med = stats::median(all);
  auto folded = halves;
  for (auto& c : folded) {
    for (auto& v : c) v = std::abs(v - med);
  }
  const double tail = classic(rank_normalize(folded));
  if (std::isnan(bulk) || std::isnan(tail)) return std::isnan(bulk) ? tail : bulk;
  return std::max(bulk, tail);
}

}  // namespace alignmeter
