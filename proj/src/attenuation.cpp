#include "alignmeter/attenuation.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "alignmeter/concordance.hpp"

namespace alignmeter {

double disattenuate(double tau_raw, double reliability) {
  if (!std::isfinite(tau_raw)) throw std::invalid_argument("disattenuate: non-finite tau");
  if (!(reliability > 0.0)) throw std::invalid_argument("disattenuate: reliability must be positive");
  return tau_raw / std::sqrt(reliability);
}

double greiner(double tau) {
  if (!(std::abs(tau) <= 1.0)) throw std::invalid_argument("greiner: |tau| must not exceed 1");
  return std::sin(std::numbers::pi * tau / 2.0);
}

std::string to_string(ReliabilityScope scope) {
  return scope == ReliabilityScope::pooled ? "pooled" : "within_year";
}

std::optional<ReliabilityScope> parse_reliability_scope(std::string_view text) {
  if (text == "pooled") return ReliabilityScope::pooled;
  if (text == "within_year") return ReliabilityScope::within_year;
  return std::nullopt;
}

ReliabilityEstimate stacked_reliability(const OutcomeTable& outcomes, std::string_view variant_a,
                                        std::string_view variant_b, ReliabilityScope scope) {
  if (!outcomes.has_outcome(variant_a)) throw InputError("unknown outcome variant: " + std::string(variant_a));
  if (!outcomes.has_outcome(variant_b)) throw InputError("unknown outcome variant: " + std::string(variant_b));
  const auto a = outcomes.values(variant_a);
  const auto b = outcomes.values(variant_b);

  ReliabilityEstimate out;
  out.scope = scope;
  JoinedPanel pooled;
  try {
    pooled = join_values(a, b);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("stacked_reliability: fewer than 2 units carry both variants");
  }
  out.n = pooled.n();

  if (scope == ReliabilityScope::pooled) {
    out.value = tau_from_counts(pair_counts(pooled.x, pooled.y));
  } else {
    const auto years = outcomes.years(variant_a);
    std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_year;
    for (std::size_t i = 0; i < pooled.n(); ++i) {
      const auto it = years.find(pooled.units[i]);
      if (it == years.end()) throw InputError("within-year reliability needs a year for unit " + pooled.units[i]);
      by_year[it->second].first.push_back(pooled.x[i]);
      by_year[it->second].second.push_back(pooled.y[i]);
    }
    double weighted = 0.0, weight = 0.0;
    for (const auto& [year, xy] : by_year) {
      if (xy.first.size() < 2) continue;
      const auto counts = pair_counts(xy.first, xy.second);
      if (counts.untied_x == 0 || counts.untied_y == 0) continue;
      const double t = tau_from_counts(counts);
      out.per_year[year] = t;
      weighted += static_cast<double>(counts.pairs) * t;
      weight += static_cast<double>(counts.pairs);
    }
    if (weight == 0.0) throw std::invalid_argument("stacked_reliability: no year has 2 comparable units");
    out.value = weighted / weight;
  }
  out.usable = out.value > 0.0;
  return out;
}

AttenuationResult correct_alignment(double tau_raw, double reliability, bool use_greiner) {
  AttenuationResult r;
  r.tau_raw = tau_raw;
  r.reliability = reliability;
  r.greiner_applied = use_greiner;
  if (!(reliability > 0.0)) return r;
  if (use_greiner) {
    r.tau_corrected = disattenuate(greiner(tau_raw), greiner(reliability));
  } else {
    r.tau_corrected = disattenuate(tau_raw, reliability);
  }
  return r;
}

}  // namespace alignmeter
