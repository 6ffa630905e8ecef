#include "alignmeter/synthetic.hpp"

#include <algorithm>
#include <bit>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "alignmeter/random.hpp"
#include "alignmeter/stats.hpp"

namespace alignmeter::synthetic {
namespace {

std::string padded(char prefix, std::size_t index, std::size_t count) {
  const std::size_t width = std::to_string(count).size();
  std::string digits = std::to_string(index + 1);
  return std::string(1, prefix) + std::string(width - std::min(width, digits.size()), '0') + digits;
}

std::string padded(std::string_view prefix, std::size_t index, std::size_t count) {
  const std::size_t width = std::to_string(count).size();
  std::string digits = std::to_string(index + 1);
  return std::string(prefix) + std::string(width - std::min(width, digits.size()), '0') + digits;
}

// Equal-probability cut points for a N(0, sd^2) variable.
std::vector<double> cut_points(std::size_t bins, double sd) {
  std::vector<double> cuts;
  for (std::size_t j = 1; j < bins; ++j) {
    cuts.push_back(sd * stats::normal_quantile(static_cast<double>(j) / static_cast<double>(bins)));
  }
  return cuts;
}

double bin_of(double v, const std::vector<double>& cuts) {
  return 1.0 + static_cast<double>(std::upper_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
}

}  // namespace

MisalignmentPanel gen_crossed(const PlantedDesign& design) {
  for (auto s : design.sizes) {
    if (s == 0) throw std::invalid_argument("gen_crossed: facet sizes must be positive");
  }
  double total = design.residual_sigma2;
  if (!(design.residual_sigma2 >= 0.0) || !std::isfinite(design.residual_sigma2)) {
    throw std::invalid_argument("gen_crossed: residual variance must be nonnegative");
  }
  for (const auto& [term, v] : design.sigma2) {
    if (term == 0 || term >= kAllFacets) throw std::invalid_argument("gen_crossed: invalid term");
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("gen_crossed: variances must be nonnegative");
    total += v;
  }
  if (!(total > 0.0)) throw std::invalid_argument("gen_crossed: zero total variance");

  const auto& n = design.sizes;
  auto table_size = [&](TermMask t) {
    std::size_t s = 1;
    for (unsigned f = 0; f < 4; ++f) {
      if (t & (1u << f)) s *= n[f];
    }
    return s;
  };
  auto code_of = [&](const std::array<std::size_t, 4>& cell, TermMask t) {
    std::size_t code = 0;
    for (unsigned f = 0; f < 4; ++f) {
      if (t & (1u << f)) code = code * n[f] + cell[f];
    }
    return code;
  };

  Rng rng = substream(design.seed, Stream::synthetic, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::map<TermMask, std::vector<double>> effects;
  for (const auto& [term, v] : design.sigma2) {
    if (v == 0.0) continue;
    std::vector<double> e(table_size(term));
    for (auto& x : e) x = normal(rng);
    if (design.draw == EffectDraw::exact && std::popcount(term) == 1) {
      if (e.size() < 2) {
        std::fill(e.begin(), e.end(), 0.0);
      } else {
        const double m = stats::mean(e);
        for (auto& x : e) x -= m;
        const double scale = std::sqrt(v / stats::sample_variance(e));
        for (auto& x : e) x *= scale;
      }
    } else {
      const double sd = std::sqrt(v);
      for (auto& x : e) x *= sd;
    }
    effects.emplace(term, std::move(e));
  }

  const double eps_sd = std::sqrt(design.residual_sigma2);
  MisalignmentPanel panel;
  panel.rows.reserve(table_size(kAllFacets));
  std::array<std::size_t, 4> cell{};
  for (cell[0] = 0; cell[0] < n[0]; ++cell[0]) {
    for (cell[1] = 0; cell[1] < n[1]; ++cell[1]) {
      for (cell[2] = 0; cell[2] < n[2]; ++cell[2]) {
        for (cell[3] = 0; cell[3] < n[3]; ++cell[3]) {
          double y = 0.0;
          for (const auto& [term, e] : effects) y += e[code_of(cell, term)];
          y += eps_sd * normal(rng);
          panel.rows.push_back({padded('c', cell[0], n[0]), padded('i', cell[1], n[1]), padded('m', cell[2], n[2]),
                                padded('p', cell[3], n[3]), y});
        }
      }
    }
  }
  return panel;
}

double bivariate_normal_cdf(double h, double k, double rho) {
  if (!(std::abs(rho) <= 1.0)) throw std::invalid_argument("bivariate_normal_cdf: |rho| must not exceed 1");
  if (h == -std::numeric_limits<double>::infinity() || k == -std::numeric_limits<double>::infinity()) return 0.0;
  if (h == std::numeric_limits<double>::infinity()) return stats::normal_cdf(k);
  if (k == std::numeric_limits<double>::infinity()) return stats::normal_cdf(h);
  if (rho == 0.0) return stats::normal_cdf(h) * stats::normal_cdf(k);
  // d/dr Phi2(h, k; r) is the bivariate density at (h, k).
  auto density = [&](double r) {
    const double one_minus = 1.0 - r * r;
    return std::exp(-(h * h - 2.0 * r * h * k + k * k) / (2.0 * one_minus)) /
           (2.0 * std::numbers::pi * std::sqrt(one_minus));
  };
  const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(density, 0.0, rho, 15, 1e-13);
  return stats::normal_cdf(h) * stats::normal_cdf(k) + integral;
}

double binned_tau(double rho, std::size_t bins_x, std::size_t bins_y) {
  if (bins_x < 2 || bins_y < 2) throw std::invalid_argument("binned_tau: need at least 2 bins per axis");
  auto cuts = [](std::size_t bins) {
    std::vector<double> c{-std::numeric_limits<double>::infinity()};
    for (std::size_t j = 1; j < bins; ++j) {
      c.push_back(stats::normal_quantile(static_cast<double>(j) / static_cast<double>(bins)));
    }
    c.push_back(std::numeric_limits<double>::infinity());
    return c;
  };
  const auto cx = cuts(bins_x);
  const auto cy = cuts(bins_y);
  std::vector<std::vector<double>> cdf(bins_x + 1, std::vector<double>(bins_y + 1));
  for (std::size_t i = 0; i <= bins_x; ++i) {
    for (std::size_t j = 0; j <= bins_y; ++j) cdf[i][j] = bivariate_normal_cdf(cx[i], cy[j], rho);
  }
  std::vector<std::vector<double>> p(bins_x, std::vector<double>(bins_y));
  for (std::size_t i = 0; i < bins_x; ++i) {
    for (std::size_t j = 0; j < bins_y; ++j) {
      p[i][j] = cdf[i + 1][j + 1] - cdf[i][j + 1] - cdf[i + 1][j] + cdf[i][j];
    }
  }
  double num = 0.0;
  for (std::size_t i = 0; i < bins_x; ++i) {
    for (std::size_t j = 0; j < bins_y; ++j) {
      double conc = 0.0, disc = 0.0;
      for (std::size_t k = i + 1; k < bins_x; ++k) {
        for (std::size_t l = 0; l < bins_y; ++l) {
          if (l > j) conc += p[k][l];
          if (l < j) disc += p[k][l];
        }
      }
      num += 2.0 * p[i][j] * (conc - disc);
    }
  }
  const double tie_x = 1.0 / static_cast<double>(bins_x);
  const double tie_y = 1.0 / static_cast<double>(bins_y);
  return num / std::sqrt((1.0 - tie_x) * (1.0 - tie_y));
}

TauPair gen_tau_pair(const CopulaSpec& spec, std::uint64_t seed) {
  if (!(std::abs(spec.target_tau) < 1.0)) throw std::invalid_argument("gen_tau_pair: |target_tau| must be below 1");
  if (spec.n < 2) throw std::invalid_argument("gen_tau_pair: need n >= 2");
  if (spec.bins && *spec.bins < 2) throw std::invalid_argument("gen_tau_pair: need at least 2 bins");
  TauPair out;
  out.rho = std::sin(std::numbers::pi * spec.target_tau / 2.0);
  const double comp = std::sqrt(1.0 - out.rho * out.rho);
  Rng rng = substream(seed, Stream::synthetic, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  out.x.resize(spec.n);
  out.y.resize(spec.n);
  for (std::size_t k = 0; k < spec.n; ++k) {
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    out.x[k] = z1;
    out.y[k] = out.rho * z1 + comp * z2;
  }
  if (spec.bins) {
    const auto cuts = cut_points(*spec.bins, 1.0);
    for (auto& v : out.x) v = bin_of(v, cuts);
    for (auto& v : out.y) v = bin_of(v, cuts);
    out.expected_tau = binned_tau(out.rho, *spec.bins, *spec.bins);
  } else {
    out.expected_tau = spec.target_tau;
  }
  return out;
}

SyntheticBundle gen_shared_bias_panel(const SharedBiasSpec& spec, std::uint64_t seed) {
  if (spec.signal_weight == 0.0 && spec.shared_bias_weight == 0.0) {
    throw std::invalid_argument("gen_shared_bias_panel: signal and bias weights are both zero");
  }
  if (spec.shared_bias_weight < 0.0) throw std::invalid_argument("gen_shared_bias_panel: bias weight must be >= 0");
  if (spec.noise_sd < 0.0 || spec.outcome_noise_sd < 0.0) {
    throw std::invalid_argument("gen_shared_bias_panel: noise scales must be >= 0");
  }
  if (spec.k_raters < 1 || spec.n < 2) throw std::invalid_argument("gen_shared_bias_panel: need raters and units");
  if (spec.bins && *spec.bins < 2) throw std::invalid_argument("gen_shared_bias_panel: need at least 2 bins");

  Rng rng = substream(seed, Stream::synthetic, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> signal(spec.n), bias(spec.n);
  for (std::size_t u = 0; u < spec.n; ++u) {
    signal[u] = normal(rng);
    bias[u] = normal(rng);
  }
  const double model_sd = std::sqrt(spec.signal_weight * spec.signal_weight +
                                    spec.shared_bias_weight * spec.shared_bias_weight + spec.noise_sd * spec.noise_sd);
  const double human_sd = std::sqrt(1.0 + spec.noise_sd * spec.noise_sd);
  const auto model_cuts = spec.bins ? cut_points(*spec.bins, model_sd) : std::vector<double>{};
  const auto human_cuts = spec.bins ? cut_points(*spec.bins, human_sd) : std::vector<double>{};

  std::vector<RatingRecord> records;
  std::vector<std::string> units(spec.n);
  for (std::size_t u = 0; u < spec.n; ++u) units[u] = padded('u', u, spec.n);
  for (std::size_t r = 0; r < spec.k_raters; ++r) {
    const std::string id = padded("model_", r, spec.k_raters);
    for (std::size_t u = 0; u < spec.n; ++u) {
      double v = spec.signal_weight * signal[u] + spec.shared_bias_weight * bias[u] + spec.noise_sd * normal(rng);
      if (spec.bins) v = bin_of(v, model_cuts);
      records.push_back({id, RaterFamily::model, spec.task, units[u], std::string("p1"), v});
    }
  }
  for (std::size_t h = 0; h < spec.human_raters; ++h) {
    const std::string id = padded("human_", h, spec.human_raters);
    for (std::size_t u = 0; u < spec.n; ++u) {
      double v = signal[u] + spec.noise_sd * normal(rng);
      if (spec.bins) v = bin_of(v, human_cuts);
      records.push_back({id, RaterFamily::human, spec.task, units[u], std::nullopt, v});
    }
  }
  std::vector<OutcomeRow> outcomes;
  for (std::size_t u = 0; u < spec.n; ++u) {
    outcomes.push_back({units[u], spec.outcome, signal[u] + spec.outcome_noise_sd * normal(rng), std::nullopt});
  }
  std::map<std::string, ScaleBounds> bounds;
  if (spec.bins) bounds[spec.task] = {1.0, static_cast<double>(*spec.bins)};
  SyntheticBundle out;
  out.ratings = RatingsTable(std::move(records), std::move(bounds));
  out.outcomes = OutcomeTable(std::move(outcomes));
  return out;
}

BundleSpec preset(std::string_view name) {
  BundleSpec s;
  if (name == "study") return s;
  if (name == "positive") {
    s.units = 160;
    s.signal_weight = 1.5;
    s.noise_sd = 0.7;
    s.outcome_noise_sd = 0.7;
    s.experience_weight = 0.2;
    return s;
  }
  if (name == "shared-bias") {
    s.models = 4;
    s.humans = 2;
    s.signal_weight = 0.5;
    s.shared_bias_weight = 1.5;
    s.noise_sd = 0.6;
    return s;
  }
  if (name == "null") {
    s.signal_weight = 0.0;
    s.experience_weight = 0.0;
    return s;
  }
  throw std::invalid_argument("unknown preset: " + std::string(name));
}

std::vector<std::string> preset_names() { return {"null", "positive", "shared-bias", "study"}; }

SyntheticBundle gen_study_bundle(const BundleSpec& spec, std::uint64_t seed) {
  if (spec.units < 8 || spec.tasks < 1 || spec.models < 1 || spec.prompts < 1 || spec.scale_points < 2 ||
      spec.years < 1) {
    throw std::invalid_argument("gen_study_bundle: invalid layout");
  }
  if (std::abs(spec.experience_weight) > 1.0) {
    throw std::invalid_argument("gen_study_bundle: experience weight must lie in [-1, 1]");
  }
  Rng rng = substream(seed, Stream::synthetic, 3);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::string> units(spec.units);
  std::vector<double> signal(spec.units), bias(spec.units);
  for (std::size_t u = 0; u < spec.units; ++u) {
    units[u] = padded('u', u, spec.units);
    signal[u] = normal(rng);
    bias[u] = normal(rng);
  }
  std::vector<double> model_effect(spec.models), prompt_effect(spec.prompts);
  for (auto& v : model_effect) v = spec.model_effect_sd * normal(rng);
  for (auto& v : prompt_effect) v = spec.prompt_effect_sd * normal(rng);

  const double latent_sd =
      std::sqrt(spec.signal_weight * spec.signal_weight + spec.shared_bias_weight * spec.shared_bias_weight +
                spec.model_effect_sd * spec.model_effect_sd + spec.prompt_effect_sd * spec.prompt_effect_sd +
                spec.noise_sd * spec.noise_sd);
  const auto model_cuts = cut_points(spec.scale_points, latent_sd);
  const auto human_cuts = cut_points(spec.scale_points, std::sqrt(1.0 + spec.noise_sd * spec.noise_sd));

  std::vector<RatingRecord> records;
  std::map<std::string, ScaleBounds> bounds;
  for (std::size_t t = 0; t < spec.tasks; ++t) {
    const std::string task = padded("task_", t, spec.tasks);
    bounds[task] = {1.0, static_cast<double>(spec.scale_points)};
    for (std::size_t m = 0; m < spec.models; ++m) {
      const std::string model = padded("model_", m, spec.models);
      for (std::size_t p = 0; p < spec.prompts; ++p) {
        const std::string prompt = padded("prompt_", p, spec.prompts);
        for (std::size_t u = 0; u < spec.units; ++u) {
          const double latent = spec.signal_weight * signal[u] + spec.shared_bias_weight * bias[u] + model_effect[m] +
                                prompt_effect[p] + spec.noise_sd * normal(rng);
          records.push_back({model, RaterFamily::model, task, units[u], prompt, bin_of(latent, model_cuts)});
        }
      }
    }
    for (std::size_t h = 0; h < spec.humans; ++h) {
      const std::string human = padded("human_", h, spec.humans);
      for (std::size_t u = 0; u < spec.units; ++u) {
        const double latent = signal[u] + spec.noise_sd * normal(rng);
        records.push_back({human, RaterFamily::human, task, units[u], std::nullopt, bin_of(latent, human_cuts)});
      }
    }
  }

  std::vector<OutcomeRow> outcomes;
  SyntheticBundle out;
  const double spread = std::sqrt(1.0 - spec.experience_weight * spec.experience_weight);
  for (std::size_t u = 0; u < spec.units; ++u) {
    const int year = spec.first_year + static_cast<int>(u % spec.years);
    outcomes.push_back({units[u], "vam_sta", signal[u] + spec.outcome_noise_sd * normal(rng), year});
    outcomes.push_back({units[u], "vam_alt", signal[u] + spec.outcome_noise_sd * normal(rng), year});
    out.experience[units[u]] = 10.0 + 4.0 * (spec.experience_weight * signal[u] + spread * normal(rng));
  }
  out.ratings = RatingsTable(std::move(records), std::move(bounds));
  out.outcomes = OutcomeTable(std::move(outcomes));
  return out;
}

}  // namespace alignmeter::synthetic
