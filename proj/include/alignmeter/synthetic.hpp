#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "alignmeter/data_model.hpp"
#include "alignmeter/variance_decomposition.hpp"

namespace alignmeter::synthetic {

enum class EffectDraw {
  population,  // every effect drawn iid from N(0, sigma2)
  exact,       // main effects centered and rescaled so their sample variance equals sigma2
};

struct PlantedDesign {
  std::array<std::size_t, 4> sizes{50, 4, 3, 8};  // C, I, M, P
  std::map<TermMask, double> sigma2;              // non-residual terms; absent terms are 0
  double residual_sigma2 = 1.0;
  EffectDraw draw = EffectDraw::population;
  std::uint64_t seed = 0;
};

/// Fully crossed panel, one observation per cell: sum of planted effects plus noise.
MisalignmentPanel gen_crossed(const PlantedDesign& design);

struct CopulaSpec {
  double target_tau = 0.0;
  std::size_t n = 100;
  std::optional<std::size_t> bins;  // equal-probability ordinal bins on both axes
};

struct TauPair {
  std::vector<double> x;
  std::vector<double> y;
  double rho = 0.0;
  double expected_tau = 0.0;  // population tau-b after binning (= target when continuous)
};

/// Gaussian copula with rho = sin(pi * tau / 2).
TauPair gen_tau_pair(const CopulaSpec& spec, std::uint64_t seed);

/// Standard bivariate normal CDF P(X <= h, Y <= k) with correlation rho.
double bivariate_normal_cdf(double h, double k, double rho);

/// Population tau-b of a bivariate normal pair cut into equal-probability bins.
double binned_tau(double rho, std::size_t bins_x, std::size_t bins_y);

struct SyntheticBundle {
  RatingsTable ratings;
  OutcomeTable outcomes;
  UnitValues experience;
};

struct SharedBiasSpec {
  std::size_t k_raters = 3;
  double shared_bias_weight = 0.0;
  double signal_weight = 1.0;
  std::size_t n = 200;
  double noise_sd = 1.0;          // idiosyncratic rater noise
  double outcome_noise_sd = 1.0;
  std::optional<std::size_t> bins;
  std::size_t human_raters = 0;  // human score = signal + noise
  std::string task = "task1";
  std::string outcome = "outcome";
};

/// Raters share a common latent bias on top of the signal the outcome measures.
SyntheticBundle gen_shared_bias_panel(const SharedBiasSpec& spec, std::uint64_t seed);

/// Multi-task, multi-model, multi-prompt study layout with two outcome variants and an experience baseline.
struct BundleSpec {
  std::size_t units = 120;
  std::size_t tasks = 3;
  std::size_t models = 3;
  std::size_t prompts = 2;
  std::size_t humans = 1;
  std::size_t scale_points = 5;
  std::size_t years = 2;
  int first_year = 2011;
  double signal_weight = 1.0;
  double shared_bias_weight = 0.0;
  double model_effect_sd = 0.3;
  double prompt_effect_sd = 0.1;
  double noise_sd = 1.0;
  double outcome_noise_sd = 1.0;
  double experience_weight = 0.3;
};

/// Named presets: "study", "positive", "shared-bias", "null".
BundleSpec preset(std::string_view name);
std::vector<std::string> preset_names();

SyntheticBundle gen_study_bundle(const BundleSpec& spec, std::uint64_t seed);

}  // namespace alignmeter::synthetic
