#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "../oracles.hpp"
#include "alignmeter/dependence.hpp"
#include "alignmeter/synthetic.hpp"

using namespace alignmeter;
using namespace alignmeter::synthetic;

namespace {

double level_mean_variance(const MisalignmentPanel& p, std::string PanelRow::*facet) {
  std::map<std::string, std::pair<double, int>> m;
  for (const auto& r : p.rows) {
    m[r.*facet].first += r.residual;
    m[r.*facet].second += 1;
  }
  std::vector<double> means;
  for (const auto& [k, v] : m) means.push_back(v.first / v.second);
  double mu = 0;
  for (double x : means) mu += x / means.size();
  double s = 0;
  for (double x : means) s += (x - mu) * (x - mu);
  return s / (means.size() - 1);
}

}  // namespace

TEST(Crossed, ShapeAndDeterminism) {
  PlantedDesign d;
  d.sizes = {5, 2, 3, 4};
  d.seed = 3;
  const auto a = gen_crossed(d), b = gen_crossed(d);
  ASSERT_EQ(a.rows.size(), 120u);
  for (std::size_t k = 0; k < a.rows.size(); ++k) EXPECT_EQ(a.rows[k].residual, b.rows[k].residual);
  d.seed = 4;
  EXPECT_NE(gen_crossed(d).rows[0].residual, a.rows[0].residual);
}

TEST(Crossed, NoiseOnlyMeansNearZero) {
  PlantedDesign d;
  d.seed = 5;
  const auto p = gen_crossed(d);
  std::map<std::string, std::pair<double, int>> m;
  for (const auto& r : p.rows) {
    m[r.m].first += r.residual;
    m[r.m].second += 1;
  }
  for (const auto& [k, v] : m) EXPECT_NEAR(v.first / v.second, 0.0, 4.0 / std::sqrt(v.second));
}

TEST(Crossed, PlantedUnitVariance) {
  std::vector<double> est;
  for (int rep = 0; rep < 20; ++rep) {
    PlantedDesign d;
    d.sigma2[facet_c] = 1.0;
    d.seed = 10 + rep;
    // level means of C carry sigma2_C plus residual / (cells per unit)
    est.push_back(level_mean_variance(gen_crossed(d), &PanelRow::c) - 1.0 / 96.0);
  }
  EXPECT_NEAR(oracle::median(est), 1.0, 0.2);
}

TEST(Crossed, ExactMainEffects) {
  PlantedDesign d;
  d.sizes = {50, 4, 3, 8};
  d.sigma2[facet_m] = 0.25;
  d.residual_sigma2 = 1e-12;
  d.draw = EffectDraw::exact;
  d.seed = 1;
  EXPECT_NEAR(level_mean_variance(gen_crossed(d), &PanelRow::m), 0.25, 1e-6);
}

TEST(Crossed, RejectsNegativeVariance) {
  PlantedDesign d;
  d.sigma2[facet_c] = -1.0;
  EXPECT_THROW(gen_crossed(d), std::invalid_argument);
}

TEST(TauPair, ContinuousTargets) {
  for (double target : {0.0, 0.5}) {
    const auto p = gen_tau_pair({target, 2000, std::nullopt}, 17);
    EXPECT_NEAR(oracle::tau_b(p.x, p.y), target, 0.03);
    EXPECT_NEAR(p.rho, std::sin(M_PI * target / 2), 1e-15);
    EXPECT_EQ(p.expected_tau, target);
  }
}

TEST(TauPair, MeanOverRepsOnTarget) {
  double sum = 0;
  const int reps = 200;
  for (int rep = 0; rep < reps; ++rep) {
    const auto p = gen_tau_pair({0.5, 2000, std::nullopt}, 1000 + rep);
    sum += oracle::tau_b(p.x, p.y);
  }
  EXPECT_NEAR(sum / reps, 0.5, 0.01);
}

TEST(TauPair, BinnedExpectationMatchesMeasurement) {
  for (double target : {0.5, 0.99}) {
    for (std::size_t bins : {3, 5}) {
      const auto p = gen_tau_pair({target, 3000, bins}, 2);
      EXPECT_NE(p.expected_tau, target);
      EXPECT_NEAR(oracle::tau_b(p.x, p.y), p.expected_tau, 0.03) << target << " " << bins;
      EXPECT_LE(p.x.size(), 3000u);
      std::set<double> levels(p.x.begin(), p.x.end());
      EXPECT_EQ(levels.size(), bins);
    }
  }
}

TEST(TauPair, RejectsUnitTarget) {
  EXPECT_THROW(gen_tau_pair({1.0, 10, std::nullopt}, 1), std::invalid_argument);
}

TEST(BivariateNormal, KnownValues) {
  EXPECT_NEAR(bivariate_normal_cdf(0, 0, 0), 0.25, 1e-12);
  EXPECT_NEAR(bivariate_normal_cdf(0, 0, 0.5), 0.25 + std::asin(0.5) / (2 * M_PI), 1e-10);
  EXPECT_NEAR(bivariate_normal_cdf(0, 0, -0.9), 0.25 + std::asin(-0.9) / (2 * M_PI), 1e-10);
  EXPECT_NEAR(bivariate_normal_cdf(1.0, 2.0, 0.0), 0.5 * std::erfc(-1 / std::sqrt(2.0)) * 0.5 * std::erfc(-2 / std::sqrt(2.0)),
              1e-12);
}

TEST(BivariateNormal, BinnedTauLimits) {
  EXPECT_NEAR(binned_tau(std::sin(M_PI * 0.25), 60, 60), 0.5, 0.01);
  // median split: tau-b of the 2x2 table equals the continuous value
  EXPECT_NEAR(binned_tau(std::sin(M_PI * 0.25), 2, 2), 0.5, 1e-9);
  EXPECT_NEAR(binned_tau(0.0, 4, 3), 0.0, 1e-12);
  EXPECT_NEAR(binned_tau(-0.4, 5, 5), -binned_tau(0.4, 5, 5), 1e-12);
}

TEST(SharedBias, NoSharedBiasBalancedDependence) {
  SharedBiasSpec s;
  s.n = 1500;
  s.noise_sd = 1.0;
  s.outcome_noise_sd = 1.0;
  const auto b = gen_shared_bias_panel(s, 3);
  const auto m1 = b.ratings.scores({"model_1", "p1"}, "task1");
  const auto m2 = b.ratings.scores({"model_2", "p1"}, "task1");
  const auto y = b.outcomes.values("outcome");
  const auto j12 = join_values(m1, m2), j1y = join_values(m1, y);
  EXPECT_NEAR(dcor2_bias_corrected(j12.x, j12.y).dcor2, dcor2_bias_corrected(j1y.x, j1y.y).dcor2, 0.05);
}

TEST(SharedBias, StrongBiasOrdersDependence) {
  SharedBiasSpec s;
  s.n = 300;
  s.shared_bias_weight = 3.0;
  const auto b = gen_shared_bias_panel(s, 4);
  const auto m1 = b.ratings.scores({"model_1", "p1"}, "task1");
  const auto m2 = b.ratings.scores({"model_2", "p1"}, "task1");
  const auto y = b.outcomes.values("outcome");
  const auto j12 = join_values(m1, m2), j1y = join_values(m1, y);
  EXPECT_GT(dcor2_bias_corrected(j12.x, j12.y).dcor2, dcor2_bias_corrected(j1y.x, j1y.y).dcor2 + 0.2);
}

TEST(SharedBias, NegativeSignalPlantsNegativeAlignment) {
  SharedBiasSpec s;
  s.n = 400;
  s.signal_weight = -1.0;
  const auto b = gen_shared_bias_panel(s, 5);
  const auto j = join_values(b.ratings.scores({"model_1", "p1"}, "task1"), b.outcomes.values("outcome"));
  EXPECT_LT(oracle::tau_b(j.x, j.y), -0.2);
}

TEST(SharedBias, BinsRespectScale) {
  SharedBiasSpec s;
  s.bins = 5;
  s.human_raters = 2;
  const auto b = gen_shared_bias_panel(s, 6);
  for (const auto& r : b.ratings.records()) {
    EXPECT_GE(r.score, 1.0);
    EXPECT_LE(r.score, 5.0);
    EXPECT_EQ(r.score, std::round(r.score));
  }
  EXPECT_EQ(b.ratings.sources().size(), 5u);
}

TEST(Bundle, PresetsDeterministic) {
  for (const auto& name : preset_names()) {
    const auto a = gen_study_bundle(preset(name), 8), b = gen_study_bundle(preset(name), 8);
    EXPECT_EQ(a.ratings.records(), b.ratings.records()) << name;
    EXPECT_EQ(a.outcomes.rows(), b.outcomes.rows()) << name;
    EXPECT_EQ(a.experience, b.experience) << name;
    EXPECT_TRUE(a.outcomes.has_outcome("vam_sta"));
    EXPECT_TRUE(a.outcomes.has_outcome("vam_alt"));
  }
  EXPECT_THROW(preset("bogus"), std::invalid_argument);
}

TEST(Bundle, Layout) {
  const auto spec = preset("study");
  const auto b = gen_study_bundle(spec, 1);
  EXPECT_EQ(b.ratings.tasks().size(), spec.tasks);
  EXPECT_EQ(b.ratings.units().size(), spec.units);
  EXPECT_EQ(b.ratings.sources().size(), spec.models * spec.prompts + spec.humans);
  EXPECT_EQ(b.experience.size(), spec.units);
  EXPECT_EQ(b.outcomes.years("vam_sta").size(), spec.units);
}
