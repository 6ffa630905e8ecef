#include <gtest/gtest.h>

#include <cmath>

#include "../oracles.hpp"
#include "alignmeter/attenuation.hpp"

using namespace alignmeter;

TEST(Disattenuate, Substitution) {
  EXPECT_NEAR(disattenuate(0.10, 0.25), 0.20, 1e-15);
  EXPECT_EQ(disattenuate(0.37, 1.0), 0.37);
  EXPECT_THROW(disattenuate(0.1, 0.0), std::invalid_argument);
  EXPECT_THROW(disattenuate(0.1, -0.2), std::invalid_argument);
}

TEST(Disattenuate, PreservesOrdering) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> tau(-1, 1), rel(0.01, 1);
  for (int rep = 0; rep < 200; ++rep) {
    const double a = tau(rng), b = tau(rng), r = rel(rng);
    const double ca = disattenuate(a, r), cb = disattenuate(b, r);
    EXPECT_EQ(a < b, ca < cb);
    EXPECT_EQ(std::abs(a) < std::abs(b), std::abs(ca) < std::abs(cb));
    EXPECT_EQ(std::signbit(a), std::signbit(ca));
  }
}

TEST(Greiner, FixedPointsAndClosedForm) {
  EXPECT_EQ(greiner(0.0), 0.0);
  EXPECT_NEAR(greiner(1.0), 1.0, 1e-15);
  EXPECT_NEAR(greiner(-1.0), -1.0, 1e-15);
  EXPECT_NEAR(greiner(0.5), std::sqrt(0.5), 1e-15);
  EXPECT_THROW(greiner(1.01), std::invalid_argument);
}

TEST(Greiner, OddIncreasingAndExpanding) {
  double prev = -2;
  for (int k = -1000; k <= 1000; ++k) {
    const double t = k / 1000.0;
    const double g = greiner(t);
    EXPECT_GT(g, prev);
    EXPECT_NEAR(greiner(-t), -g, 1e-15);
    EXPECT_GE(std::abs(g) + 1e-15, std::abs(t));
    prev = g;
  }
}

TEST(CorrectAlignment, Modes) {
  const auto plain = correct_alignment(0.10, 0.25);
  ASSERT_TRUE(plain.tau_corrected);
  EXPECT_NEAR(*plain.tau_corrected, 0.2, 1e-15);
  EXPECT_FALSE(plain.greiner_applied);
  const auto g = correct_alignment(0.10, 0.25, true);
  EXPECT_NEAR(*g.tau_corrected, std::sin(M_PI * 0.05) / std::sqrt(std::sin(M_PI * 0.125)), 1e-14);
  EXPECT_FALSE(correct_alignment(0.1, -0.1).tau_corrected.has_value());
}

namespace {

OutcomeTable variants(const std::vector<double>& a, const std::vector<double>& b, int years = 1) {
  std::vector<OutcomeRow> rows;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::string u = "u" + std::to_string(1000 + i);
    const int year = 2010 + static_cast<int>(i) % years;
    rows.push_back({u, "sta", a[i], year});
    rows.push_back({u, "alt", b[i], year});
  }
  return OutcomeTable(rows);
}

}  // namespace

TEST(Reliability, IdenticalVariants) {
  std::mt19937_64 rng(42);
  const auto a = oracle::normal_vector(rng, 50);
  const auto r = stacked_reliability(variants(a, a), "sta", "alt");
  EXPECT_DOUBLE_EQ(r.value, 1.0);
  EXPECT_TRUE(r.usable);
  EXPECT_EQ(r.n, 50u);
}

TEST(Reliability, IndependentNearZero) {
  std::mt19937_64 rng(43);
  const auto a = oracle::normal_vector(rng, 500), b = oracle::normal_vector(rng, 500);
  EXPECT_NEAR(stacked_reliability(variants(a, b), "sta", "alt").value, 0.0, 0.07);
}

TEST(Reliability, AntiCorrelatedUnusable) {
  std::mt19937_64 rng(44);
  auto a = oracle::normal_vector(rng, 40);
  std::vector<double> b(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) b[i] = -a[i];
  const auto r = stacked_reliability(variants(a, b), "sta", "alt");
  EXPECT_LT(r.value, 0);
  EXPECT_FALSE(r.usable);
}

TEST(Reliability, WithinYearWeightsByPairs) {
  std::mt19937_64 rng(45);
  const auto a = oracle::normal_vector(rng, 60);
  auto b = oracle::normal_vector(rng, 60);
  for (std::size_t i = 0; i < a.size(); ++i) b[i] += a[i];
  const auto r = stacked_reliability(variants(a, b, 3), "sta", "alt", ReliabilityScope::within_year);
  ASSERT_EQ(r.per_year.size(), 3u);
  // equal-size years: the weighted mean is the plain mean
  double mean = 0;
  for (const auto& [y, v] : r.per_year) mean += v / 3.0;
  EXPECT_NEAR(r.value, mean, 1e-12);
  for (const auto& [year, v] : r.per_year) {
    std::vector<double> ya, yb;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (2010 + static_cast<int>(i) % 3 == year) {
        ya.push_back(a[i]);
        yb.push_back(b[i]);
      }
    }
    EXPECT_NEAR(v, oracle::tau_b(ya, yb), 1e-12);
  }
}

TEST(Reliability, UnknownVariant) {
  const std::vector<double> a{1, 2, 3};
  EXPECT_THROW(stacked_reliability(variants(a, a), "sta", "nope"), InputError);
}

TEST(Scope, RoundTrip) {
  for (auto s : {ReliabilityScope::pooled, ReliabilityScope::within_year}) {
    EXPECT_EQ(parse_reliability_scope(to_string(s)), s);
  }
  EXPECT_FALSE(parse_reliability_scope("yearly").has_value());
}
