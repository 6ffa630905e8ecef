#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "../oracles.hpp"
#include "alignmeter/dependence.hpp"
#include "alignmeter/synthetic.hpp"

using namespace alignmeter;

TEST(UCenter, ConstantIsZero) {
  const std::vector<double> v(6, 2.5);
  const auto m = ucenter(v);
  for (double e : m.entries()) EXPECT_EQ(e, 0.0);
}

TEST(UCenter, TooShort) {
  const std::vector<double> v{0, 1};
  EXPECT_THROW(ucenter(v), std::invalid_argument);
}

TEST(UCenter, RowAndColumnSumsVanish) {
  std::mt19937_64 rng(1);
  for (std::size_t n : {4, 5, 17, 40}) {
    auto v = n == 4 ? std::vector<double>{1, 2, 3, 4} : oracle::normal_vector(rng, n);
    const auto m = ucenter(v);
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0, col = 0;
      for (std::size_t j = 0; j < n; ++j) {
        row += m(i, j);
        col += m(j, i);
      }
      EXPECT_NEAR(row, 0.0, 1e-12);
      EXPECT_NEAR(col, 0.0, 1e-12);
      EXPECT_EQ(m(i, i), 0.0);
    }
  }
}

TEST(Dcov, FastMatchesMatrixRoute) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t n = 4 + rep;
    const auto x = rep % 3 ? oracle::normal_vector(rng, n) : oracle::tied_vector(rng, n, 4);
    const auto y = oracle::tied_vector(rng, n, 5);
    EXPECT_NEAR(dcov2_u(x, y), u_inner(ucenter(x), ucenter(y)), 1e-12);
  }
}

TEST(Dcor, SquareOfLinear) {
  const std::vector<double> x{1, 2, 3, 4, 5}, y{1, 4, 9, 16, 25};
  EXPECT_NEAR(dcor2_bias_corrected(x, y).dcor2, oracle::dcor2(x, y), 1e-10);
}

TEST(Dcor, MatchesNaiveDoubleSum) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t n = 4 + rep * 2;
    const auto x = rep % 2 ? oracle::tied_vector(rng, n, 5) : oracle::normal_vector(rng, n);
    auto y = oracle::normal_vector(rng, n);
    for (std::size_t i = 0; i < n; ++i) y[i] += 0.5 * x[i];
    EXPECT_NEAR(dcor2_bias_corrected(x, y).dcor2, oracle::dcor2(x, y), 1e-10) << "n=" << n;
  }
}

TEST(Dcor, SelfIsOne) {
  std::mt19937_64 rng(22);
  for (int rep = 0; rep < 30; ++rep) {
    const auto x = rep % 2 ? oracle::tied_vector(rng, 4 + rep, 3) : oracle::normal_vector(rng, 4 + rep);
    EXPECT_NEAR(dcor2_bias_corrected(x, x).dcor2, 1.0, 1e-12);
  }
}

TEST(Dcor, SymmetricAndAffineInvariant) {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    const auto x = oracle::normal_vector(rng, 50);
    auto y = oracle::tied_vector(rng, 50, 5);
    const double d = dcor2_bias_corrected(x, y).dcor2;
    EXPECT_NEAR(dcor2_bias_corrected(y, x).dcor2, d, 1e-12);
    std::vector<double> ax(x.size());
    std::transform(x.begin(), x.end(), ax.begin(), [](double v) { return 1e3 + 4.5 * v; });
    EXPECT_NEAR(dcor2_bias_corrected(ax, y).dcor2, d, 1e-9);
  }
}

TEST(Dcor, NegativeValuesReportedAsIs) {
  std::mt19937_64 rng(24);
  int negative = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto x = oracle::normal_vector(rng, 30), y = oracle::normal_vector(rng, 30);
    const double d = dcor2_bias_corrected(x, y).dcor2;
    EXPECT_LE(d, 1.0 + 1e-9);
    if (d < 0) ++negative;
  }
  EXPECT_GT(negative, 0);
}

TEST(Dcor, IndependentLargeSampleNearZero) {
  std::mt19937_64 rng(25);
  int small = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto x = oracle::normal_vector(rng, 2000), y = oracle::normal_vector(rng, 2000);
    if (std::abs(dcor2_bias_corrected(x, y).dcor2) < 0.01) ++small;
  }
  EXPECT_GE(small, 19);
}

TEST(Dcor, ConstantInputThrows) {
  const std::vector<double> x{1, 2, 3, 4, 5}, c(5, 1.0);
  EXPECT_THROW(dcor2_bias_corrected(x, c), std::invalid_argument);
}

TEST(DcorSignificance, SelfIsSignificant) {
  std::vector<double> x(30);
  std::iota(x.begin(), x.end(), 0.0);
  EXPECT_LE(dcor_significance(x, x, 999, 1), 0.001);
}

TEST(DcorSignificance, DeterministicAndInRange) {
  std::mt19937_64 rng(26);
  const auto x = oracle::normal_vector(rng, 40), y = oracle::normal_vector(rng, 40);
  const double p = dcor_significance(x, y, 300, 8);
  EXPECT_EQ(p, dcor_significance(x, y, 300, 8));
  EXPECT_GT(p, 0.0);
  EXPECT_LE(p, 1.0);
}

TEST(DcorSignificance, RoughlyUniformUnderNull) {
  std::mt19937_64 rng(27);
  int below = 0;
  const int reps = 200;
  for (int rep = 0; rep < reps; ++rep) {
    const auto x = oracle::normal_vector(rng, 25), y = oracle::normal_vector(rng, 25);
    if (dcor_significance(x, y, 99, 100 + rep) <= 0.2) ++below;
  }
  EXPECT_NEAR(below / double(reps), 0.2, 0.08);
}

TEST(Bonferroni, Cases) {
  EXPECT_EQ(bonferroni(std::vector<double>{0.01}, 0.05), std::vector<bool>{true});
  EXPECT_EQ(bonferroni(std::vector<double>(10, 0.01), 0.05), std::vector<bool>(10, false));
  EXPECT_EQ(bonferroni(std::vector<double>{0.004, 0.2}, 0.05), (std::vector<bool>{true, false}));
}

TEST(FisherZ, Means) {
  EXPECT_NEAR(fisher_z_mean(std::vector<double>{0.5, 0.5}).mean, 0.5, 1e-15);
  EXPECT_NEAR(fisher_z_mean(std::vector<double>{0.0, 0.8}).mean, std::tanh(std::atanh(0.8) / 2), 1e-15);
  EXPECT_NEAR(fisher_z_mean(std::vector<double>{0.0, 0.8}).mean, 0.5, 1e-3);
  const auto c = fisher_z_mean(std::vector<double>{1.0, 0.2});
  EXPECT_EQ(c.clamped, 1u);
  EXPECT_TRUE(std::isfinite(c.mean));
}

TEST(FisherZ, Weighted) {
  const std::vector<double> v{0.1, 0.6}, w{1, 3};
  const double z = (std::atanh(0.1) + 3 * std::atanh(0.6)) / 4;
  EXPECT_NEAR(fisher_z_mean(v, w).mean, std::tanh(z), 1e-14);
}

namespace {

RatingsTable shared_panel(double bias, std::uint64_t seed) {
  synthetic::SharedBiasSpec s;
  s.k_raters = 3;
  s.human_raters = 2;
  s.shared_bias_weight = bias;
  s.n = 120;
  return synthetic::gen_shared_bias_panel(s, seed).ratings;
}

}  // namespace

TEST(Matrix, TwoRatersOneTask) {
  std::vector<RatingRecord> r;
  for (int u = 0; u < 10; ++u) {
    const std::string id = "u" + std::to_string(u);
    r.push_back({"a", RaterFamily::model, "t", id, std::string("p"), double(u % 4)});
    r.push_back({"b", RaterFamily::human, "t", id, std::nullopt, double(u % 3)});
  }
  const RatingsTable t(r);
  const auto m = pairwise_dependence(t, source_tasks(t), 0, 1);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_NEAR(m.dcor(0, 0), 1.0, 1e-12);
  EXPECT_EQ(m.dcor(0, 1), m.dcor(1, 0));
  EXPECT_TRUE(std::isnan(m.p_value(0, 1)));
}

TEST(Matrix, DeterministicPValues) {
  const auto t = shared_panel(1.0, 3);
  const auto a = pairwise_dependence(t, source_tasks(t), 49, 5);
  const auto b = pairwise_dependence(t, source_tasks(t), 49, 5);
  ASSERT_EQ(a.p.size(), b.p.size());
  for (std::size_t k = 0; k < a.p.size(); ++k) {
    EXPECT_TRUE(a.p[k] == b.p[k] || (std::isnan(a.p[k]) && std::isnan(b.p[k])));
    EXPECT_EQ(a.dcor2[k], b.dcor2[k]);
  }
}

TEST(Summary, SharedBiasOrdering) {
  const auto t = shared_panel(2.0, 4);
  const auto s = dependence_summary(pairwise_dependence(t, source_tasks(t), 0, 1));
  const SummaryCell* humans = nullptr;
  const SummaryCell* models = nullptr;
  const SummaryCell* intra = nullptr;
  for (const auto& c : s.cells) {
    if (c.scope != TaskScope::same_task) continue;
    if (c.relation == Relation::with_humans) humans = &c;
    if (c.relation == Relation::with_other_models) models = &c;
    if (c.relation == Relation::intramodel) intra = &c;
  }
  ASSERT_TRUE(humans && models && intra);
  EXPECT_EQ(intra->status, SummaryCell::Status::redundant);
  EXPECT_GT(models->stats.mean, humans->stats.mean);
}

TEST(Summary, SinglePairCellEqualsPair) {
  std::vector<RatingRecord> r;
  std::mt19937_64 rng(9);
  const auto a = oracle::normal_vector(rng, 12), b = oracle::normal_vector(rng, 12);
  for (int u = 0; u < 12; ++u) {
    const std::string id = "u" + std::to_string(10 + u);
    r.push_back({"m", RaterFamily::model, "t", id, std::string("p"), a[u]});
    r.push_back({"h", RaterFamily::human, "t", id, std::nullopt, a[u] + b[u]});
  }
  const RatingsTable t(r);
  const auto m = pairwise_dependence(t, source_tasks(t), 0, 1);
  const auto s = dependence_summary(m);
  for (const auto& c : s.cells) {
    if (c.scope == TaskScope::same_task && c.relation == Relation::with_humans) {
      EXPECT_EQ(c.pairs, 1u);
      EXPECT_NEAR(c.stats.mean, m.dcor(0, 1), 1e-12);
    }
  }
}

TEST(Linkage, IdenticalRowsMergeFirstAtZero) {
  const std::vector<double> d{0, 0, 3, 0, 0, 3, 3, 3, 0};
  const auto g = complete_linkage_cluster(d, {"A", "B", "C"});
  ASSERT_EQ(g.merges.size(), 2u);
  EXPECT_EQ(g.merges[0].height, 0.0);
  EXPECT_EQ(g.merges[0].left, 0u);
  EXPECT_EQ(g.merges[0].right, 1u);
}

TEST(Linkage, HandTraced) {
  const std::vector<double> d{0, 1, 5, 1, 0, 5, 5, 5, 0};
  const auto g = complete_linkage_cluster(d, {"A", "B", "C"});
  ASSERT_EQ(g.merges.size(), 2u);
  EXPECT_EQ(g.merges[0].height, 1.0);
  EXPECT_EQ(g.merges[1].height, 5.0);
  EXPECT_EQ(g.merges[1].size, 3u);
  EXPECT_EQ(g.leaf_order, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Linkage, CompleteNotSingle) {
  // single linkage would join C to {A,B} at 2; complete uses the max, 6
  const std::vector<double> d{0, 1, 2, 9, 1, 0, 6, 9, 2, 6, 0, 9, 9, 9, 9, 0};
  const auto g = complete_linkage_cluster(d, {"A", "B", "C", "D"});
  EXPECT_EQ(g.merges[1].height, 6.0);
}

TEST(Linkage, SingleLeaf) {
  const auto g = complete_linkage_cluster(std::vector<double>{0.0}, {"A"});
  EXPECT_TRUE(g.merges.empty());
  EXPECT_EQ(g.leaf_order, std::vector<std::size_t>{0});
}
