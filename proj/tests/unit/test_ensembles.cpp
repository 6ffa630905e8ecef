#include <gtest/gtest.h>

#include <cmath>

#include "../oracles.hpp"
#include "alignmeter/ensembles.hpp"
#include "alignmeter/synthetic.hpp"

using namespace alignmeter;

TEST(Weighted, Arithmetic) {
  const std::vector<UnitScores> m{{{"A", 2.0}}, {{"A", 3.0}}};
  const std::vector<double> w{1, 3};
  EXPECT_DOUBLE_EQ(weighted_combine(m, w).scores.at("A"), 2.75);
  EXPECT_DOUBLE_EQ(weighted_combine(m, {}).scores.at("A"), 2.5);
  EXPECT_THROW(weighted_combine(m, std::vector<double>{0, 0}), std::invalid_argument);
  EXPECT_THROW(weighted_combine(m, std::vector<double>{1}), std::invalid_argument);
  EXPECT_THROW(weighted_combine(std::vector<UnitScores>{{{"A", 1.0}}}, {}), std::invalid_argument);
}

TEST(Weighted, DropsPartiallyCoveredUnits) {
  const std::vector<UnitScores> m{{{"A", 1.0}, {"B", 2.0}}, {{"A", 3.0}, {"C", 4.0}}};
  const auto c = weighted_combine(m, {});
  EXPECT_EQ(c.scores.size(), 1u);
  EXPECT_EQ(c.units_total, 3u);
  EXPECT_EQ(c.dropped, 2u);
  EXPECT_DOUBLE_EQ(c.coverage, 1.0 / 3.0);
}

TEST(Weighted, OrderInvariantAndScaleEquivariant) {
  std::mt19937_64 rng(51);
  std::vector<UnitScores> m(3);
  for (int u = 0; u < 30; ++u) {
    for (auto& s : m) s["u" + std::to_string(u)] = std::normal_distribution<double>()(rng);
  }
  const std::vector<double> w{0.2, 1.5, 3.0};
  const auto base = weighted_combine(m, w);
  const std::vector<UnitScores> rev{m[2], m[0], m[1]};
  const std::vector<double> wrev{3.0, 0.2, 1.5}, scaled{0.2 * 7, 1.5 * 7, 3.0 * 7};
  const auto r = weighted_combine(rev, wrev), s = weighted_combine(m, scaled);
  for (const auto& [u, v] : base.scores) {
    EXPECT_NEAR(r.scores.at(u), v, 1e-14);
    EXPECT_NEAR(s.scores.at(u), v, 1e-14);
  }
}

TEST(Unanimous, AgreementSubset) {
  const std::vector<UnitScores> m{{{"A", 1}, {"B", 2}, {"C", 3}},
                                  {{"A", 1}, {"B", 3}, {"C", 3.5}},
                                  {{"A", 1}, {"B", 2}, {"C", 3}}};
  const auto c = unanimous_combine(m);
  ASSERT_EQ(c.scores.size(), 1u);
  EXPECT_EQ(c.scores.at("A"), 1.0);
  EXPECT_DOUBLE_EQ(c.coverage, 1.0 / 3.0);
}

TEST(Unanimous, FixpointAndIdentity) {
  const std::vector<UnitScores> m{{{"A", 1}, {"B", 2}, {"C", 3}}, {{"A", 1}, {"B", 5}, {"C", 3}}};
  const auto once = unanimous_combine(m);
  const std::vector<UnitScores> again{once.scores, once.scores};
  EXPECT_EQ(unanimous_combine(again).scores, once.scores);
  const std::vector<UnitScores> same{m[0], m[0], m[0]};
  EXPECT_EQ(unanimous_combine(same).scores, m[0]);
  EXPECT_EQ(unanimous_combine(same).coverage, 1.0);
  EXPECT_EQ(weighted_combine(same, {}).scores, m[0]);
}

TEST(Unanimous, NeverAgreeing) {
  const std::vector<UnitScores> m{{{"A", 1}, {"B", 2}}, {{"A", 2}, {"B", 1}}};
  const auto c = unanimous_combine(m);
  EXPECT_TRUE(c.scores.empty());
  EXPECT_EQ(c.coverage, 0.0);
}

namespace {

RatingsTable two_raters(bool agree) {
  std::vector<RatingRecord> r;
  for (int u = 0; u < 12; ++u) {
    const std::string id = "u" + std::to_string(10 + u);
    r.push_back({"a", RaterFamily::model, "t", id, std::string("p"), double(u % 5 + 1)});
    r.push_back({"b", RaterFamily::model, "t", id, std::string("p"), agree ? double(u % 5 + 1) : double((u + 1) % 5 + 1)});
  }
  return RatingsTable(r, {{"t", {1, 5}}});
}

}  // namespace

TEST(Build, DerivedSourceCarriesRule) {
  EnsembleSpec spec{"ens", {parse_source_key("a|p"), parse_source_key("b|p")}, EnsembleRule::unanimous, {}};
  const auto r = build_ensemble(two_raters(true), spec);
  EXPECT_FALSE(r.empty);
  EXPECT_EQ(r.coverage, 1.0);
  ASSERT_EQ(r.table.size(), 12u);
  EXPECT_EQ(r.table.records()[0].rater_family, RaterFamily::ensemble);
  EXPECT_EQ(r.table.records()[0].prompt_id, "unanimous");
}

TEST(Build, EmptyUnanimousFlagged) {
  EnsembleSpec spec{"ens", {parse_source_key("a|p"), parse_source_key("b|p")}, EnsembleRule::unanimous, {}};
  const auto r = build_ensemble(two_raters(false), spec);
  EXPECT_TRUE(r.empty);
  EXPECT_EQ(r.coverage, 0.0);
}

TEST(Build, Guards) {
  const auto t = two_raters(true);
  EXPECT_THROW(build_ensemble(t, {"ens", {parse_source_key("a|p"), parse_source_key("zz")}, EnsembleRule::weighted, {}}),
               InputError);
  EXPECT_THROW(build_ensemble(t, {"a", {parse_source_key("a|p"), parse_source_key("b|p")}, EnsembleRule::weighted, {}}),
               InputError);
  EXPECT_THROW(build_ensemble(t, {"ens", {parse_source_key("a|p")}, EnsembleRule::weighted, {}}),
               std::invalid_argument);
}

TEST(Rule, RoundTrip) {
  EXPECT_EQ(parse_ensemble_rule(to_string(EnsembleRule::weighted)), EnsembleRule::weighted);
  EXPECT_EQ(parse_ensemble_rule("unanimous"), EnsembleRule::unanimous);
  EXPECT_FALSE(parse_ensemble_rule("majority"));
}

namespace {

struct Planted {
  std::vector<UnitScores> members;
  UnitScores outcome;
};

Planted planted(const synthetic::SharedBiasSpec& spec, std::uint64_t seed) {
  const auto b = synthetic::gen_shared_bias_panel(spec, seed);
  Planted p;
  for (const auto& s : b.ratings.sources()) p.members.push_back(b.ratings.scores(s, spec.task));
  p.outcome = b.outcomes.values(spec.outcome);
  return p;
}

}  // namespace

TEST(Compare, DuplicatedMemberIsNeutral) {
  synthetic::SharedBiasSpec s;
  s.n = 60;
  const auto p = planted(s, 1);
  const std::vector<UnitScores> one{p.members[0]};
  const auto c = ensemble_alignment_compare(p.members[0], one, p.outcome, 200, 3);
  EXPECT_EQ(c.delta, 0.0);
  EXPECT_TRUE(c.powered);
  EXPECT_EQ(c.ci_low, 0.0);
  EXPECT_EQ(c.ci_high, 0.0);
}

TEST(Compare, SmallSetUnpowered) {
  const UnitScores ens{{"a", 1}, {"b", 2}, {"c", 3}};
  const std::vector<UnitScores> m{{{"a", 1}, {"b", 2}, {"c", 3}, {"d", 1}}};
  const UnitScores y{{"a", 1}, {"b", 3}, {"c", 2}, {"d", 0}};
  const auto c = ensemble_alignment_compare(ens, m, y, 100, 1);
  EXPECT_FALSE(c.powered);
  EXPECT_TRUE(std::isnan(c.p));
}

TEST(Compare, IndependentErrorsImprove) {
  synthetic::SharedBiasSpec s;
  s.n = 150;
  s.noise_sd = 1.5;
  int improved = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto p = planted(s, 100 + rep);
    const auto e = weighted_combine(p.members, {});
    const auto c = ensemble_alignment_compare(e.scores, p.members, p.outcome, 0, 1);
    if (c.delta > 0) ++improved;
  }
  EXPECT_GE(improved, 18);
}

TEST(Compare, FullySharedErrorsDoNotImprove) {
  synthetic::SharedBiasSpec s;
  s.n = 150;
  s.shared_bias_weight = 1.0;
  s.noise_sd = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    const auto p = planted(s, 200 + rep);
    const auto e = weighted_combine(p.members, {});
    const auto c = ensemble_alignment_compare(e.scores, p.members, p.outcome, 0, 1);
    EXPECT_NEAR(c.delta, 0.0, 1e-12);
  }
}

TEST(Compare, Deterministic) {
  synthetic::SharedBiasSpec s;
  s.n = 80;
  s.bins = 5;
  const auto p = planted(s, 9);
  const auto e = weighted_combine(p.members, {});
  const auto a = ensemble_alignment_compare(e.scores, p.members, p.outcome, 300, 4);
  const auto b = ensemble_alignment_compare(e.scores, p.members, p.outcome, 300, 4);
  EXPECT_EQ(a.p, b.p);
  EXPECT_EQ(a.ci_low, b.ci_low);
  EXPECT_GE(a.p, 0.0);
  EXPECT_LE(a.p, 1.0);
}
