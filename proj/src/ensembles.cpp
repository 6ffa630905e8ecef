#include "alignmeter/ensembles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "alignmeter/concordance.hpp"
#include "alignmeter/parallel.hpp"
#include "alignmeter/random.hpp"
#include "alignmeter/stats.hpp"

namespace alignmeter {

std::string to_string(EnsembleRule rule) { return rule == EnsembleRule::weighted ? "weighted" : "unanimous"; }

std::optional<EnsembleRule> parse_ensemble_rule(std::string_view text) {
  if (text == "weighted") return EnsembleRule::weighted;
  if (text == "unanimous") return EnsembleRule::unanimous;
  return std::nullopt;
}

namespace {

std::set<std::string> union_units(std::span<const UnitScores> members) {
  std::set<std::string> all;
  for (const auto& m : members) {
    for (const auto& [u, s] : m) all.insert(u);
  }
  return all;
}

// Units every member rated, with each member's score in member order.
std::vector<std::pair<std::string, std::vector<double>>> shared_rows(std::span<const UnitScores> members,
                                                                     std::size_t& dropped) {
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  dropped = 0;
  for (const auto& u : union_units(members)) {
    std::vector<double> scores;
    scores.reserve(members.size());
    for (const auto& m : members) {
      const auto it = m.find(u);
      if (it == m.end()) break;
      scores.push_back(it->second);
    }
    if (scores.size() == members.size()) {
      rows.emplace_back(u, std::move(scores));
    } else {
      ++dropped;
    }
  }
  return rows;
}

}  // namespace

CombinedScores weighted_combine(std::span<const UnitScores> members, std::span<const double> weights) {
  if (members.size() < 2) throw std::invalid_argument("weighted ensemble needs at least 2 members");
  std::vector<double> w(weights.begin(), weights.end());
  if (w.empty()) w.assign(members.size(), 1.0);
  if (w.size() != members.size()) throw std::invalid_argument("weighted ensemble: one weight per member required");
  double total = 0.0;
  for (double v : w) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("weighted ensemble: weights must be nonnegative");
    total += v;
  }
  if (!(total > 0.0)) throw std::invalid_argument("weighted ensemble: weights sum to zero");

  CombinedScores out;
  out.units_total = union_units(members).size();
  for (const auto& [unit, scores] : shared_rows(members, out.dropped)) {
    double s = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k) s += w[k] * scores[k];
    out.scores.emplace(unit, s / total);
  }
  out.coverage = out.units_total ? static_cast<double>(out.scores.size()) / static_cast<double>(out.units_total) : 0.0;
  return out;
}

CombinedScores unanimous_combine(std::span<const UnitScores> members) {
  if (members.size() < 2) throw std::invalid_argument("unanimous ensemble needs at least 2 members");
  CombinedScores out;
  out.units_total = union_units(members).size();
  std::size_t missing = 0;
  for (const auto& [unit, scores] : shared_rows(members, missing)) {
    if (std::all_of(scores.begin(), scores.end(), [&](double s) { return s == scores.front(); })) {
      out.scores.emplace(unit, scores.front());
    }
  }
  out.dropped = out.units_total - out.scores.size();
  out.coverage = out.units_total ? static_cast<double>(out.scores.size()) / static_cast<double>(out.units_total) : 0.0;
  return out;
}

EnsembleResult build_ensemble(const RatingsTable& ratings, const EnsembleSpec& spec) {
  if (spec.name.empty()) throw std::invalid_argument("ensemble needs a name");
  if (spec.members.size() < 2) throw std::invalid_argument("ensemble " + spec.name + " needs at least 2 members");
  for (const auto& m : spec.members) {
    if (!ratings.has_rater(m.rater_id)) throw InputError("ensemble " + spec.name + ": unknown rater " + m.rater_id);
  }
  if (ratings.has_rater(spec.name)) throw InputError("ensemble name collides with an existing rater: " + spec.name);

  EnsembleResult result;
  std::vector<RatingRecord> records;
  std::size_t retained = 0, total = 0;
  for (const auto& task : ratings.tasks()) {
    std::vector<UnitScores> members;
    for (const auto& m : spec.members) {
      auto s = ratings.scores(m, task);
      if (s.empty()) break;
      members.push_back(std::move(s));
    }
    if (members.size() != spec.members.size()) continue;
    auto combined = spec.rule == EnsembleRule::weighted ? weighted_combine(members, spec.weights)
                                                        : unanimous_combine(members);
    retained += combined.scores.size();
    total += combined.units_total;
    for (const auto& [unit, score] : combined.scores) {
      records.push_back({spec.name, RaterFamily::ensemble, task, unit, to_string(spec.rule), score});
    }
    result.per_task.emplace(task, std::move(combined));
  }
  if (result.per_task.empty()) throw InputError("ensemble " + spec.name + ": members share no task");
  result.coverage = total ? static_cast<double>(retained) / static_cast<double>(total) : 0.0;
  result.empty = retained == 0;
  result.table = RatingsTable(std::move(records), ratings.scale_bounds());
  return result;
}

namespace {

struct Panel {
  std::vector<std::size_t> units;  // indices into the unit universe
  std::vector<double> x;
  std::vector<double> y;
};

Panel make_panel(const UnitScores& scores, const UnitScores& outcome, const std::vector<std::string>& universe) {
  Panel p;
  for (std::size_t i = 0; i < universe.size(); ++i) {
    const auto s = scores.find(universe[i]);
    if (s == scores.end()) continue;
    p.units.push_back(i);
    p.x.push_back(s->second);
    p.y.push_back(outcome.at(universe[i]));
  }
  return p;
}

std::optional<double> panel_tau(const Panel& p, std::span<const std::size_t> counts, std::vector<double>& x,
                                std::vector<double>& y) {
  x.clear();
  y.clear();
  for (std::size_t k = 0; k < p.units.size(); ++k) {
    for (std::size_t c = 0; c < counts[p.units[k]]; ++c) {
      x.push_back(p.x[k]);
      y.push_back(p.y[k]);
    }
  }
  if (x.size() < 2) return std::nullopt;
  const auto pc = pair_counts(x, y);
  if (pc.untied_x == 0 || pc.untied_y == 0) return std::nullopt;
  return tau_from_counts(pc);
}

}  // namespace

EnsembleComparison ensemble_alignment_compare(const UnitScores& ensemble, std::span<const UnitScores> members,
                                              const UnitScores& outcome, std::size_t m, std::uint64_t seed,
                                              double level, std::size_t min_units) {
  if (members.empty()) throw std::invalid_argument("ensemble comparison needs at least one member");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("ensemble comparison: level must lie in (0,1)");

  std::set<std::string> all;
  for (const auto& [u, v] : ensemble) {
    if (outcome.contains(u)) all.insert(u);
  }
  for (const auto& mem : members) {
    for (const auto& [u, v] : mem) {
      if (outcome.contains(u)) all.insert(u);
    }
  }
  const std::vector<std::string> universe(all.begin(), all.end());

  const Panel ens = make_panel(ensemble, outcome, universe);
  std::vector<Panel> mems;
  for (const auto& mem : members) mems.push_back(make_panel(mem, outcome, universe));

  EnsembleComparison out;
  out.n = ens.units.size();
  out.bootstrap = m;
  const std::vector<std::size_t> ones(universe.size(), 1);
  std::vector<double> bx, by;
  for (const auto& p : mems) {
    const auto t = panel_tau(p, ones, bx, by);
    if (!t) throw std::invalid_argument("ensemble comparison: a member panel has no untied pairs");
    out.member_taus.push_back(*t);
  }
  out.tau_member_median = stats::median(out.member_taus);
  out.tau_member_mean = stats::mean(out.member_taus);

  const auto t_ens = panel_tau(ens, ones, bx, by);
  if (!t_ens || out.n < min_units) {
    out.powered = false;
    out.p = std::numeric_limits<double>::quiet_NaN();
    out.ci_low = out.ci_high = std::numeric_limits<double>::quiet_NaN();
    if (t_ens) {
      out.tau_ensemble = *t_ens;
      out.delta = out.tau_ensemble - out.tau_member_median;
      out.delta_mean = out.tau_ensemble - out.tau_member_mean;
    } else {
      out.tau_ensemble = out.delta = out.delta_mean = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
  }
  out.powered = true;
  out.tau_ensemble = *t_ens;
  out.delta = out.tau_ensemble - out.tau_member_median;
  out.delta_mean = out.tau_ensemble - out.tau_member_mean;

  if (m == 0) {
    out.p = out.ci_low = out.ci_high = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> deltas(m, nan);
  parallel_for(m, [&](std::size_t b) {
    Rng rng = substream(seed, Stream::ensemble, b);
    std::uniform_int_distribution<std::size_t> pick(0, universe.size() - 1);
    std::vector<std::size_t> counts(universe.size(), 0);
    for (std::size_t k = 0; k < universe.size(); ++k) ++counts[pick(rng)];
    std::vector<double> x, y;
    const auto te = panel_tau(ens, counts, x, y);
    if (!te) return;
    std::vector<double> taus;
    for (const auto& p : mems) {
      const auto t = panel_tau(p, counts, x, y);
      if (!t) return;
      taus.push_back(*t);
    }
    deltas[b] = *te - stats::median_inplace(taus);
  });
  std::erase_if(deltas, [](double d) { return std::isnan(d); });
  out.bootstrap_used = deltas.size();
  if (deltas.empty()) {
    out.p = out.ci_low = out.ci_high = nan;
    return out;
  }
  const auto used = static_cast<double>(deltas.size());
  const auto le = std::count_if(deltas.begin(), deltas.end(), [](double d) { return d <= 0.0; });
  const auto ge = std::count_if(deltas.begin(), deltas.end(), [](double d) { return d >= 0.0; });
  const double p_low = (1.0 + static_cast<double>(le)) / (used + 1.0);
  const double p_high = (1.0 + static_cast<double>(ge)) / (used + 1.0);
  out.p = std::min(1.0, 2.0 * std::min(p_low, p_high));
  const double alpha = 1.0 - level;
  out.ci_low = stats::quantile(deltas, alpha / 2.0);
  out.ci_high = stats::quantile(deltas, 1.0 - alpha / 2.0);
  return out;
}

}  // namespace alignmeter
