#include "alignmeter/variance_decomposition.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "alignmeter/parallel.hpp"
#include "alignmeter/random.hpp"
#include "alignmeter/rhat.hpp"
#include "alignmeter/stats.hpp"

namespace alignmeter {

std::string term_name(TermMask term) {
  std::string out;
  for (unsigned f = 0; f < 4; ++f) {
    if (term & (1u << f)) {
      if (!out.empty()) out += ':';
      out += kFacetNames[f];
    }
  }
  return out;
}

std::optional<TermMask> parse_term(std::string_view text) {
  TermMask mask = 0;
  bool expect_facet = true;
  for (char ch : text) {
    if (ch == ' ') continue;
    if (expect_facet) {
      const auto it = std::find(kFacetNames.begin(), kFacetNames.end(), ch);
      if (it == kFacetNames.end()) return std::nullopt;
      const unsigned bit = 1u << static_cast<unsigned>(it - kFacetNames.begin());
      if (mask & bit) return std::nullopt;
      mask |= bit;
      expect_facet = false;
    } else {
      if (ch != ':' && ch != 'x') return std::nullopt;
      expect_facet = true;
    }
  }
  if (mask == 0 || expect_facet) return std::nullopt;
  return mask;
}

bool term_contains(TermMask term, unsigned facet) { return (term & facet) != 0; }

std::string to_string(FitScope scope) {
  return scope == FitScope::per_item ? "per_item" : "per_item_model_prompt";
}

std::optional<FitScope> parse_fit_scope(std::string_view text) {
  if (text == "per_item") return FitScope::per_item;
  if (text == "per_item_model_prompt") return FitScope::per_item_model_prompt;
  return std::nullopt;
}

LinearFit ols_residuals(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("ols_residuals: vectors differ in length");
  if (x.empty()) throw std::invalid_argument("ols_residuals: empty input");
  const double mx = stats::mean(x);
  const double my = stats::mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  LinearFit fit;
  const bool constant = std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
  if (constant) {
    fit.intercept_only = true;
    fit.intercept = my;
  } else {
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
  }
  fit.residuals.resize(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    // Centered form keeps residuals mean-zero to rounding.
    fit.residuals[k] = (y[k] - my) - fit.slope * (x[k] - mx);
  }
  return fit;
}

MisalignmentResult misalignment_residuals(const RatingsTable& ratings, const OutcomeTable& outcomes,
                                          std::string_view outcome, FitScope scope) {
  if (!outcomes.has_outcome(outcome)) throw InputError("unknown outcome: " + std::string(outcome));
  const auto values = outcomes.values(outcome);

  struct Group {
    std::vector<std::size_t> rows;
    std::vector<double> x, y;
  };
  std::map<std::string, Group> groups;
  MisalignmentResult result;
  result.scope = scope;
  for (const auto& r : ratings.records()) {
    if (r.rater_family != RaterFamily::model) continue;
    const auto it = values.find(r.unit_id);
    if (it == values.end()) continue;
    const std::string prompt = r.prompt_id.value_or("");
    std::string key = r.task_id;
    if (scope == FitScope::per_item_model_prompt) key += "|" + r.rater_id + "|" + prompt;
    auto& g = groups[key];
    g.rows.push_back(result.panel.rows.size());
    g.x.push_back(r.score);
    g.y.push_back(it->second);
    result.panel.rows.push_back({r.unit_id, r.task_id, r.rater_id, prompt, 0.0});
  }
  if (groups.empty()) throw InputError("no model ratings overlap outcome " + std::string(outcome));
  for (const auto& [key, g] : groups) {
    if (g.rows.size() < 3) {
      throw std::invalid_argument("fit group '" + key + "' has fewer than 3 observations");
    }
    const auto fit = ols_residuals(g.x, g.y);
    for (std::size_t k = 0; k < g.rows.size(); ++k) result.panel.rows[g.rows[k]].residual = fit.residuals[k];
    result.groups.push_back({key, g.rows.size(), fit.intercept, fit.slope, fit.intercept_only});
    if (fit.intercept_only) {
      result.warnings.push_back("constant rating in fit group '" + key + "': intercept-only fit");
    }
  }
  return result;
}

std::vector<TermMask> FactorDesign::terms() const {
  std::vector<TermMask> out;
  for (TermMask t = 1; t <= kAllFacets; ++t) {
    if ((t & ~active) == 0 && t != active) out.push_back(t);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](TermMask a, TermMask b) { return std::popcount(a) < std::popcount(b); });
  if (active != 0) out.push_back(active);
  return out;
}

FactorDesign FactorDesign::from_panel(const MisalignmentPanel& panel) {
  std::array<std::set<std::string>, 4> sets;
  for (const auto& r : panel.rows) {
    sets[0].insert(r.c);
    sets[1].insert(r.i);
    sets[2].insert(r.m);
    sets[3].insert(r.p);
  }
  FactorDesign d;
  for (unsigned f = 0; f < 4; ++f) {
    d.levels[f].assign(sets[f].begin(), sets[f].end());
    if (d.levels[f].size() >= 2) d.active |= 1u << f;
  }
  return d;
}

namespace {

struct Indexed {
  FactorDesign design;
  std::array<std::size_t, 4> n{};
  std::vector<std::array<std::uint32_t, 4>> idx;
  std::vector<double> y;
};

Indexed index_panel(const MisalignmentPanel& panel) {
  if (panel.rows.empty()) throw InputError("variance decomposition: empty panel");
  Indexed out;
  out.design = FactorDesign::from_panel(panel);
  if (out.design.active == 0) throw InputError("variance decomposition: every facet has a single level");
  for (unsigned f = 0; f < 4; ++f) out.n[f] = out.design.levels[f].size();
  auto find = [&](unsigned f, const std::string& v) {
    const auto& lv = out.design.levels[f];
    return static_cast<std::uint32_t>(std::lower_bound(lv.begin(), lv.end(), v) - lv.begin());
  };
  out.idx.reserve(panel.rows.size());
  for (const auto& r : panel.rows) {
    if (!std::isfinite(r.residual)) throw InputError("variance decomposition: non-finite residual");
    out.idx.push_back({find(0, r.c), find(1, r.i), find(2, r.m), find(3, r.p)});
    out.y.push_back(r.residual);
  }
  return out;
}

// Mixed-radix position of a cell within the sub-table of facets in `mask`.
std::size_t project(const std::array<std::uint32_t, 4>& cell, const std::array<std::size_t, 4>& n, unsigned mask) {
  std::size_t code = 0;
  for (unsigned f = 0; f < 4; ++f) {
    if (mask & (1u << f)) code = code * n[f] + cell[f];
  }
  return code;
}

std::size_t table_size(const std::array<std::size_t, 4>& n, unsigned mask) {
  std::size_t s = 1;
  for (unsigned f = 0; f < 4; ++f) {
    if (mask & (1u << f)) s *= n[f];
  }
  return s;
}

std::array<std::uint32_t, 4> decode(std::size_t code, const std::array<std::size_t, 4>& n, unsigned mask) {
  std::array<std::uint32_t, 4> cell{};
  for (int f = 3; f >= 0; --f) {
    if (mask & (1u << f)) {
      cell[f] = static_cast<std::uint32_t>(code % n[f]);
      code /= n[f];
    }
  }
  return cell;
}

}  // namespace

bool is_balanced(const MisalignmentPanel& panel) {
  if (panel.rows.empty()) return false;
  const auto data = index_panel(panel);
  const std::size_t cells = table_size(data.n, kAllFacets);
  if (data.y.size() != cells) return false;
  std::vector<char> seen(cells, 0);
  for (const auto& c : data.idx) {
    auto& s = seen[project(c, data.n, kAllFacets)];
    if (s) return false;
    s = 1;
  }
  return true;
}

double VarianceComponents::proportion(std::size_t index) const {
  return total > 0.0 ? terms.at(index).sigma2 / total : 0.0;
}

VarianceComponents ems_components(const MisalignmentPanel& panel) {
  if (!is_balanced(panel)) {
    throw InputError(
        "variance decomposition: design is not balanced with one observation per cell; use the Bayesian sampler");
  }
  const auto data = index_panel(panel);
  const auto& n = data.n;
  const std::size_t total_cells = data.y.size();
  const unsigned active = data.design.active;

  // Marginal means over every facet subset.
  std::array<std::vector<double>, 16> means;
  for (unsigned s = 0; s < 16; ++s) {
    if (s & ~active) continue;
    means[s].assign(table_size(n, s), 0.0);
    for (std::size_t k = 0; k < total_cells; ++k) means[s][project(data.idx[k], n, s)] += data.y[k];
    const double per = static_cast<double>(total_cells) / static_cast<double>(means[s].size());
    for (auto& v : means[s]) v /= per;
  }

  VarianceComponents out;
  const double grand = means[0][0];
  for (double v : data.y) out.total_ss += (v - grand) * (v - grand);

  const auto terms = data.design.terms();
  std::map<TermMask, ComponentEstimate> est;
  for (TermMask t : terms) {
    ComponentEstimate c;
    c.term = t;
    c.name = t == active ? "residual" : term_name(t);
    const std::size_t combos = table_size(n, t);
    double sum_sq = 0.0;
    for (std::size_t code = 0; code < combos; ++code) {
      const auto cell = decode(code, n, t);
      double e = 0.0;
      // Inclusion-exclusion over sub-terms.
      for (unsigned s = t;; s = (s - 1) & t) {
        const double sign = (std::popcount(t & ~s) % 2) ? -1.0 : 1.0;
        e += sign * means[s][project(cell, n, s)];
        if (s == 0) break;
      }
      sum_sq += e * e;
    }
    c.ss = static_cast<double>(total_cells / combos) * sum_sq;
    c.df = 1.0;
    for (unsigned f = 0; f < 4; ++f) {
      if (t & (1u << f)) c.df *= static_cast<double>(n[f] - 1);
    }
    c.ms = c.ss / c.df;
    est[t] = c;
  }

  // E[MS_T] = sum over U containing T of (N / |U combos|) sigma2_U; solve from the top.
  std::vector<TermMask> by_size(terms.rbegin(), terms.rend());
  std::stable_sort(by_size.begin(), by_size.end(),
                   [](TermMask a, TermMask b) { return std::popcount(a) > std::popcount(b); });
  for (TermMask t : by_size) {
    double rest = est[t].ms;
    for (const auto& [u, cu] : est) {
      if (u != t && (u & t) == t) rest -= static_cast<double>(total_cells / table_size(n, u)) * cu.raw;
    }
    est[t].raw = rest / static_cast<double>(total_cells / table_size(n, t));
  }

  for (TermMask t : terms) {
    auto c = est[t];
    c.truncated = c.raw < 0.0;
    c.sigma2 = std::max(c.raw, 0.0);
    out.any_truncated = out.any_truncated || c.truncated;
    out.total += c.sigma2;
    out.terms.push_back(c);
  }
  return out;
}

// ---- Gibbs sampler ------------------------------------------------------------

namespace {

struct TermData {
  TermMask mask = 0;
  std::size_t levels = 0;
  std::vector<std::uint32_t> level_of;  // per row
  std::vector<double> count;            // rows per level
  std::vector<std::uint32_t> size_group;  // per level: index into group_sizes
  std::vector<double> group_sizes;        // distinct level sizes
  std::vector<double> group_levels;       // levels per distinct size
};

double draw_inv_gamma(Rng& rng, double shape, double rate) {
  std::gamma_distribution<double> g(shape, 1.0 / rate);
  return 1.0 / g(rng);
}

struct ChainDraws {
  std::vector<std::vector<double>> sigma2;  // per term (residual last), post-warmup
  std::vector<double> mu;
};

// Level means of one term summarized per distinct level size.
struct GroupedMeans {
  std::vector<double> size;   // rows per level
  std::vector<double> k;      // levels of that size
  std::vector<double> s1;     // sum of centered level means
  std::vector<double> s2;     // sum of squared centered level means
};

// log density of theta = log sigma2_T with the term's effects and the
// intercept integrated out; half-t prior on sigma_T, Jacobian included.
double collapsed_log_density(double theta, const GroupedMeans& gm, double sigma2, double nu, double a2) {
  const double s2t = std::exp(theta);
  double sw = 0.0, swy = 0.0, log_w = 0.0;
  for (std::size_t g = 0; g < gm.size.size(); ++g) {
    const double w = 1.0 / (s2t + sigma2 / gm.size[g]);
    sw += gm.k[g] * w;
    swy += w * gm.s1[g];
    log_w += gm.k[g] * std::log(w);
  }
  const double m = swy / sw;
  double quad = 0.0;
  for (std::size_t g = 0; g < gm.size.size(); ++g) {
    const double w = 1.0 / (s2t + sigma2 / gm.size[g]);
    quad += w * (gm.s2[g] - 2.0 * m * gm.s1[g] + gm.k[g] * m * m);
  }
  const double log_lik = 0.5 * log_w - 0.5 * std::log(sw) - 0.5 * quad;
  const double log_prior = 0.5 * theta - 0.5 * (nu + 1.0) * std::log1p(s2t / (nu * a2));
  return log_lik + log_prior;
}

// Univariate slice sampler with stepping out and shrinkage.
template <typename F>
double slice_step(double x0, F&& logf, Rng& rng, double width = 2.0, int max_steps = 32) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double level = logf(x0) + std::log(unif(rng));
  double lo = x0 - width * unif(rng);
  double hi = lo + width;
  for (int k = 0; k < max_steps && logf(lo) > level; ++k) lo -= width;
  for (int k = 0; k < max_steps && logf(hi) > level; ++k) hi += width;
  for (int k = 0; k < 200; ++k) {
    const double x = lo + (hi - lo) * unif(rng);
    if (logf(x) > level) return x;
    (x < x0 ? lo : hi) = x;
  }
  return x0;
}

ChainDraws run_chain(const std::vector<TermData>& terms, const std::vector<double>& y, const BayesConfig& cfg,
                     std::size_t chain) {
  Rng rng = substream(cfg.seed, Stream::sampler, chain);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  const std::size_t n_rows = y.size();
  const std::size_t k_terms = terms.size();
  const double nu = cfg.prior_df;
  const double a2 = cfg.prior_scale * cfg.prior_scale;

  const double ybar = stats::mean(y);
  const double yvar = std::max(stats::sample_variance(y), 1e-8);

  // Over-dispersed starting points.
  double mu = ybar + normal(rng) * std::sqrt(yvar);
  double sigma2 = yvar * unif(rng);
  double a_eps = 1.0;
  std::vector<std::vector<double>> gamma(k_terms);
  std::vector<double> log_s2(k_terms);
  for (std::size_t t = 0; t < k_terms; ++t) {
    gamma[t].assign(terms[t].levels, 0.0);
    log_s2[t] = std::log(yvar / static_cast<double>(k_terms + 1)) + normal(rng);
  }
  std::vector<double> e(n_rows);
  for (std::size_t i = 0; i < n_rows; ++i) e[i] = y[i] - mu;

  ChainDraws out;
  out.sigma2.assign(k_terms + 1, {});
  const std::size_t keep = cfg.iters - cfg.warmup;
  for (auto& v : out.sigma2) v.reserve(keep);
  out.mu.reserve(keep);

  std::vector<GroupedMeans> grouped(k_terms);
  for (std::size_t t = 0; t < k_terms; ++t) {
    grouped[t].size = terms[t].group_sizes;
    grouped[t].k = terms[t].group_levels;
    grouped[t].s1.resize(terms[t].group_sizes.size());
    grouped[t].s2.resize(terms[t].group_sizes.size());
  }
  std::vector<double> sums, level_mean, delta;
  for (std::size_t it = 0; it < cfg.iters; ++it) {
    for (std::size_t t = 0; t < k_terms; ++t) {
      const auto& td = terms[t];
      const std::size_t levels = td.levels;
      auto& g = gamma[t];
      auto& gm = grouped[t];
      sums.assign(levels, 0.0);
      for (std::size_t i = 0; i < n_rows; ++i) sums[td.level_of[i]] += e[i];
      // Level means of the partial residual y - sum_{U != t} gamma_U.
      level_mean.resize(levels);
      for (std::size_t l = 0; l < levels; ++l) level_mean[l] = sums[l] / td.count[l] + g[l] + mu;

      const double center = std::accumulate(level_mean.begin(), level_mean.end(), 0.0) / static_cast<double>(levels);
      std::fill(gm.s1.begin(), gm.s1.end(), 0.0);
      std::fill(gm.s2.begin(), gm.s2.end(), 0.0);
      for (std::size_t l = 0; l < levels; ++l) {
        const double d = level_mean[l] - center;
        gm.s1[td.size_group[l]] += d;
        gm.s2[td.size_group[l]] += d * d;
      }
      log_s2[t] = slice_step(log_s2[t], [&](double th) { return collapsed_log_density(th, gm, sigma2, nu, a2); }, rng);
      const double s2t = std::exp(log_s2[t]);

      // Intercept with this term's effects integrated out, then the effects.
      double sw = 0.0, swy = 0.0;
      for (std::size_t l = 0; l < levels; ++l) {
        const double w = 1.0 / (s2t + sigma2 / td.count[l]);
        sw += w;
        swy += w * level_mean[l];
      }
      const double mu_new = swy / sw + normal(rng) / std::sqrt(sw);
      delta.resize(levels);
      for (std::size_t l = 0; l < levels; ++l) {
        const double prec = td.count[l] / sigma2 + 1.0 / s2t;
        const double r = td.count[l] * (level_mean[l] - mu_new);
        const double gl = (r / sigma2) / prec + normal(rng) / std::sqrt(prec);
        delta[l] = g[l] - gl;
        g[l] = gl;
      }
      const double dmu = mu - mu_new;
      mu = mu_new;
      for (std::size_t i = 0; i < n_rows; ++i) e[i] += delta[td.level_of[i]] + dmu;
    }

    double sse = 0.0;
    for (double v : e) sse += v * v;
    sigma2 = draw_inv_gamma(rng, (nu + static_cast<double>(n_rows)) / 2.0, nu / a_eps + sse / 2.0);
    a_eps = draw_inv_gamma(rng, (nu + 1.0) / 2.0, nu / sigma2 + 1.0 / a2);

    if (it >= cfg.warmup) {
      for (std::size_t t = 0; t < k_terms; ++t) out.sigma2[t].push_back(std::exp(log_s2[t]));
      out.sigma2[k_terms].push_back(sigma2);
      out.mu.push_back(mu);
    }
  }
  return out;
}

PosteriorTerm summarize(TermMask term, std::string name, const std::vector<std::vector<double>>& chains) {
  PosteriorTerm p;
  p.term = term;
  p.name = std::move(name);
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  p.mean = stats::mean(pooled);
  p.median = stats::median(pooled);
  p.lower = stats::quantile(pooled, 0.025);
  p.upper = stats::quantile(pooled, 0.975);
  p.rhat = split_rhat(chains);
  return p;
}

IntervalValue interval_of(std::vector<double> v) {
  IntervalValue out;
  out.mean = stats::mean(v);
  out.median = stats::median(v);
  out.lower = stats::quantile(v, 0.025);
  out.upper = stats::quantile(v, 0.975);
  return out;
}

}  // namespace

PosteriorSummary bayes_components(const MisalignmentPanel& panel, const BayesConfig& config) {
  if (config.chains < 1) throw std::invalid_argument("bayes_components: need at least one chain");
  if (config.warmup >= config.iters || config.iters - config.warmup < 4) {
    throw std::invalid_argument("bayes_components: need at least 4 post-warmup iterations");
  }
  if (!(config.prior_df > 0.0) || !(config.prior_scale > 0.0)) {
    throw std::invalid_argument("bayes_components: prior parameters must be positive");
  }
  const auto data = index_panel(panel);
  const auto all_terms = data.design.terms();
  const TermMask residual = data.design.residual();

  std::vector<TermData> terms;
  for (TermMask t : all_terms) {
    if (t == residual) continue;
    TermData td;
    td.mask = t;
    // Levels are the observed combinations of the term's facets.
    std::map<std::size_t, std::uint32_t> compact;
    for (const auto& cell : data.idx) compact.emplace(project(cell, data.n, t), 0);
    std::uint32_t next = 0;
    for (auto& [code, id] : compact) id = next++;
    td.levels = compact.size();
    td.count.assign(td.levels, 0.0);
    td.level_of.reserve(data.idx.size());
    for (const auto& cell : data.idx) {
      const auto l = compact.at(project(cell, data.n, t));
      td.level_of.push_back(l);
      td.count[l] += 1.0;
    }
    std::map<double, std::uint32_t> sizes;
    for (double c : td.count) sizes.emplace(c, 0);
    for (auto& [size, id] : sizes) {
      id = static_cast<std::uint32_t>(td.group_sizes.size());
      td.group_sizes.push_back(size);
      td.group_levels.push_back(0.0);
    }
    for (double c : td.count) {
      const auto g = sizes.at(c);
      td.size_group.push_back(g);
      td.group_levels[g] += 1.0;
    }
    terms.push_back(std::move(td));
  }

  std::vector<ChainDraws> chains(config.chains);
  parallel_for(config.chains, [&](std::size_t c) { chains[c] = run_chain(terms, data.y, config, c); });

  PosteriorSummary out;
  out.chains = config.chains;
  out.iters = config.iters;
  out.warmup = config.warmup;
  std::vector<TermMask> masks;
  for (const auto& td : terms) masks.push_back(td.mask);
  masks.push_back(residual);
  for (std::size_t t = 0; t < masks.size(); ++t) {
    std::vector<std::vector<double>> per_chain;
    for (const auto& c : chains) per_chain.push_back(c.sigma2[t]);
    out.terms.push_back(summarize(masks[t], masks[t] == residual ? "residual" : term_name(masks[t]), per_chain));
    std::vector<double> pooled;
    for (const auto& c : per_chain) pooled.insert(pooled.end(), c.begin(), c.end());
    out.draws.push_back(std::move(pooled));
  }
  std::vector<std::vector<double>> mu_chains;
  for (const auto& c : chains) mu_chains.push_back(c.mu);
  out.intercept = summarize(0, "intercept", mu_chains);

  out.max_rhat = out.intercept.rhat;
  for (const auto& t : out.terms) {
    if (std::isnan(out.max_rhat) || t.rhat > out.max_rhat) out.max_rhat = t.rhat;
  }
  out.converged = !(out.max_rhat > config.rhat_threshold) && config.chains > 1;
  if (config.chains > 1 && out.max_rhat > config.rhat_threshold && !config.allow_unconverged) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "sampler did not converge: max R-hat %.4f exceeds %.3f", out.max_rhat,
                  config.rhat_threshold);
    throw AnalysisError(buf);
  }
  return out;
}

// ---- shares --------------------------------------------------------------------

namespace {

std::vector<TermMask> default_denominator(std::span<const TermMask> terms, TermMask residual) {
  std::vector<TermMask> out;
  for (TermMask t : terms) {
    if (t != residual && term_contains(t, facet_p)) out.push_back(t);
  }
  return out;
}

}  // namespace

ShareReport derived_shares(std::span<const TermValue> components, const ShareOptions& options) {
  double total = 0.0;
  for (const auto& c : components) {
    if (!std::isfinite(c.value) || c.value < 0.0) throw std::invalid_argument("derived_shares: invalid component");
    total += c.value;
  }
  if (!(total > 0.0)) throw std::invalid_argument("derived_shares: total variance is zero");
  std::vector<TermMask> masks;
  for (const auto& c : components) masks.push_back(c.term);
  ShareReport out;
  out.erho_denominator =
      options.erho_denominator.empty() ? default_denominator(masks, options.residual) : options.erho_denominator;
  double p_value = 0.0, denom = 0.0;
  bool has_p = false;
  for (const auto& c : components) {
    out.percent.push_back({c.term, 100.0 * c.value / total});
    if (c.term != options.residual && (term_contains(c.term, facet_m) || term_contains(c.term, facet_p))) {
      out.controllable += c.value;
    }
    if (c.term == facet_p) {
      p_value = c.value;
      has_p = true;
    }
    if (std::find(out.erho_denominator.begin(), out.erho_denominator.end(), c.term) != out.erho_denominator.end()) {
      denom += c.value;
    }
  }
  out.controllable = 100.0 * out.controllable / total;
  out.erho2 = has_p && denom > 0.0 ? p_value / denom : std::numeric_limits<double>::quiet_NaN();
  return out;
}

PosteriorShares derived_shares(const PosteriorSummary& posterior, const ShareOptions& options) {
  if (posterior.terms.empty() || posterior.draws.size() != posterior.terms.size()) {
    throw std::invalid_argument("derived_shares: posterior has no draws");
  }
  ShareOptions opts = options;
  opts.residual = posterior.terms.back().term;
  const std::size_t draws = posterior.draws.front().size();
  const std::size_t k = posterior.terms.size();
  std::vector<std::vector<double>> percent(k, std::vector<double>(draws));
  std::vector<double> controllable(draws), erho(draws);
  std::vector<TermValue> comps(k);
  std::vector<TermMask> denominator;
  for (std::size_t d = 0; d < draws; ++d) {
    for (std::size_t t = 0; t < k; ++t) comps[t] = {posterior.terms[t].term, posterior.draws[t][d]};
    const auto r = derived_shares(comps, opts);
    for (std::size_t t = 0; t < k; ++t) percent[t][d] = r.percent[t].value;
    controllable[d] = r.controllable;
    erho[d] = r.erho2;
    denominator = r.erho_denominator;
  }
  PosteriorShares out;
  for (std::size_t t = 0; t < k; ++t) out.percent.emplace_back(posterior.terms[t].term, interval_of(percent[t]));
  out.controllable = interval_of(controllable);
  if (std::none_of(erho.begin(), erho.end(), [](double v) { return std::isnan(v); })) {
    out.erho2 = interval_of(erho);
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.erho2 = {nan, nan, nan, nan};
  }
  out.erho_denominator = denominator;
  return out;
}

std::string format_with_ci(double point, double lower, double upper, int decimals) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f (CI [%.*f,%.*f])", decimals, point, decimals, lower, decimals, upper);
  return buf;
}

}  // namespace alignmeter
