#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alignmeter/data_model.hpp"

namespace alignmeter {

/// Facets of the crossed design: unit (C), item (I), model (M), prompt (P).
enum Facet : unsigned { facet_c = 1, facet_i = 2, facet_m = 4, facet_p = 8 };
inline constexpr std::array<char, 4> kFacetNames{'C', 'I', 'M', 'P'};
inline constexpr unsigned kAllFacets = 15;

/// A main effect or interaction, as a bitmask over facets.
using TermMask = unsigned;

/// "C", "M:P", "C:I:M", ...
std::string term_name(TermMask term);
/// Accepts ':' or 'x' separators in any facet order ("P:M", "MxP").
std::optional<TermMask> parse_term(std::string_view text);
bool term_contains(TermMask term, unsigned facet);

struct PanelRow {
  std::string c, i, m, p;
  double residual = 0.0;
};

struct MisalignmentPanel {
  std::vector<PanelRow> rows;
};

enum class FitScope { per_item, per_item_model_prompt };

std::string to_string(FitScope scope);
std::optional<FitScope> parse_fit_scope(std::string_view text);

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  bool intercept_only = false;  // rating was constant
  std::vector<double> residuals;
};

/// Ordinary least squares of y on x with an intercept; falls back to the mean when x is constant.
LinearFit ols_residuals(std::span<const double> x, std::span<const double> y);

struct ResidualGroup {
  std::string key;
  std::size_t n = 0;
  double intercept = 0.0;
  double slope = 0.0;
  bool intercept_only = false;
};

struct MisalignmentResult {
  MisalignmentPanel panel;
  FitScope scope = FitScope::per_item;
  std::vector<ResidualGroup> groups;
  std::vector<std::string> warnings;
};

/// Residualizes the outcome on each model rating within fit groups. Only
/// model-family ratings enter; a missing prompt becomes the empty level.
MisalignmentResult misalignment_residuals(const RatingsTable& ratings, const OutcomeTable& outcomes,
                                          std::string_view outcome, FitScope scope = FitScope::per_item);

/// Level sets of the four facets and the terms they support. Facets with a
/// single level are inactive; the term over all active facets is the residual.
struct FactorDesign {
  std::array<std::vector<std::string>, 4> levels;
  unsigned active = 0;

  std::size_t size(unsigned facet_index) const { return levels[facet_index].size(); }
  TermMask residual() const { return active; }
  /// Every nonempty subset of the active facets, residual last.
  std::vector<TermMask> terms() const;

  static FactorDesign from_panel(const MisalignmentPanel& panel);
};

/// True when every (c, i, m, p) combination appears exactly once.
bool is_balanced(const MisalignmentPanel& panel);

struct ComponentEstimate {
  TermMask term = 0;
  std::string name;
  double df = 0.0;
  double ss = 0.0;
  double ms = 0.0;
  double raw = 0.0;     // EMS solution before truncation
  double sigma2 = 0.0;  // max(raw, 0)
  bool truncated = false;
};

struct VarianceComponents {
  std::vector<ComponentEstimate> terms;  // residual last
  double total = 0.0;                    // sum of sigma2
  double total_ss = 0.0;
  bool any_truncated = false;

  double proportion(std::size_t index) const;
};

/// Closed-form expected-mean-square components for a balanced design with one
/// observation per cell. Throws InputError for unbalanced panels.
VarianceComponents ems_components(const MisalignmentPanel& panel);

struct BayesConfig {
  std::size_t chains = 4;
  std::size_t iters = 2000;  // per chain, including warmup
  std::size_t warmup = 1000;
  std::uint64_t seed = 0;
  double prior_df = 3.0;
  double prior_scale = 2.5;
  double rhat_threshold = 1.075;
  bool allow_unconverged = false;
};

struct PosteriorTerm {
  TermMask term = 0;
  std::string name;
  double mean = 0.0;
  double median = 0.0;
  double lower = 0.0;  // 2.5%
  double upper = 0.0;  // 97.5%
  double rhat = 0.0;
};

struct PosteriorSummary {
  std::vector<PosteriorTerm> terms;  // variance components, residual last
  PosteriorTerm intercept;
  std::vector<std::vector<double>> draws;  // per term: pooled post-warmup draws, chain-major
  std::size_t chains = 0;
  std::size_t iters = 0;
  std::size_t warmup = 0;
  double max_rhat = 0.0;
  bool converged = false;
};

/// Gibbs sampler for the crossed random-effects model with half-t priors on
/// the component standard deviations. Throws AnalysisError when any R-hat
/// exceeds the threshold unless `allow_unconverged`.
PosteriorSummary bayes_components(const MisalignmentPanel& panel, const BayesConfig& config);

struct TermValue {
  TermMask term = 0;
  double value = 0.0;
};

struct ShareOptions {
  TermMask residual = kAllFacets;
  std::vector<TermMask> erho_denominator;  // empty: every non-residual term containing P
};

struct ShareReport {
  std::vector<TermValue> percent;  // per term, percent of total
  double controllable = 0.0;       // percent in non-residual terms containing M or P
  double erho2 = 0.0;              // P / sum of the denominator set
  std::vector<TermMask> erho_denominator;
};

ShareReport derived_shares(std::span<const TermValue> components, const ShareOptions& options = {});

struct IntervalValue {
  double mean = 0.0;
  double median = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct PosteriorShares {
  std::vector<std::pair<TermMask, IntervalValue>> percent;
  IntervalValue controllable;
  IntervalValue erho2;
  std::vector<TermMask> erho_denominator;
};

/// Shares computed per draw, summarized by posterior mean and 95% interval.
PosteriorShares derived_shares(const PosteriorSummary& posterior, const ShareOptions& options = {});

/// "0.06 (CI [0.00,0.40])".
std::string format_with_ci(double point, double lower, double upper, int decimals = 2);

}  // namespace alignmeter
