#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "alignmeter/data_model.hpp"

namespace alignmeter {

/// tau_raw / sqrt(reliability). Throws when reliability <= 0.
double disattenuate(double tau_raw, double reliability);

/// sin(pi * tau / 2). Throws when |tau| > 1.
double greiner(double tau);

enum class ReliabilityScope { pooled, within_year };

std::string to_string(ReliabilityScope scope);
std::optional<ReliabilityScope> parse_reliability_scope(std::string_view text);

struct ReliabilityEstimate {
  double value = 0.0;  // Kendall tau between the two outcome variants
  std::size_t n = 0;   // units carrying both variants
  ReliabilityScope scope = ReliabilityScope::pooled;
  bool usable = false;  // value > 0
  std::map<int, double> per_year;  // within-year scope only
};

/// Agreement between two outcome variants measured on the same units. The
/// within-year scope averages per-year tau weighted by comparable pair counts.
ReliabilityEstimate stacked_reliability(const OutcomeTable& outcomes, std::string_view variant_a,
                                        std::string_view variant_b, ReliabilityScope scope = ReliabilityScope::pooled);

struct AttenuationResult {
  double tau_raw = 0.0;
  double reliability = 0.0;
  std::optional<double> tau_corrected;  // absent when the reliability is not positive
  bool greiner_applied = false;
};

/// Corrects an outcome-axis alignment. With `use_greiner` both the alignment
/// and the reliability are mapped through greiner() before dividing.
AttenuationResult correct_alignment(double tau_raw, double reliability, bool use_greiner = false);

}  // namespace alignmeter
