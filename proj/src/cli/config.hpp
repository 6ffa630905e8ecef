#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "alignmeter/attenuation.hpp"
#include "alignmeter/data_model.hpp"
#include "alignmeter/ensembles.hpp"
#include "alignmeter/variance_decomposition.hpp"

namespace alignmeter::cli {

using Json = nlohmann::json;

struct ReliabilityConfig {
  std::string variant_a;
  std::string variant_b;
  ReliabilityScope scope = ReliabilityScope::pooled;
  bool greiner = false;
};

struct AggregationConfig {
  std::filesystem::path file;
  std::string unit_column = "unit_id";
  std::string group_column = "group_id";
};

struct AnalysisConfig {
  Json effective;  // config after flag overrides
  std::filesystem::path base_dir;

  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> ratings;
  std::optional<std::filesystem::path> outcomes;
  std::optional<std::filesystem::path> metadata;
  RatingsSchema ratings_schema;
  OutcomeSchema outcome_schema;
  std::optional<AggregationConfig> aggregation;

  std::optional<std::string> outcome;
  std::vector<std::string> raters;  // "rater" or "rater|prompt"; empty keeps all
  std::vector<std::string> tasks;
  std::vector<std::string> human_reference;
  std::optional<std::string> experience_column;
  std::optional<ReliabilityConfig> reliability;
  std::vector<EnsembleSpec> ensembles;

  std::size_t permutations = 1000;
  std::size_t bootstrap = 1000;
  std::size_t chains = 4;
  std::size_t iters = 2000;
  std::size_t warmup = 1000;
  double level = 0.95;
  std::optional<double> alpha;

  FitScope fit_scope = FitScope::per_item;
  std::vector<TermMask> erho_denominator;
  bool dump_draws = false;
  bool allow_unconverged = false;
  double rhat_threshold = 1.075;

  std::string preset = "study";
  std::filesystem::path out = "alignmeter_out";

  std::string hash() const;
  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// Reads the JSON config (when given), applies overrides (flags win) and validates.
AnalysisConfig load_config(const std::optional<std::filesystem::path>& file, const Json& overrides);

/// FNV-1a 64-bit hash as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

}  // namespace alignmeter::cli
