#pragma once

#include <filesystem>
#include <vector>

#include "config.hpp"

namespace alignmeter::cli {

using Written = std::vector<std::filesystem::path>;

Written cmd_align(const AnalysisConfig& config);
Written cmd_dcor(const AnalysisConfig& config);
Written cmd_robust(const AnalysisConfig& config);
Written cmd_ensemble(const AnalysisConfig& config);
Written cmd_decompose(const AnalysisConfig& config);
Written cmd_simulate(const AnalysisConfig& config);

}  // namespace alignmeter::cli
