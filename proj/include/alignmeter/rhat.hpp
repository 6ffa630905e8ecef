#pragma once

#include <span>
#include <vector>

namespace alignmeter {

/// Rank-normalized split R-hat. `chains` holds equal-length draw sequences.
/// Returns max(bulk, folded-tail); NaN when the draws have no variance.
double split_rhat(std::span<const std::vector<double>> chains);

/// The bulk-only component (split chains, rank-normalized).
double split_rhat_bulk(std::span<const std::vector<double>> chains);

/// Classic (non-rank) split R-hat, exposed for diagnostics and tests.
double split_rhat_classic(std::span<const std::vector<double>> chains);

}  // namespace alignmeter
