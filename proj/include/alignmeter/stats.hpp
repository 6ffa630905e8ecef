#pragma once

#include <span>
#include <vector>

namespace alignmeter::stats {

double mean(std::span<const double> v);
/// Unbiased (n-1) sample variance; 0 for fewer than two values.
double sample_variance(std::span<const double> v);

/// Median with midpoint averaging for even counts. Reorders `v`.
double median_inplace(std::span<double> v);
double median(std::span<const double> v);

/// Linear-interpolation quantile (R type 7). Requires non-empty input.
double quantile(std::span<const double> v, double prob);

double normal_cdf(double x);
double normal_quantile(double p);

/// Two-sided critical value for a central interval of the given level.
double two_sided_z(double level);

}  // namespace alignmeter::stats
