#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace lpma::stats {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Two-sided p-value of a standard normal statistic.
inline double two_sided_p(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

double normal_quantile(double p);

// Linear-interpolation sample quantile (Hyndman-Fan type 7); NaNs skipped.
double quantile(std::span<const double> values, double prob);

double mean(std::span<const double> values);
double sample_sd(std::span<const double> values);
double median(std::span<const double> values);

}  // namespace lpma::stats
