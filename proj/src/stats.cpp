#include "lpma/stats.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace lpma::stats {

namespace {
std::vector<double> finite(std::span<const double> values) {
    std::vector<double> v;
    v.reserve(values.size());
    for (double x : values)
        if (!std::isnan(x)) v.push_back(x);
    return v;
}
}  // namespace

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p outside (0,1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double quantile(std::span<const double> values, double prob) {
    auto v = finite(values);
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double mean(std::span<const double> values) {
    double s = 0.0;
    std::size_t n = 0;
    for (double x : values)
        if (!std::isnan(x)) {
            s += x;
            ++n;
        }
    return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

double sample_sd(std::span<const double> values) {
    const double m = mean(values);
    double ss = 0.0;
    std::size_t n = 0;
    for (double x : values)
        if (!std::isnan(x)) {
            ss += (x - m) * (x - m);
            ++n;
        }
    return n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : std::numeric_limits<double>::quiet_NaN();
}

double median(std::span<const double> values) { return quantile(values, 0.5); }

}  // namespace lpma::stats
