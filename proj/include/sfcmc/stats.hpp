#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace sfcmc::stats {

// sup_x |F_n(x) - F(x)| for the empirical cdf of `values` (sorted in place).
double ks_statistic(std::vector<double>& values, const std::function<double(double)>& cdf);

// Linear interpolation between order statistics (sorts in place).
double percentile(std::vector<double>& values, double q);

double mean(std::span<const double> values);
double variance(std::span<const double> values);  // unbiased
double autocorrelation(std::span<const double> series, std::size_t lag);

struct Histogram {
    double lower = 0.0;
    double upper = 0.0;
    std::vector<double> density;  // normalized by the total count, including out-of-range values
    std::size_t out_of_range = 0;

    double bin_width() const { return (upper - lower) / static_cast<double>(density.size()); }
    double center(std::size_t bin) const { return lower + (static_cast<double>(bin) + 0.5) * bin_width(); }
};
Histogram histogram(std::span<const double> values, double lower, double upper, std::size_t bins);

}  // namespace sfcmc::stats
