#include "sfcmc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sfcmc::stats {

double ks_statistic(std::vector<double>& values, const std::function<double(double)>& cdf) {
    if (values.empty()) throw std::invalid_argument("ks_statistic: no values");
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    double d = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double f = cdf(values[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

double percentile(std::vector<double>& values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile: no values");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double t = pos - static_cast<double>(lo);
    return values[lo] + t * (values[hi] - values[lo]);
}

double mean(std::span<const double> values) {
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double variance(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const double m = mean(values);
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return s / static_cast<double>(values.size() - 1);
}

double autocorrelation(std::span<const double> series, std::size_t lag) {
    if (series.size() <= lag + 1) return 0.0;
    const double m = mean(series);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        den += (series[i] - m) * (series[i] - m);
        if (i + lag < series.size()) num += (series[i] - m) * (series[i + lag] - m);
    }
    return den > 0.0 ? num / den : 0.0;
}

Histogram histogram(std::span<const double> values, double lower, double upper, std::size_t bins) {
    if (!(upper > lower) || bins == 0) throw std::invalid_argument("histogram: empty range");
    Histogram h;
    h.lower = lower;
    h.upper = upper;
    h.density.assign(bins, 0.0);
    const double width = h.bin_width();
    for (double v : values) {
        if (v < lower || v > upper) {
            ++h.out_of_range;
            continue;
        }
        auto b = static_cast<std::size_t>((v - lower) / width);
        h.density[std::min(b, bins - 1)] += 1.0;
    }
    const double norm = static_cast<double>(values.size()) * width;
    for (auto& d : h.density) d /= norm;
    return h;
}

}  // namespace sfcmc::stats
