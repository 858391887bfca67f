#include "sfcmc/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sfcmc {

namespace {

struct Simplex {
    std::vector<std::vector<double>> points;
    std::vector<double> values;
};

double sanitize(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); }

// One Nelder-Mead run with the standard coefficients (1, 2, 0.5, 0.5).
Minimum run_once(const std::function<double(std::span<const double>)>& f, const std::vector<double>& start,
                 const NelderMeadOptions& opt, int budget) {
    const std::size_t n = start.size();
    int evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        return sanitize(f(x));
    };

    Simplex s;
    s.points.push_back(start);
    for (std::size_t i = 0; i < n; ++i) {
        auto p = start;
        p[i] += opt.initial_step;
        s.points.push_back(std::move(p));
    }
    for (const auto& p : s.points) s.values.push_back(eval(p));

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), trial(n), trial2(n);
    auto blend = [&](const std::vector<double>& a, const std::vector<double>& b, double t, std::vector<double>& out) {
        for (std::size_t j = 0; j < n; ++j) out[j] = a[j] + t * (b[j] - a[j]);
    };

    while (evals < budget) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.values[a] < s.values[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

        double diameter = 0.0;
        for (std::size_t i = 0; i <= n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                diameter = std::max(diameter, std::abs(s.points[i][j] - s.points[best][j]));
        const double spread = s.values[worst] - s.values[best];
        if (std::isfinite(spread) && spread <= opt.value_tolerance && diameter <= opt.point_tolerance) break;
        if (diameter <= opt.point_tolerance * 1e-3) break;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t j = 0; j < n; ++j) centroid[j] += s.points[i][j] / static_cast<double>(n);
        }

        blend(centroid, s.points[worst], -1.0, trial);
        const double fr = eval(trial);
        if (fr < s.values[best]) {
            blend(centroid, s.points[worst], -2.0, trial2);
            const double fe = eval(trial2);
            if (fe < fr) {
                s.points[worst] = trial2;
                s.values[worst] = fe;
            } else {
                s.points[worst] = trial;
                s.values[worst] = fr;
            }
            continue;
        }
        if (fr < s.values[second]) {
            s.points[worst] = trial;
            s.values[worst] = fr;
            continue;
        }
        const bool outside = fr < s.values[worst];
        blend(centroid, s.points[worst], outside ? -0.5 : 0.5, trial2);
        const double fc = eval(trial2);
        if (fc < (outside ? fr : s.values[worst])) {
            s.points[worst] = trial2;
            s.values[worst] = fc;
            continue;
        }
        // Shrink toward the best vertex.
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == best) continue;
            blend(s.points[best], s.points[i], 0.5, s.points[i]);
            s.values[i] = eval(s.points[i]);
        }
    }

    const auto it = std::min_element(s.values.begin(), s.values.end());
    const auto idx = static_cast<std::size_t>(it - s.values.begin());
    return {s.points[idx], *it, evals};
}

}  // namespace

Minimum nelder_mead(const std::function<double(std::span<const double>)>& objective, std::vector<double> start,
                    const NelderMeadOptions& options) {
    Minimum best = run_once(objective, start, options, options.max_evaluations);
    int total = best.evaluations;
    for (int r = 0; r < options.restarts && total < options.max_evaluations; ++r) {
        auto next = run_once(objective, best.point, options, options.max_evaluations - total);
        total += next.evaluations;
        const bool improved = next.value < best.value;
        if (improved) best = std::move(next);
        if (!improved) break;
    }
    best.evaluations = total;
    return best;
}

}  // namespace sfcmc
