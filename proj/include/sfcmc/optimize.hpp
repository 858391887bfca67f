#pragma once

#include <functional>
#include <span>
#include <vector>

namespace sfcmc {

struct NelderMeadOptions {
    int max_evaluations = 20000;
    double initial_step = 0.1;      // absolute, per coordinate
    double value_tolerance = 1e-18;  // absolute spread of simplex values
    double point_tolerance = 1e-12;  // simplex diameter
    int restarts = 2;                // fresh simplices around the incumbent
};

struct Minimum {
    std::vector<double> point;
    double value = 0.0;
    int evaluations = 0;
};

// Derivative-free local minimization. Non-finite objective values are
// treated as +inf, so infeasible regions can simply return infinity.
Minimum nelder_mead(const std::function<double(std::span<const double>)>& objective, std::vector<double> start,
                    const NelderMeadOptions& options = {});

}  // namespace sfcmc
