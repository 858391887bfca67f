#pragma once

// Links the model to percentile data. Household income is affine in wealth,
// WB = scale * c0 + c1 * M, so a wealth fit implies an income distribution
// that can be compared against an income table.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "sfcmc/distributions.hpp"
#include "sfcmc/ingest.hpp"
#include "sfcmc/kernels.hpp"
#include "sfcmc/sfc_model.hpp"

namespace sfcmc {

// Cdf of scale * c0 + c1 * M for M ~ wealth. Throws DegenerateIncomeError when c1 = 0.
std::function<double(double)> implied_income_cdf(const ModelParameters& params, const WeightFunction& wealth,
                                                 double scale = 1.0);

// Money multiplier that maps model per-household wealth onto the data mean.
double rescale(const ModelParameters& params, std::size_t nw, double data_mean_wealth);

struct ParameterBounds {
    double alpha1_lower = 0.4;
    double alpha1_upper = 0.95;
    double alpha2_lower = 0.001;
    double alpha2_upper = 0.2;
    // alpha0 is only required to be positive; starts are drawn within this factor of the template value.
    double alpha0_spread = 4.0;
};

struct EstimationProblem {
    WeightFunction wealth_fit;
    PercentileTable income_table;
    ModelParameters fixed;  // r, delta, k are held; alpha0 seeds the start range
    std::size_t nw = 100;
    ParameterBounds bounds;
    std::size_t starts = 16;
    std::uint64_t seed = 0;
    Execution execution = Execution::Parallel;
};

struct StartOutcome {
    std::uint64_t seed = 0;
    bool feasible = false;
    double residual = 0.0;
    ModelParameters params;
    double scale = 0.0;
};

struct EstimationResult {
    ModelParameters params;
    double scale = 0.0;
    double residual = 0.0;
    double implied_total_wealth = 0.0;  // constant_sum at the solution, model units
    double income_intercept = 0.0;      // scale * alpha0 / (1 - alpha1)
    double income_slope = 0.0;          // alpha2 / (1 - alpha1) - r
    std::vector<StartOutcome> starts;
    // Second derivatives of the objective in (log alpha0, logit alpha1, logit alpha2, log scale).
    std::vector<double> curvature_diagonal;
    double curvature_condition = 0.0;  // smallest / largest Hessian eigenvalue magnitude
    bool flat = false;
};

double estimation_objective(const EstimationProblem& problem, const ModelParameters& params, double scale);

// Throws EstimationInfeasibleError when no start ends inside D > 0.
EstimationResult estimate_parameters(const EstimationProblem& problem);

void write_estimation_json(std::ostream& out, const EstimationResult& result);

}  // namespace sfcmc
