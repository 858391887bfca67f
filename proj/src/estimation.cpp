#include "sfcmc/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <ostream>
#include <random>

#include <Eigen/Eigenvalues>

#include "json.hpp"
#include "sfcmc/errors.hpp"
#include "sfcmc/keyvalue.hpp"
#include "sfcmc/optimize.hpp"

namespace sfcmc {

std::function<double(double)> implied_income_cdf(const ModelParameters& params, const WeightFunction& wealth,
                                                 double scale) {
    const IncomeMap map = wealth_income_map(params);
    if (map.slope == 0.0)
        throw DegenerateIncomeError("income is constant in wealth: r (1 - alpha1) equals alpha2");
    const double c0 = scale * map.intercept;
    const double c1 = map.slope;
    if (c1 > 0.0) return [wealth, c0, c1](double w) { return wealth.cdf((w - c0) / c1); };
    return [wealth, c0, c1](double w) { return wealth.survival((w - c0) / c1); };
}

double rescale(const ModelParameters& params, std::size_t nw, double data_mean_wealth) {
    const double total = constant_sum(params, nw);
    if (!(total > 0.0)) throw DomainError("rescale: the constant sum is zero, so model wealth has no scale");
    if (!(data_mean_wealth > 0.0) || !std::isfinite(data_mean_wealth))
        throw ParameterDomainError("rescale: data mean wealth must be positive and finite");
    return data_mean_wealth / (total / static_cast<double>(nw));
}

double estimation_objective(const EstimationProblem& problem, const ModelParameters& params, double scale) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (!(params.alpha0 > 0.0) || !(params.alpha1 < 1.0) || !(params.denominator() > 0.0) || !(scale > 0.0)) return inf;
    const IncomeMap map = wealth_income_map(params);
    if (map.slope == 0.0) return inf;
    const auto cdf = implied_income_cdf(params, problem.wealth_fit, scale);
    double sum = 0.0;
    for (const auto& row : problem.income_table.rows) {
        const double e = cdf(row.threshold) - row.percentile;
        sum += e * e;
    }
    return sum;
}

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }
double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Unconstrained coordinates: (log alpha0, logit alpha1, logit alpha2, log scale) over the box.
struct Coordinates {
    const ParameterBounds& b;
    ModelParameters base;

    std::vector<double> to(const ModelParameters& p, double scale) const {
        return {std::log(p.alpha0), logit((p.alpha1 - b.alpha1_lower) / (b.alpha1_upper - b.alpha1_lower)),
                logit((p.alpha2 - b.alpha2_lower) / (b.alpha2_upper - b.alpha2_lower)), std::log(scale)};
    }

    std::pair<ModelParameters, double> from(std::span<const double> x) const {
        ModelParameters p = base;
        p.alpha0_per_household.clear();
        p.alpha0 = std::exp(x[0]);
        p.alpha1 = b.alpha1_lower + (b.alpha1_upper - b.alpha1_lower) * logistic(x[1]);
        p.alpha2 = b.alpha2_lower + (b.alpha2_upper - b.alpha2_lower) * logistic(x[2]);
        return {p, std::exp(x[3])};
    }
};

std::uint64_t start_seed(std::uint64_t seed, std::size_t k) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(k)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

StartOutcome run_start(const EstimationProblem& problem, const Coordinates& coords, double mean_wealth,
                       std::uint64_t seed) {
    StartOutcome out;
    out.seed = seed;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto& b = problem.bounds;

    ModelParameters p = coords.base;
    p.alpha0_per_household.clear();
    p.alpha1 = b.alpha1_lower + (b.alpha1_upper - b.alpha1_lower) * (0.05 + 0.9 * u(rng));
    // Keep the start strictly inside D > 0.
    const double alpha2_cap = std::min(b.alpha2_upper, 0.95 * (1.0 - p.alpha1) * (1.0 - p.delta * p.k) / p.k);
    if (!(alpha2_cap > b.alpha2_lower)) return out;
    p.alpha2 = b.alpha2_lower + (alpha2_cap - b.alpha2_lower) * (0.05 + 0.9 * u(rng));
    p.alpha0 = coords.base.alpha0 * std::exp(std::log(b.alpha0_spread) * (2.0 * u(rng) - 1.0));
    if (!(p.denominator() > 0.0)) return out;
    const double scale0 = rescale(p, problem.nw, mean_wealth);

    auto objective = [&](std::span<const double> x) {
        const auto [q, s] = coords.from(x);
        return estimation_objective(problem, q, s);
    };
    NelderMeadOptions options;
    options.initial_step = 0.5;
    const Minimum m = nelder_mead(objective, coords.to(p, scale0), options);
    const auto [q, s] = coords.from(m.point);
    out.params = q;
    out.scale = s;
    out.residual = m.value;
    out.feasible = std::isfinite(m.value) && q.denominator() > 0.0;
    return out;
}

}  // namespace

EstimationResult estimate_parameters(const EstimationProblem& problem) {
    validate_table(problem.income_table);
    if (problem.starts == 0) throw ParameterDomainError("estimation: at least one start is required");
    if (!problem.wealth_fit.has_finite_mean())
        throw InfiniteMeanError("estimation: the wealth fit has no finite mean to rescale against");
    if (!(problem.fixed.alpha0 > 0.0)) throw ParameterDomainError("estimation: template alpha0 must be positive");
    const auto& b = problem.bounds;
    if (!(b.alpha1_lower < b.alpha1_upper && b.alpha1_lower > 0.0 && b.alpha1_upper < 1.0) ||
        !(b.alpha2_lower < b.alpha2_upper && b.alpha2_lower >= 0.0) || !(b.alpha0_spread >= 1.0))
        throw ParameterDomainError("estimation: invalid parameter bounds");

    const double mean_wealth = problem.wealth_fit.mean();
    const Coordinates coords{b, problem.fixed};

    EstimationResult result;
    result.starts.resize(problem.starts);
    std::vector<std::exception_ptr> errors(problem.starts);
    const auto n = static_cast<long>(problem.starts);
    auto one = [&](long k) {
        const auto idx = static_cast<std::size_t>(k);
        try {
            result.starts[idx] = run_start(problem, coords, mean_wealth, start_seed(problem.seed, idx));
        } catch (...) {
            errors[idx] = std::current_exception();
        }
    };
    if (problem.execution == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (long k = 0; k < n; ++k) one(k);
    } else {
        for (long k = 0; k < n; ++k) one(k);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    const StartOutcome* best = nullptr;
    for (const auto& s : result.starts)
        if (s.feasible && (!best || s.residual < best->residual)) best = &s;
    if (!best) throw EstimationInfeasibleError("estimation: every start left the D > 0 region");

    result.params = best->params;
    result.scale = best->scale;
    result.residual = best->residual;
    result.implied_total_wealth = constant_sum(result.params, problem.nw);
    const IncomeMap map = wealth_income_map(result.params);
    result.income_intercept = result.scale * map.intercept;
    result.income_slope = map.slope;

    // Finite-difference Hessian in the optimizer's coordinates.
    const auto x0 = coords.to(result.params, result.scale);
    auto f = [&](std::vector<double> x) {
        const auto [q, s] = coords.from(x);
        return estimation_objective(problem, q, s);
    };
    constexpr double h = 1e-3;
    const std::size_t d = x0.size();
    Eigen::MatrixXd hess(d, d);
    const double f0 = f(x0);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i; j < d; ++j) {
            auto xpp = x0, xpm = x0, xmp = x0, xmm = x0;
            xpp[i] += h, xpp[j] += h;
            xpm[i] += h, xpm[j] -= h;
            xmp[i] -= h, xmp[j] += h;
            xmm[i] -= h, xmm[j] -= h;
            double v;
            if (i == j) {
                auto xp = x0, xm = x0;
                xp[i] += h;
                xm[i] -= h;
                v = (f(xp) - 2.0 * f0 + f(xm)) / (h * h);
            } else {
                v = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h * h);
            }
            hess(static_cast<long>(i), static_cast<long>(j)) = v;
            hess(static_cast<long>(j), static_cast<long>(i)) = v;
        }
        result.curvature_diagonal.push_back(hess(static_cast<long>(i), static_cast<long>(i)));
    }
    if (hess.allFinite()) {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess, Eigen::EigenvaluesOnly);
        const auto mags = eig.eigenvalues().cwiseAbs();
        result.curvature_condition = mags.maxCoeff() > 0.0 ? mags.minCoeff() / mags.maxCoeff() : 0.0;
    }
    result.flat = result.curvature_condition < 1e-6;
    return result;
}

void write_estimation_json(std::ostream& out, const EstimationResult& result) {
    using json = nlohmann::ordered_json;
    auto params = [](const ModelParameters& p) {
        return json{{"alpha0", p.alpha0}, {"alpha1", p.alpha1}, {"alpha2", p.alpha2},
                    {"r", p.r},           {"delta", p.delta},   {"k", p.k}};
    };
    json j;
    j["params"] = params(result.params);
    j["scale"] = result.scale;
    j["residual"] = result.residual;
    j["implied_total_wealth"] = result.implied_total_wealth;
    j["income_map"] = {{"intercept", result.income_intercept}, {"slope", result.income_slope}};
    json starts = json::array();
    for (const auto& s : result.starts) {
        json e{{"seed", s.seed}, {"feasible", s.feasible}};
        if (s.feasible) {
            e["residual"] = s.residual;
            e["params"] = params(s.params);
            e["scale"] = s.scale;
        }
        starts.push_back(e);
    }
    j["starts"] = starts;
    j["flatness"] = {{"curvature_diagonal", result.curvature_diagonal},
                     {"curvature_condition", result.curvature_condition},
                     {"flat", result.flat}};
    out << j.dump(2) << '\n';
}

}  // namespace sfcmc
