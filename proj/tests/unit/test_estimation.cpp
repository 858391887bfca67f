#include <cmath>
#include <sstream>

#include "doctest.h"

#include "sfcmc/errors.hpp"
#include "sfcmc/estimation.hpp"

using namespace sfcmc;

namespace {

// Income thresholds at p are the affine image of the wealth quantiles.
PercentileTable income_image(const ModelParameters& p, const WeightFunction& wealth, double scale,
                             std::span<const double> grid) {
    const double c0 = scale * p.alpha0 / (1.0 - p.alpha1);
    const double c1 = p.alpha2 / (1.0 - p.alpha1) - p.r;
    PercentileTable t;
    for (double q : grid) t.rows.push_back({q, c0 + c1 * wealth.quantile(q)});
    return t;
}

EstimationProblem problem_for(const WeightFunction& wealth, PercentileTable income) {
    EstimationProblem pr{.wealth_fit = wealth,
                         .income_table = std::move(income),
                         .fixed = ModelParameters::reference(),
                         .nw = 100,
                         .bounds = {},
                         .starts = 8,
                         .seed = 3,
                         .execution = Execution::Parallel};
    return pr;
}

}  // namespace

TEST_CASE("implied income cdf for the reference parameters") {
    const auto p = ModelParameters::reference();
    const auto wealth = WeightFunction::lognormal(1.72, 4.64e4);
    const double scale = 9.25e4;
    const auto cdf = implied_income_cdf(p, wealth, scale);
    for (double w : {5000.0, 1e4, 3e4, 1e5}) CHECK(cdf(w) == doctest::Approx(wealth.cdf((w - 0.004 * scale) / 0.05)));
    CHECK(cdf(0.004 * scale) == 0.0);
}

TEST_CASE("a negative slope reverses the orientation") {
    auto p = ModelParameters::reference();
    p.alpha2 = 0.005;  // alpha2 / (1 - alpha1) = 0.02 < r
    const double c1 = 0.02 - 0.03;
    const auto wealth = WeightFunction::gamma(2.0, 1.0);
    const auto cdf = implied_income_cdf(p, wealth);
    const double c0 = 0.004;
    for (double m : {0.5, 1.0, 4.0}) CHECK(cdf(c0 + c1 * m) == doctest::Approx(wealth.survival(m)).epsilon(1e-12));
}

TEST_CASE("a zero slope is degenerate") {
    auto p = ModelParameters::reference();
    p.alpha2 = p.r * (1.0 - p.alpha1);
    CHECK_THROWS_AS(implied_income_cdf(p, WeightFunction::gamma(2.0, 1.0)), DegenerateIncomeError);
}

TEST_CASE("a near point mass of wealth gives a step in income") {
    const auto p = ModelParameters::reference();
    const auto cdf = implied_income_cdf(p, WeightFunction::lognormal(1e-7, 3.0));
    const double step = 0.004 + 0.05 * 3.0;
    CHECK(cdf(step * (1.0 - 1e-5)) < 1e-12);
    CHECK(cdf(step * (1.0 + 1e-5)) > 1.0 - 1e-12);
}

TEST_CASE("income quantiles are the affine image of wealth quantiles") {
    const auto p = ModelParameters::reference();
    const auto wealth = WeightFunction::lognormal(1.72, 4.64e4);
    const double scale = 9.25e4;
    const auto cdf = implied_income_cdf(p, wealth, scale);
    for (double q : {0.01, 0.1, 0.5, 0.9, 0.99}) {
        const double w = 0.004 * scale + 0.05 * wealth.quantile(q);
        CHECK(cdf(w) == doctest::Approx(q).epsilon(1e-10));
    }
}

TEST_CASE("rescale matches per-household model wealth to the data mean") {
    const auto p = ModelParameters::reference();
    const double mean = WeightFunction::lognormal(1.72, 4.64e4).mean();
    CHECK(rescale(p, 100, mean) == doctest::Approx(mean / 2.2).epsilon(1e-12));
    CHECK(rescale(p, 100, 2.036e5) == doctest::Approx(9.25e4).epsilon(1e-3));
    CHECK(rescale(p, 100, 2.2) == doctest::Approx(1.0).epsilon(1e-12));
    auto zero = p;
    zero.alpha0 = 0.0;
    CHECK_THROWS_AS(rescale(zero, 100, 1.0), DomainError);
}

TEST_CASE("objective vanishes at the generating point of an exact income image") {
    const auto p = ModelParameters::reference();
    const auto wealth = WeightFunction::lognormal(1.72, 4.64e4);
    const double scale = rescale(p, 100, wealth.mean());
    const auto grid = percentile_grid(0.05, 0.95, 0.05);
    const auto problem = problem_for(wealth, income_image(p, wealth, scale, grid));
    CHECK(estimation_objective(problem, p, scale) < 1e-10);

    const auto result = estimate_parameters(problem);
    CHECK(result.residual <= 1e-10);
    CHECK(result.params.denominator() > 0.0);
    CHECK(result.income_slope == doctest::Approx(0.05).epsilon(1e-3));
    CHECK(result.income_intercept == doctest::Approx(0.004 * scale).epsilon(1e-2));
    CHECK(result.implied_total_wealth == doctest::Approx(constant_sum(result.params, 100)));
    CHECK(result.starts.size() == 8);
    CHECK(result.curvature_diagonal.size() == 4);
}

TEST_CASE("objective is infinite outside the admissible region") {
    const auto wealth = WeightFunction::gamma(2.0, 1.0);
    const auto grid = percentile_grid(0.1, 0.9, 0.1);
    const auto problem = problem_for(wealth, income_image(ModelParameters::reference(), wealth, 1.0, grid));
    auto bad = ModelParameters::reference();
    bad.alpha2 = 0.06;
    CHECK(std::isinf(estimation_objective(problem, bad, 1.0)));
    CHECK(std::isinf(estimation_objective(problem, ModelParameters::reference(), -1.0)));
}

TEST_CASE("estimation is deterministic in the multistart seed") {
    const auto p = ModelParameters::reference();
    const auto wealth = WeightFunction::gamma(1.46, 1.55e4);
    const auto grid = percentile_grid(0.1, 0.9, 0.1);
    auto table = income_image(p, wealth, rescale(p, 100, wealth.mean()), grid);
    for (std::size_t i = 0; i < table.rows.size(); ++i) table.rows[i].threshold *= 1.0 + 0.01 * std::cos(2.0 * i);
    auto problem = problem_for(wealth, table);
    problem.execution = Execution::Serial;
    const auto serial = estimate_parameters(problem);
    problem.execution = Execution::Parallel;
    const auto parallel = estimate_parameters(problem);
    CHECK(serial.residual == parallel.residual);
    CHECK(serial.params.alpha1 == parallel.params.alpha1);
    CHECK(serial.scale == parallel.scale);
}

TEST_CASE("doubling income and wealth doubles the scale and keeps the propensities") {
    const auto p = ModelParameters::reference();
    const auto wealth = WeightFunction::lognormal(1.2, 3e4);
    const auto grid = percentile_grid(0.1, 0.9, 0.1);
    auto table = income_image(p, wealth, rescale(p, 100, wealth.mean()), grid);
    for (std::size_t i = 0; i < table.rows.size(); ++i) table.rows[i].threshold *= 1.0 + 0.02 * std::sin(3.0 * i);
    const auto base = estimate_parameters(problem_for(wealth, table));

    auto doubled_table = table;
    for (auto& r : doubled_table.rows) r.threshold *= 2.0;
    const auto doubled = estimate_parameters(problem_for(wealth.rescaled(2.0), doubled_table));
    CHECK(doubled.income_intercept == doctest::Approx(2.0 * base.income_intercept).epsilon(1e-6));
    CHECK(doubled.income_slope == doctest::Approx(base.income_slope).epsilon(1e-6));
    // scale is pinned only through scale * alpha0, so it carries the optimizer's slack along that valley.
    CHECK(doubled.scale == doctest::Approx(2.0 * base.scale).epsilon(1e-3));
    CHECK(doubled.params.alpha1 == doctest::Approx(base.params.alpha1).epsilon(1e-4));
    CHECK(doubled.params.alpha2 == doctest::Approx(base.params.alpha2).epsilon(1e-4));
    CHECK(doubled.residual == doctest::Approx(base.residual).epsilon(1e-4).scale(1e-12));
}

TEST_CASE("estimation report JSON") {
    const auto p = ModelParameters::reference();
    const auto wealth = WeightFunction::gamma(2.0, 1.0);
    const auto grid = percentile_grid(0.1, 0.9, 0.1);
    auto problem = problem_for(wealth, income_image(p, wealth, rescale(p, 100, wealth.mean()), grid));
    problem.starts = 2;
    std::ostringstream out;
    write_estimation_json(out, estimate_parameters(problem));
    const auto text = out.str();
    for (const char* key : {"\"params\"", "\"scale\"", "\"residual\"", "\"starts\"", "\"flat"})
        CHECK(text.find(key) != std::string::npos);
}
