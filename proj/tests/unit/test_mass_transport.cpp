#include <cmath>
#include <sstream>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "doctest.h"

#include "sfcmc/errors.hpp"
#include "sfcmc/mass_transport.hpp"
#include "sfcmc/sampler.hpp"

using namespace sfcmc;

namespace {

// Independent moments of the tilted law via double-exponential quadrature.
struct Moments {
    double z = 0.0;
    double first = 0.0;
};

Moments tilted_by_quadrature(const WeightFunction& f, double mu) {
    auto w = [&](double m) { return std::exp(f.log_pdf(m) - mu * m); };
    auto mw = [&](double m) { return m * std::exp(f.log_pdf(m) - mu * m); };
    const double lo = f.support_lower();
    const double mid = std::max(lo * 2.0, f.quantile(0.5));
    boost::math::quadrature::tanh_sinh<double> ts;
    boost::math::quadrature::exp_sinh<double> es;
    if (std::isfinite(f.support_upper()))
        return {ts.integrate(w, lo, f.support_upper(), 1e-13), ts.integrate(mw, lo, f.support_upper(), 1e-13)};
    return {ts.integrate(w, lo, mid, 1e-13) + es.integrate(w, mid, INFINITY, 1e-13),
            ts.integrate(mw, lo, mid, 1e-13) + es.integrate(mw, mid, INFINITY, 1e-13)};
}

std::vector<WeightFunction> families() {
    return {WeightFunction::gamma(1.0, 1.0),         WeightFunction::gamma(1.46, 1.55e4),
            WeightFunction::gamma(0.6, 3.0),         WeightFunction::lognormal(1.72, 4.64e4),
            WeightFunction::lognormal(0.5, 2.0),     WeightFunction::power_law(2.5, 1.0),
            WeightFunction::power_law(3.5, 10.0),    WeightFunction::power_law(1.5, 1.0, 1e3),
            WeightFunction::uniform(5.0)};
}

SampleChain chain_of(std::size_t dim, std::vector<double> rows) {
    SampleChain c;
    c.dimension = dim;
    c.samples = std::move(rows);
    for (std::size_t i = 0; i < dim; ++i) c.total += c.samples[i];
    return c;
}

}  // namespace

TEST_CASE("exponential weight: closed-form chemical potential and tilt") {
    const auto e = WeightFunction::gamma(1.0, 1.0);
    CHECK(solve_chemical_potential(e, 0.5) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(tilted_mean(e, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
    const auto p = marginal(e, 1.0);
    for (double m : {0.0, 0.1, 0.7, 2.0, 9.0}) CHECK(p.pdf(m) == doctest::Approx(2.0 * std::exp(-2.0 * m)).epsilon(1e-10));
    CHECK(p.cdf(1.0) == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-10));
}

TEST_CASE("zero chemical potential at the mean and an unchanged marginal") {
    for (const auto& f : families()) {
        INFO(f.family_name());
        CHECK(solve_chemical_potential(f, f.mean()) == 0.0);
        const auto p = marginal(f, 0.0);
        const double x = f.quantile(0.3);
        CHECK(p.pdf(x) == doctest::Approx(f.pdf(x)).epsilon(1e-10));
    }
}

TEST_CASE("tilted Gamma is Gamma with a sharper scale") {
    const double a = 1.46, theta = 1.55e4;
    const auto f = WeightFunction::gamma(a, theta);
    const double mu = solve_chemical_potential(f, 0.5 * f.mean());
    const double theta_prime = 1.0 / (1.0 / theta + mu);
    CHECK(a * theta_prime == doctest::Approx(0.5 * f.mean()).epsilon(1e-8));
    const boost::math::gamma_distribution<double> oracle(a, theta_prime);
    const auto p = marginal(f, mu);
    for (double q : {0.01, 0.2, 0.5, 0.9, 0.999}) {
        const double m = boost::math::quantile(oracle, q);
        CHECK(p.pdf(m) == doctest::Approx(boost::math::pdf(oracle, m)).epsilon(1e-8));
        CHECK(p.cdf(m) == doctest::Approx(q).epsilon(1e-8));
    }
    const auto quad = tilted_by_quadrature(f, mu);
    CHECK(tilted_moments(f, mu).log_z == doctest::Approx(std::log(quad.z)).epsilon(1e-9));
}

TEST_CASE("tilted moments agree with independent quadrature") {
    for (const auto& f : families()) {
        const double s = f.mean();
        for (double mu_scaled : {0.05, 0.5, 3.0}) {
            const double mu = mu_scaled / s;
            INFO(f.family_name() << " mu=" << mu);
            const auto quad = tilted_by_quadrature(f, mu);
            const auto tm = tilted_moments(f, mu);
            CHECK(tm.log_z == doctest::Approx(std::log(quad.z)).epsilon(1e-8).scale(1.0));
            CHECK(tm.mean == doctest::Approx(quad.first / quad.z).epsilon(1e-8));
        }
    }
}

TEST_CASE("condensed densities have no chemical potential") {
    const auto f = WeightFunction::power_law(2.5, 1.0);
    CHECK_THROWS_AS(solve_chemical_potential(f, 2.0 * f.mean()), NoSolutionError);
    CHECK_THROWS_AS(solve_chemical_potential(WeightFunction::lognormal(1.0, 1.0), 10.0), NoSolutionError);
    CHECK_FALSE(tilt_integrable(f, -0.1));
    CHECK_THROWS_AS(tilted_moments(f, -0.1), DomainError);
}

TEST_CASE("light tails reach high densities through a negative chemical potential") {
    const auto g = WeightFunction::gamma(2.0, 3.0);
    const double mu = solve_chemical_potential(g, 4.0 * g.mean());
    CHECK(mu < 0.0);
    CHECK(mu > -1.0 / 3.0);
    CHECK(2.0 / (1.0 / 3.0 + mu) == doctest::Approx(4.0 * g.mean()).epsilon(1e-8));

    const auto u = WeightFunction::uniform(2.0);
    const double mu_u = solve_chemical_potential(u, 1.6);
    CHECK(mu_u < 0.0);
    CHECK(tilted_mean(u, mu_u) == doctest::Approx(1.6).epsilon(1e-8));
    CHECK_THROWS_AS(solve_chemical_potential(u, 2.5), NoSolutionError);
    CHECK_THROWS_AS(solve_chemical_potential(WeightFunction::power_law(2.5, 1.0), 0.5), NoSolutionError);
}

TEST_CASE("tilted mean strictly decreases in mu") {
    for (const auto& f : families()) {
        INFO(f.family_name());
        const double s = f.mean();
        double previous = INFINITY;
        for (int i = 0; i <= 40; ++i) {
            const double mu = std::pow(10.0, -3.0 + 0.1 * i) / s;
            const double m = tilted_mean(f, mu);
            CHECK(m < previous);
            previous = m;
        }
    }
}

TEST_CASE("the solved marginal has the requested mean") {
    for (const auto& f : families()) {
        for (double fraction : {0.05, 0.3, 0.9, 0.999}) {
            const double rho = fraction * f.mean();
            if (rho <= f.support_lower()) continue;
            INFO(f.family_name() << " rho=" << rho);
            const double mu = solve_chemical_potential(f, rho);
            CHECK(mu > 0.0);
            const auto quad = tilted_by_quadrature(f, mu);
            CHECK(quad.first / quad.z == doctest::Approx(rho).epsilon(1e-6));
            CHECK(marginal(f, mu).mean() == doctest::Approx(rho).epsilon(1e-8));
        }
    }
}

TEST_CASE("phase classification") {
    const auto g = WeightFunction::gamma(1.46, 1.55e4);
    CHECK(classify_phase(g, g.mean()) == Phase::Critical);
    CHECK(classify_phase(g, g.mean() * (1.0 + 0.5e-6)) == Phase::Critical);
    CHECK(classify_phase(g, 0.5 * g.mean()) == Phase::Fluid);
    CHECK(classify_phase(g, 3.0 * g.mean()) == Phase::Fluid);

    const auto pl = WeightFunction::power_law(2.5, 1.0);
    CHECK(classify_phase(pl, 1.5 * pl.mean()) == Phase::Condensed);
    CHECK(classify_phase(pl, 0.5 * pl.mean()) == Phase::Fluid);
    for (double rho : {0.1, 1.0, 1e6}) CHECK(classify_phase(WeightFunction::power_law(1.5, 1.0), rho) ==
                                              Phase::NoTransitionPseudocondensate);

    const auto report = phase_report(pl, 1.5 * pl.mean());
    CHECK_FALSE(report.mu.has_value());
    std::ostringstream json;
    write_phase_report_json(json, report);
    CHECK(json.str().find("\"condensed\"") != std::string::npos);
    CHECK(phase_report(g, 0.5 * g.mean()).mu.has_value());
}

TEST_CASE("phase is unchanged when weight scale and density scale together") {
    for (const auto& f : families())
        for (double fraction : {0.3, 1.0, 1.0 + 1e-7, 2.0})
            for (double c : {1e-3, 0.5, 7.0, 1e5}) {
                INFO(f.family_name() << " fraction=" << fraction << " c=" << c);
                const double rho = fraction * f.mean();
                CHECK(classify_phase(f.rescaled(c), c * rho) == classify_phase(f, rho));
            }
}

TEST_CASE("brute-force partition function of exponentials is Erlang") {
    const auto oracle = partition_function_bruteforce(WeightFunction::gamma(1.0, 1.0), 3.0, 3);
    CHECK(oracle.partition == doctest::Approx(9.0 * std::exp(-3.0) / 2.0).epsilon(1e-5));
    CHECK(oracle.partition == doctest::Approx(0.2240).epsilon(2e-4));
    CHECK(oracle.normalization == doctest::Approx(1.0).epsilon(1e-4));
    // Conditional marginal of one of three exponentials given sum 3 is 2(3 - m)/9.
    for (std::size_t j = 0; j < oracle.grid.size(); j += 512)
        CHECK(oracle.marginal[j] == doctest::Approx(2.0 * (3.0 - oracle.grid[j]) / 9.0).epsilon(1e-5).scale(1.0));
}

TEST_CASE("single-site oracle degenerates to f(M)") {
    const auto f = WeightFunction::gamma(1.46, 2.0);
    const auto oracle = partition_function_bruteforce(f, 3.0, 1);
    CHECK(oracle.partition == doctest::Approx(f.pdf(3.0)).epsilon(1e-14));
    CHECK(oracle.marginal.empty());
}

TEST_CASE("canonical Gamma marginal is a scaled Beta") {
    const double a = 1.46;
    const auto f = WeightFunction::gamma(a, 1.55e4);
    for (std::size_t L : {2u, 4u, 6u, 8u}) {
        const double total = static_cast<double>(L) * f.mean();
        const auto oracle = partition_function_bruteforce(f, total, L);
        const boost::math::beta_distribution<double> beta(a, (static_cast<double>(L) - 1.0) * a);
        double worst = 0.0;
        for (std::size_t j = 1; j + 1 < oracle.grid.size(); ++j) {
            const double expected = boost::math::pdf(beta, oracle.grid[j] / total) / total;
            worst = std::max(worst, std::abs(oracle.marginal[j] - expected) * total);
        }
        INFO("L=" << L);
        CHECK(worst < 2e-2);
    }
}

TEST_CASE("grand-canonical marginal approaches the canonical one as sites grow") {
    const auto f = WeightFunction::gamma(1.46, 1.55e4);
    const auto p = marginal(f, 0.0);
    double previous = INFINITY;
    for (std::size_t L : {4u, 6u, 8u}) {
        const double d = l1_distance(partition_function_bruteforce(f, static_cast<double>(L) * f.mean(), L), p);
        CHECK(d < previous);
        CHECK(d > 0.0);
        previous = d;
    }
}

TEST_CASE("oracle rejects bad inputs") {
    const auto f = WeightFunction::gamma(1.46, 1.0);
    CHECK_THROWS(partition_function_bruteforce(f, 3.0, 9));
    CHECK_THROWS(partition_function_bruteforce(f, 3.0, 3, 100));
    CHECK_THROWS_AS(partition_function_bruteforce(WeightFunction::gamma(0.5, 1.0), 3.0, 3), ResolutionError);
}

TEST_CASE("oracle is identical under serial and parallel execution") {
    const auto f = WeightFunction::lognormal(0.8, 2.0);
    const auto s = partition_function_bruteforce(f, 10.0, 5, 2048, Execution::Serial);
    const auto p = partition_function_bruteforce(f, 10.0, 5, 2048, Execution::Parallel);
    CHECK(s.partition == p.partition);
    CHECK(s.marginal == p.marginal);
}

TEST_CASE("condensate statistic on trivial chains") {
    const auto equal = condensate_statistic(chain_of(4, {1, 1, 1, 1, 2, 2, 2, 2}));
    CHECK(equal.mean == doctest::Approx(0.25));
    CHECK(equal.p99 == doctest::Approx(0.25));
    const auto concentrated = condensate_statistic(chain_of(3, {5, 0, 0}));
    CHECK(concentrated.series == std::vector<double>{1.0});
    CHECK(concentrated.p99 == 1.0);
}

TEST_CASE("marginal CSV has two columns") {
    std::ostringstream out;
    write_marginal_csv(out, marginal(WeightFunction::gamma(1.0, 1.0), 1.0), 0.0, 1.0, 3);
    const auto text = out.str();
    CHECK(text.rfind("m,density", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}
