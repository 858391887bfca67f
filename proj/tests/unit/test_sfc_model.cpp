#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"

#include "../support/reference_rref.hpp"
#include "sfcmc/errors.hpp"
#include "sfcmc/sfc_model.hpp"

using namespace sfcmc;

namespace {

std::vector<double> random_feasible_wealth(std::size_t nw, double total, std::mt19937_64& rng) {
    std::exponential_distribution<double> e;
    std::vector<double> m(nw);
    double s = 0.0;
    for (auto& v : m) s += (v = e(rng));
    for (auto& v : m) v *= total / s;
    return m;
}

}  // namespace

TEST_CASE("constant sum matches k N alpha0 / D for the reference parameters") {
    const auto p = ModelParameters::reference();
    const double d = (1.0 - 0.75) * (1.0 - 0.1 * 5.5) - 5.5 * 0.02;
    CHECK(d == doctest::Approx(0.0025).epsilon(1e-12));
    CHECK(constant_sum(p, 100) == doctest::Approx(5.5 * 100 * 0.001 / d).epsilon(1e-12));
    CHECK(std::abs(constant_sum(p, 100) - 220.0) <= 1e-9 * 220.0);
    CHECK(aggregate_output(p, 100) == doctest::Approx(40.0).epsilon(1e-12));
    CHECK(constant_sum(p, 2) == doctest::Approx(4.4).epsilon(1e-12));
}

TEST_CASE("heterogeneous autonomous consumption sums into the constant") {
    auto p = ModelParameters::reference();
    p.alpha0_per_household = {0.001, 0.002, 0.0005};
    CHECK(constant_sum(p, 3) == doctest::Approx(5.5 * 0.0035 / p.denominator()).epsilon(1e-12));
    CHECK_THROWS_AS(constant_sum(p, 4), ParameterDomainError);
}

TEST_CASE("zero autonomous consumption gives the zero state") {
    auto p = ModelParameters::reference();
    p.alpha0 = 0.0;
    CHECK(constant_sum(p, 10) == 0.0);
    const auto reduced = reduce(build_steady_state_system(p, 10));
    CHECK(reduced.constant_sum_row.rhs == 0.0);
}

TEST_CASE("non-positive D is a parameter domain error") {
    auto p = ModelParameters::reference();
    p.alpha2 = 0.05;  // D = 0.1125 - 0.275 < 0
    CHECK_THROWS_AS(constant_sum(p, 10), ParameterDomainError);
    CHECK_THROWS_AS(build_steady_state_system(p, 10), ParameterDomainError);
}

TEST_CASE("two-household reduction matches the symbolic echelon form") {
    const auto p = ModelParameters::reference();
    const auto reduced = reduce(build_steady_state_system(p, 2));
    const auto expected = testing::reference_rref_nw2(p);
    REQUIRE(reduced.rref.rows() == 14);
    REQUIRE(reduced.rref.cols() == 14);
    double worst = 0.0;
    for (std::size_t r = 0; r < 14; ++r)
        for (std::size_t c = 0; c < 14; ++c) worst = std::max(worst, std::abs(reduced.rref(r, c) - expected[r][c]));
    CHECK(worst < 1e-10);
    CHECK(reduced.rref(11, 13) == doctest::Approx(4.4).epsilon(1e-12));
    CHECK(reduced.rank() == 12);
    CHECK(reduced.free_columns == std::vector<std::size_t>{12});
}

TEST_CASE("symbolic echelon form holds away from the reference point") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        ModelParameters p;
        p.alpha0 = 0.0005 + 0.01 * u(rng);
        p.alpha1 = 0.4 + 0.5 * u(rng);
        p.delta = 0.02 + 0.1 * u(rng);
        p.k = 1.0 + 4.0 * u(rng);
        p.r = 0.05 * u(rng);
        const double cap = (1.0 - p.alpha1) * (1.0 - p.delta * p.k) / p.k;
        p.alpha2 = cap * (0.05 + 0.9 * u(rng));
        if (!(p.delta * p.k < 1.0)) continue;
        const auto reduced = reduce(build_steady_state_system(p, 2));
        const auto expected = testing::reference_rref_nw2(p);
        for (std::size_t r = 0; r < 14; ++r)
            for (std::size_t c = 0; c < 14; ++c)
                CHECK(reduced.rref(r, c) ==
                      doctest::Approx(expected[r][c]).epsilon(1e-8).scale(std::max(1.0, std::abs(expected[r][c]))));
    }
}

TEST_CASE("floating-point and exact rational reductions agree") {
    const auto p = ModelParameters::reference();
    for (std::size_t nw : {2u, 3u, 5u}) {
        const auto system = build_steady_state_system(p, nw);
        const auto fp = reduce(system);
        const auto exact = reduce_exact(system);
        REQUIRE(exact.rows() == fp.rref.rows());
        for (std::size_t r = 0; r < exact.rows(); ++r)
            for (std::size_t c = 0; c < exact.cols(); ++c)
                CHECK(std::abs(fp.rref(r, c) - exact(r, c)) <= 1e-10 * std::max(1.0, std::abs(exact(r, c))));
    }
}

TEST_CASE("rank and free variables scale with the number of households") {
    const auto p = ModelParameters::reference();
    for (std::size_t nw : {2u, 3u, 10u, 40u}) {
        const auto reduced = reduce(build_steady_state_system(p, nw));
        CHECK(reduced.unknowns() == 7 + 3 * nw);
        CHECK(reduced.rank() == reduced.unknowns() - (nw - 1));
        CHECK(reduced.solution_dimension() == nw - 1);
        const ColumnLayout col{nw};
        for (std::size_t i = 0; i + 1 < nw; ++i) CHECK(reduced.free_columns[i] == col.deposits(i + 1));
        for (double c : reduced.constant_sum_row.coefficients) CHECK(c == doctest::Approx(1.0));
        CHECK(reduced.constant_sum_row.rhs == doctest::Approx(constant_sum(p, nw)).epsilon(1e-10));
    }
}

TEST_CASE("wealth-income map for the reference parameters") {
    const auto map = wealth_income_map(ModelParameters::reference());
    CHECK(map.intercept == doctest::Approx(0.004).epsilon(1e-12));
    CHECK(map.slope == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(wealth_to_income(ModelParameters::reference(), 2.2) == doctest::Approx(0.004 + 0.05 * 2.2));
}

TEST_CASE("recovered states close every accounting identity") {
    const auto p = ModelParameters::reference();
    std::mt19937_64 rng(2024);
    for (std::size_t nw : {2u, 10u, 100u}) {
        const auto reduced = reduce(build_steady_state_system(p, nw));
        const double total = constant_sum(p, nw);
        const auto map = wealth_income_map(p);
        const ColumnLayout col{nw};
        for (int trial = 0; trial < 30; ++trial) {
            const auto m = random_feasible_wealth(nw, total, rng);
            const auto state = recover_all_variables(reduced, m, p);
            const auto report = verify_balance(state, p);
            CHECK(report.passed);
            CHECK(std::abs(report.worst().residual) < 1e-9);
            for (std::size_t i = 0; i < nw; ++i) {
                CHECK(state.values[col.deposits(i)] == doctest::Approx(m[i]).epsilon(1e-10));
                CHECK(state.values[col.wage_income(i)] ==
                      doctest::Approx(map.intercept + map.slope * m[i]).epsilon(1e-9));
            }
            CHECK(state.values[col.capital()] == doctest::Approx(total).epsilon(1e-10));
        }
    }
}

TEST_CASE("infeasible wealth vectors are refused") {
    const auto p = ModelParameters::reference();
    const auto reduced = reduce(build_steady_state_system(p, 3));
    const double s = constant_sum(p, 3);
    CHECK_THROWS_AS(recover_all_variables(reduced, std::vector<double>{s, 0.1, 0.0}, p), InfeasibleWealthError);
    CHECK_THROWS_AS(recover_all_variables(reduced, std::vector<double>{s + 0.1, -0.1, 0.0}, p), InfeasibleWealthError);
    CHECK_THROWS_AS(recover_all_variables(reduced, std::vector<double>{s}, p), InfeasibleWealthError);
    CHECK_NOTHROW(recover_all_variables(reduced, std::vector<double>{s, 0.0, 0.0}, p));
}

TEST_CASE("parameter files round trip and reject unknown keys") {
    auto p = ModelParameters::reference();
    p.gamma_adj = 0.25;
    std::stringstream io;
    write_parameter_file(io, p, 100);
    const auto back = read_parameter_file(io);
    CHECK(back.params.alpha0 == p.alpha0);
    CHECK(back.params.alpha1 == p.alpha1);
    CHECK(back.params.alpha2 == p.alpha2);
    CHECK(back.params.r == p.r);
    CHECK(back.params.delta == p.delta);
    CHECK(back.params.k == p.k);
    CHECK(back.params.gamma_adj == p.gamma_adj);
    CHECK(back.nw == 100u);

    std::istringstream bad("alpha0 = 0.001\nalpha1 = 0.75\nalpha2 = 0.02\nr = 0.03\ndelta = 0.1\nk = 5.5\nbeta = 3\n");
    CHECK_THROWS_AS(read_parameter_file(bad), ParameterDomainError);
}

TEST_CASE("state CSV lists every variable by name") {
    const auto p = ModelParameters::reference();
    const auto reduced = reduce(build_steady_state_system(p, 2));
    const auto state = recover_all_variables(reduced, std::vector<double>{2.2, 2.2}, p);
    std::ostringstream out;
    write_state_csv(out, state);
    const auto text = out.str();
    CHECK(text.find("Cs_total") != std::string::npos);
    CHECK(text.find("M_2") != std::string::npos);
    CHECK(text.find("WBs_1") != std::string::npos);
}
