#pragma once

// Steady state of the partially aggregated banks-money-wages economy:
// one firm, one bank and nw households. The accounting identities reduce to
// a single constant-sum constraint on household deposits.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfcmc/linalg.hpp"

namespace sfcmc {

struct ModelParameters {
    double alpha0 = 0.0;     // autonomous consumption per household and period
    double alpha1 = 0.0;     // propensity to consume out of disposable income
    double alpha2 = 0.0;     // propensity to consume out of wealth
    double r = 0.0;          // interest rate on deposits and loans
    double delta = 0.0;      // depreciation rate
    double k = 0.0;          // capital-to-output target ratio
    double gamma_adj = 0.0;  // investment adjustment speed; multiplies a term that vanishes in steady state
    // Optional heterogeneous autonomous consumption, one entry per household.
    std::vector<double> alpha0_per_household;

    // D = (1 - alpha1)(1 - delta k) - k alpha2.
    double denominator() const noexcept { return (1.0 - alpha1) * (1.0 - delta * k) - k * alpha2; }

    double alpha0_of(std::size_t household) const {
        return alpha0_per_household.empty() ? alpha0 : alpha0_per_household.at(household);
    }

    // Sum of alpha0_i over nw households.
    double alpha0_total(std::size_t nw) const;

    // Throws ParameterDomainError when a rate is out of range or D <= 0.
    void validate() const;
    // Also checks the per-household vector length against nw.
    void validate(std::size_t nw) const;

    static ModelParameters reference();  // alpha0=0.001, alpha1=0.75, alpha2=0.02, r=0.03, delta=0.1, k=5.5
};

enum class VariableKind { ConsumptionSupply, Capital, Loans, InvestmentSupply, InvestmentDemand, Amortization, InvestmentTarget, ConsumptionDemand, WageIncome, Deposits };

struct VariableLabel {
    VariableKind kind;
    std::size_t household = 0;  // meaningful for ConsumptionDemand, WageIncome, Deposits

    bool per_household() const noexcept {
        return kind == VariableKind::ConsumptionDemand || kind == VariableKind::WageIncome || kind == VariableKind::Deposits;
    }
    // e.g. "Cs_total", "K", "Cd_3", "M_12" (households are numbered from 1)
    std::string name() const;
};

// Canonical column layout: [Cs_total, K, L, Is, Id, AF, Id_target, Cd_1..Cd_nw, WBs_1..WBs_nw, M_1..M_nw].
struct ColumnLayout {
    std::size_t nw = 0;

    static constexpr std::size_t aggregate_count = 7;
    std::size_t unknowns() const noexcept { return aggregate_count + 3 * nw; }
    std::size_t consumption_supply() const noexcept { return 0; }
    std::size_t capital() const noexcept { return 1; }
    std::size_t loans() const noexcept { return 2; }
    std::size_t investment_supply() const noexcept { return 3; }
    std::size_t investment_demand() const noexcept { return 4; }
    std::size_t amortization() const noexcept { return 5; }
    std::size_t investment_target() const noexcept { return 6; }
    std::size_t consumption_demand(std::size_t i) const noexcept { return aggregate_count + i; }
    std::size_t wage_income(std::size_t i) const noexcept { return aggregate_count + nw + i; }
    std::size_t deposits(std::size_t i) const noexcept { return aggregate_count + 2 * nw + i; }

    std::vector<VariableLabel> labels() const;
};

struct SteadyStateSystem {
    DenseMatrix<double> matrix;  // rows x unknowns
    std::vector<double> rhs;
    std::vector<VariableLabel> labels;
    std::size_t nw = 0;

    ColumnLayout layout() const noexcept { return ColumnLayout{nw}; }
    // Coefficients with the right-hand side appended as the last column.
    DenseMatrix<double> augmented() const;
};

struct ConstantSumRow {
    std::vector<double> coefficients;  // one per M_i
    double rhs = 0.0;
};

struct ReducedSystem {
    DenseMatrix<double> rref;  // augmented: rows x (unknowns + 1)
    std::vector<std::size_t> pivot_columns;
    std::vector<std::size_t> free_columns;
    ConstantSumRow constant_sum_row;
    std::vector<VariableLabel> labels;
    std::size_t nw = 0;

    std::size_t rank() const noexcept { return pivot_columns.size(); }
    std::size_t unknowns() const noexcept { return labels.size(); }
    std::size_t solution_dimension() const noexcept { return free_columns.size(); }
};

struct EconomicState {
    std::vector<VariableLabel> labels;
    std::vector<double> values;
    std::size_t nw = 0;

    ColumnLayout layout() const noexcept { return ColumnLayout{nw}; }
    double total_deposits() const;
};

struct BalanceCheck {
    std::string identity;
    double residual = 0.0;
};

struct BalanceReport {
    std::vector<BalanceCheck> checks;
    double tolerance = 0.0;
    bool passed = false;

    const BalanceCheck& worst() const;
};

SteadyStateSystem build_steady_state_system(const ModelParameters& params, std::size_t nw);

// Double-precision reduction with partial pivoting; rank tolerance is
// 1e-10 times the largest coefficient magnitude.
ReducedSystem reduce(const SteadyStateSystem& system);

// Exact rational reduction of the same system, returned as doubles. Used to
// validate the floating-point path at small nw.
DenseMatrix<double> reduce_exact(const SteadyStateSystem& system);

double constant_sum(const ModelParameters& params, std::size_t nw);
double aggregate_output(const ModelParameters& params, std::size_t nw);

// Affine wealth-to-income relation of one household: WBs = intercept + slope * M.
struct IncomeMap {
    double intercept = 0.0;
    double slope = 0.0;
};
IncomeMap wealth_income_map(const ModelParameters& params, std::size_t household = 0);
double wealth_to_income(const ModelParameters& params, double wealth, std::size_t household = 0);

EconomicState recover_all_variables(const ReducedSystem& reduced, std::span<const double> wealth,
                                    const ModelParameters& params);

BalanceReport verify_balance(const EconomicState& state, const ModelParameters& params);

// Flat key-value parameter files (alpha0, alpha1, alpha2, r, delta, k, gamma_adj, nw).
struct ParameterFile {
    ModelParameters params;
    std::optional<std::size_t> nw;
};
ParameterFile read_parameter_file(std::istream& in);
ParameterFile read_parameter_file(const std::string& path);
void write_parameter_file(std::ostream& out, const ModelParameters& params, std::optional<std::size_t> nw = {});

void write_state_csv(std::ostream& out, const EconomicState& state);

}  // namespace sfcmc
