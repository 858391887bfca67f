#include "sfcmc/sfc_model.hpp"

#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "sfcmc/errors.hpp"
#include "sfcmc/keyvalue.hpp"

namespace sfcmc {

double ModelParameters::alpha0_total(std::size_t nw) const {
    if (alpha0_per_household.empty()) return static_cast<double>(nw) * alpha0;
    double total = 0.0;
    for (std::size_t i = 0; i < nw; ++i) total += alpha0_per_household.at(i);
    return total;
}

void ModelParameters::validate() const {
    auto fail = [](const std::string& msg) { throw ParameterDomainError(msg); };
    const double values[] = {alpha0, alpha1, alpha2, r, delta, k, gamma_adj};
    for (double v : values)
        if (!std::isfinite(v)) fail("parameters must be finite");
    if (!(alpha1 > 0.0 && alpha1 < 1.0)) fail("alpha1 must lie in (0, 1)");
    if (!(alpha2 >= 0.0 && alpha2 < 1.0)) fail("alpha2 must lie in [0, 1)");
    if (!(delta > 0.0 && delta < 1.0)) fail("delta must lie in (0, 1)");
    if (!(k > 0.0)) fail("k must be positive");
    if (!(delta * k < 1.0)) fail("delta * k must be below 1");
    if (!(r >= 0.0)) fail("r must be nonnegative");
    if (!(alpha0 >= 0.0)) fail("alpha0 must be nonnegative");
    for (double a : alpha0_per_household)
        if (!(std::isfinite(a) && a >= 0.0)) fail("per-household alpha0 must be finite and nonnegative");
    if (!(denominator() > 0.0))
        fail("D = (1 - alpha1)(1 - delta k) - k alpha2 must be positive, got " + format_double(denominator()));
}

void ModelParameters::validate(std::size_t nw) const {
    if (nw == 0) throw ParameterDomainError("nw must be at least 1");
    validate();
    if (!alpha0_per_household.empty() && alpha0_per_household.size() != nw)
        throw ParameterDomainError("alpha0_per_household has " + std::to_string(alpha0_per_household.size()) +
                                   " entries, expected nw = " + std::to_string(nw));
}

ModelParameters ModelParameters::reference() {
    ModelParameters p;
    p.alpha0 = 0.001;
    p.alpha1 = 0.75;
    p.alpha2 = 0.02;
    p.r = 0.03;
    p.delta = 0.1;
    p.k = 5.5;
    return p;
}

std::string VariableLabel::name() const {
    switch (kind) {
        case VariableKind::ConsumptionSupply: return "Cs_total";
        case VariableKind::Capital: return "K";
        case VariableKind::Loans: return "L";
        case VariableKind::InvestmentSupply: return "Is";
        case VariableKind::InvestmentDemand: return "Id";
        case VariableKind::Amortization: return "AF";
        case VariableKind::InvestmentTarget: return "Id_target";
        case VariableKind::ConsumptionDemand: return "Cd_" + std::to_string(household + 1);
        case VariableKind::WageIncome: return "WBs_" + std::to_string(household + 1);
        case VariableKind::Deposits: return "M_" + std::to_string(household + 1);
    }
    return "?";
}

std::vector<VariableLabel> ColumnLayout::labels() const {
    std::vector<VariableLabel> out = {
        {VariableKind::ConsumptionSupply}, {VariableKind::Capital},          {VariableKind::Loans},
        {VariableKind::InvestmentSupply},  {VariableKind::InvestmentDemand}, {VariableKind::Amortization},
        {VariableKind::InvestmentTarget},
    };
    for (auto kind : {VariableKind::ConsumptionDemand, VariableKind::WageIncome, VariableKind::Deposits})
        for (std::size_t i = 0; i < nw; ++i) out.push_back({kind, i});
    return out;
}

DenseMatrix<double> SteadyStateSystem::augmented() const {
    DenseMatrix<double> a(matrix.rows(), matrix.cols() + 1);
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        for (std::size_t c = 0; c < matrix.cols(); ++c) a(r, c) = matrix(r, c);
        a(r, matrix.cols()) = rhs[r];
    }
    return a;
}

SteadyStateSystem build_steady_state_system(const ModelParameters& params, std::size_t nw) {
    params.validate(nw);
    const ColumnLayout col{nw};
    const std::size_t rows = 10 + 2 * nw;
    SteadyStateSystem sys;
    sys.nw = nw;
    sys.labels = col.labels();
    sys.matrix = DenseMatrix<double>(rows, col.unknowns());
    sys.rhs.assign(rows, 0.0);
    auto& a = sys.matrix;
    std::size_t row = 0;

    // Consumption market: Cs = sum Cd_i.
    a(row, col.consumption_supply()) = 1.0;
    for (std::size_t i = 0; i < nw; ++i) a(row, col.consumption_demand(i)) = -1.0;
    ++row;
    // Investment market: Is = Id.
    a(row, col.investment_supply()) = 1.0;
    a(row, col.investment_demand()) = -1.0;
    ++row;
    // Firm current account: Cs + Is = sum WBs_i + AF + r L.
    a(row, col.consumption_supply()) = -1.0;
    a(row, col.loans()) = params.r;
    a(row, col.investment_supply()) = -1.0;
    a(row, col.amortization()) = 1.0;
    for (std::size_t i = 0; i < nw; ++i) a(row, col.wage_income(i)) = 1.0;
    ++row;
    // Amortization: AF = delta K.
    a(row, col.capital()) = -params.delta;
    a(row, col.amortization()) = 1.0;
    ++row;
    // Steady-state investment: Id = AF.
    a(row, col.investment_demand()) = 1.0;
    a(row, col.amortization()) = -1.0;
    ++row;
    // Household budgets with zero deposit change: Cd_i = WBs_i + r M_i.
    for (std::size_t i = 0; i < nw; ++i, ++row) {
        a(row, col.consumption_demand(i)) = -1.0;
        a(row, col.wage_income(i)) = 1.0;
        a(row, col.deposits(i)) = params.r;
    }
    // Consumption functions: Cd_i = alpha0_i + alpha1 (WBs_i + r M_i) + alpha2 M_i.
    for (std::size_t i = 0; i < nw; ++i, ++row) {
        a(row, col.consumption_demand(i)) = -1.0;
        a(row, col.wage_income(i)) = params.alpha1;
        a(row, col.deposits(i)) = params.r * params.alpha1 + params.alpha2;
        sys.rhs[row] = -params.alpha0_of(i);
    }
    // Investment rule in steady state: Id = Id_target = delta K.
    a(row, col.investment_demand()) = 1.0;
    a(row, col.investment_target()) = -1.0;
    ++row;
    a(row, col.capital()) = -params.delta;
    a(row, col.investment_target()) = 1.0;
    ++row;
    // Capital target: K = k (Cs + Is).
    a(row, col.consumption_supply()) = -params.k;
    a(row, col.capital()) = 1.0;
    a(row, col.investment_supply()) = -params.k;
    ++row;
    // Balance sheet: K = L = sum M_i.
    a(row, col.capital()) = 1.0;
    a(row, col.loans()) = -1.0;
    ++row;
    a(row, col.capital()) = 1.0;
    for (std::size_t i = 0; i < nw; ++i) a(row, col.deposits(i)) = -1.0;
    ++row;
    return sys;
}

namespace {

double max_abs_coefficient(const DenseMatrix<double>& m) {
    double best = 0.0;
    for (double v : m.data()) best = std::max(best, std::abs(v));
    return best;
}

}  // namespace

ReducedSystem reduce(const SteadyStateSystem& system) {
    const std::size_t n = system.matrix.cols();
    const ColumnLayout col = system.layout();
    ReducedSystem out;
    out.nw = system.nw;
    out.labels = system.labels;
    out.rref = system.augmented();
    const double tol = 1e-10 * max_abs_coefficient(system.matrix);
    out.pivot_columns = rref_in_place(out.rref, n, tol);

    const std::size_t rank = out.pivot_columns.size();
    const std::size_t expected = n - (system.nw - 1);
    if (rank != expected)
        throw ReductionAnomalyError("reduction anomaly: rank " + std::to_string(rank) + ", expected " +
                                        std::to_string(expected),
                                    rank);
    const double rhs_scale = std::max(1.0, max_abs_coefficient(out.rref));
    for (std::size_t r = rank; r < out.rref.rows(); ++r)
        if (std::abs(out.rref(r, n)) > 1e-9 * rhs_scale)
            throw ReductionAnomalyError("reduction anomaly: inconsistent row " + std::to_string(r), rank);

    std::vector<bool> is_pivot(n, false);
    for (auto c : out.pivot_columns) is_pivot[c] = true;
    for (std::size_t c = 0; c < n; ++c)
        if (!is_pivot[c]) out.free_columns.push_back(c);

    for (std::size_t i = 0; i < out.free_columns.size(); ++i)
        if (out.free_columns[i] != col.deposits(i + 1))
            throw ReductionAnomalyError("reduction anomaly: unexpected free column " + out.labels[out.free_columns[i]].name(),
                                        rank);

    auto it = std::find(out.pivot_columns.begin(), out.pivot_columns.end(), col.deposits(0));
    if (it == out.pivot_columns.end())
        throw ReductionAnomalyError("reduction anomaly: M_1 is not a pivot column", rank);
    const auto sum_row = static_cast<std::size_t>(it - out.pivot_columns.begin());
    out.constant_sum_row.coefficients.resize(system.nw);
    for (std::size_t i = 0; i < system.nw; ++i) out.constant_sum_row.coefficients[i] = out.rref(sum_row, col.deposits(i));
    out.constant_sum_row.rhs = out.rref(sum_row, n);
    return out;
}

DenseMatrix<double> reduce_exact(const SteadyStateSystem& system) {
    using Rational = boost::multiprecision::cpp_rational;
    const auto aug = system.augmented();
    DenseMatrix<Rational> exact(aug.rows(), aug.cols());
    for (std::size_t r = 0; r < aug.rows(); ++r)
        for (std::size_t c = 0; c < aug.cols(); ++c) exact(r, c) = Rational(aug(r, c));
    rref_in_place(exact, system.matrix.cols(), Rational(0));
    DenseMatrix<double> out(aug.rows(), aug.cols());
    for (std::size_t r = 0; r < aug.rows(); ++r)
        for (std::size_t c = 0; c < aug.cols(); ++c) out(r, c) = static_cast<double>(exact(r, c));
    return out;
}

double constant_sum(const ModelParameters& params, std::size_t nw) {
    params.validate(nw);
    return params.k * params.alpha0_total(nw) / params.denominator();
}

double aggregate_output(const ModelParameters& params, std::size_t nw) {
    params.validate(nw);
    return params.alpha0_total(nw) / params.denominator();
}

IncomeMap wealth_income_map(const ModelParameters& params, std::size_t household) {
    if (!(params.alpha1 < 1.0)) throw ParameterDomainError("alpha1 must be below 1 for the wealth-income map");
    const double denom = 1.0 - params.alpha1;
    return {params.alpha0_of(household) / denom, -(params.r * denom - params.alpha2) / denom};
}

double wealth_to_income(const ModelParameters& params, double wealth, std::size_t household) {
    const auto map = wealth_income_map(params, household);
    return map.intercept + map.slope * wealth;
}

double EconomicState::total_deposits() const {
    const auto col = layout();
    double s = 0.0;
    for (std::size_t i = 0; i < nw; ++i) s += values[col.deposits(i)];
    return s;
}

EconomicState recover_all_variables(const ReducedSystem& reduced, std::span<const double> wealth,
                                    const ModelParameters& params) {
    const std::size_t nw = reduced.nw;
    if (wealth.size() != nw)
        throw InfeasibleWealthError("expected " + std::to_string(nw) + " wealth values, got " +
                                    std::to_string(wealth.size()));
    double sum = 0.0;
    for (double m : wealth) {
        if (!(m >= 0.0)) throw InfeasibleWealthError("wealth values must be nonnegative");
        sum += m;
    }
    const double target = constant_sum(params, nw);
    if (std::abs(sum - target) > 1e-8 * std::abs(target))
        throw InfeasibleWealthError("sum of wealth " + format_double(sum) + " violates the constant-sum constraint " +
                                    format_double(target));

    const ColumnLayout col{nw};
    const std::size_t n = reduced.unknowns();
    EconomicState state;
    state.nw = nw;
    state.labels = reduced.labels;
    state.values.assign(n, 0.0);
    for (std::size_t i = 1; i < nw; ++i) state.values[col.deposits(i)] = wealth[i];
    for (std::size_t r = 0; r < reduced.pivot_columns.size(); ++r) {
        double v = reduced.rref(r, n);
        for (auto f : reduced.free_columns) v -= reduced.rref(r, f) * state.values[f];
        state.values[reduced.pivot_columns[r]] = v;
    }
    return state;
}

const BalanceCheck& BalanceReport::worst() const {
    return *std::max_element(checks.begin(), checks.end(), [](const BalanceCheck& a, const BalanceCheck& b) {
        return std::abs(a.residual) < std::abs(b.residual);
    });
}

BalanceReport verify_balance(const EconomicState& state, const ModelParameters& params) {
    const std::size_t nw = state.nw;
    const auto col = state.layout();
    const auto& x = state.values;
    auto at = [&](std::size_t c) { return x[c]; };
    const double cs = at(col.consumption_supply()), capital = at(col.capital()), loans = at(col.loans());
    const double is = at(col.investment_supply()), id = at(col.investment_demand()), af = at(col.amortization());
    const double id_target = at(col.investment_target());
    double sum_cd = 0.0, sum_wbs = 0.0, sum_m = 0.0;
    for (std::size_t i = 0; i < nw; ++i) {
        sum_cd += at(col.consumption_demand(i));
        sum_wbs += at(col.wage_income(i));
        sum_m += at(col.deposits(i));
    }

    BalanceReport report;
    auto add = [&](std::string name, double residual) { report.checks.push_back({std::move(name), residual}); };
    const auto hh = [](const char* what, std::size_t i) { return std::string(what) + "[" + std::to_string(i + 1) + "]"; };

    // Transaction matrix, rows (steady state: no change in loans or deposits).
    add("transactions.row.consumption", cs - sum_cd);
    add("transactions.row.investment", is - id);
    // Transaction matrix, columns.
    for (std::size_t i = 0; i < nw; ++i) {
        const double m = at(col.deposits(i));
        add(hh("transactions.column.household", i), -at(col.consumption_demand(i)) + at(col.wage_income(i)) + params.r * m);
    }
    add("transactions.column.firm_current", cs + is - sum_wbs - af - params.r * loans);
    add("transactions.column.firm_capital", af - id);
    add("transactions.column.bank_current", params.r * loans - params.r * sum_m);
    // Balance sheet.
    add("balance.column.firm", capital - loans);
    add("balance.column.bank", loans - sum_m);
    add("balance.column.total", capital - sum_m);
    // Behavioral equations.
    for (std::size_t i = 0; i < nw; ++i) {
        const double m = at(col.deposits(i));
        const double yd = at(col.wage_income(i)) + params.r * m;
        add(hh("behavior.consumption", i),
            at(col.consumption_demand(i)) - params.alpha0_of(i) - params.alpha1 * yd - params.alpha2 * m);
    }
    add("behavior.amortization", af - params.delta * capital);
    add("behavior.investment_target", id_target - params.delta * capital);
    add("behavior.investment", id - id_target);
    add("behavior.capital_target", capital - params.k * (cs + is));

    report.tolerance = 1e-9 * std::max(1.0, std::abs(sum_m));
    report.passed = std::all_of(report.checks.begin(), report.checks.end(),
                                [&](const BalanceCheck& c) { return std::abs(c.residual) < report.tolerance; });
    return report;
}

ParameterFile read_parameter_file(std::istream& in) {
    const auto kv = KeyValueFile::parse(in);
    static const char* known[] = {"alpha0", "alpha1", "alpha2", "r", "delta", "k", "gamma_adj", "nw", "alpha0_per_household"};
    for (const auto& [key, value] : kv.entries())
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known))
            throw ParameterDomainError("unknown parameter key '" + key + "'");
    ParameterFile out;
    out.params.alpha0 = kv.number("alpha0");
    out.params.alpha1 = kv.number("alpha1");
    out.params.alpha2 = kv.number("alpha2");
    out.params.r = kv.number("r");
    out.params.delta = kv.number("delta");
    out.params.k = kv.number("k");
    out.params.gamma_adj = kv.number_or("gamma_adj", 0.0);
    if (kv.has("alpha0_per_household")) {
        std::stringstream ss(kv.text("alpha0_per_household"));
        std::string item;
        while (std::getline(ss, item, ',')) out.params.alpha0_per_household.push_back(parse_double(item));
    }
    if (kv.has("nw")) {
        const double nw = kv.number("nw");
        if (!(nw >= 1.0) || nw != std::floor(nw)) throw ParameterDomainError("nw must be a positive integer");
        out.nw = static_cast<std::size_t>(nw);
    }
    out.params.validate();
    return out;
}

ParameterFile read_parameter_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParameterDomainError("cannot open parameter file '" + path + "'");
    return read_parameter_file(in);
}

void write_parameter_file(std::ostream& out, const ModelParameters& params, std::optional<std::size_t> nw) {
    out << "alpha0 = " << format_double(params.alpha0) << '\n'
        << "alpha1 = " << format_double(params.alpha1) << '\n'
        << "alpha2 = " << format_double(params.alpha2) << '\n'
        << "r = " << format_double(params.r) << '\n'
        << "delta = " << format_double(params.delta) << '\n'
        << "k = " << format_double(params.k) << '\n'
        << "gamma_adj = " << format_double(params.gamma_adj) << '\n';
    if (!params.alpha0_per_household.empty()) {
        out << "alpha0_per_household = ";
        for (std::size_t i = 0; i < params.alpha0_per_household.size(); ++i)
            out << (i ? "," : "") << format_double(params.alpha0_per_household[i]);
        out << '\n';
    }
    if (nw) out << "nw = " << *nw << '\n';
}

void write_state_csv(std::ostream& out, const EconomicState& state) {
    for (std::size_t c = 0; c < state.labels.size(); ++c) out << (c ? "," : "") << state.labels[c].name();
    out << '\n';
    for (std::size_t c = 0; c < state.values.size(); ++c) out << (c ? "," : "") << format_double(state.values[c]);
    out << '\n';
}

}  // namespace sfcmc
