#pragma once

// Grand-canonical treatment of the constant-sum problem: the exponentially
// tilted single-site law p(m) = f(m) e^{-mu m} / Z, the chemical potential
// that matches a target density rho, phase classification, and a small-L
// brute-force canonical oracle built from repeated convolutions.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sfcmc/distributions.hpp"
#include "sfcmc/kernels.hpp"

namespace sfcmc {

struct SampleChain;

struct TiltedMoments {
    double log_z = 0.0;  // log of \int f(m) e^{-mu m} dm
    double mean = 0.0;   // tilted mean
};

// True when \int f(m) e^{-mu m} dm is finite.
bool tilt_integrable(const WeightFunction& f, double mu);

// Throws DomainError when the tilt is not integrable.
TiltedMoments tilted_moments(const WeightFunction& f, double mu);
inline double tilted_mean(const WeightFunction& f, double mu) { return tilted_moments(f, mu).mean; }

// Root of tilted_mean(f, mu) = rho. Returns exactly 0 when rho equals the mean.
double solve_chemical_potential(const WeightFunction& f, double rho);

class GrandCanonicalMarginal {
public:
    GrandCanonicalMarginal(WeightFunction f, double mu);

    double pdf(double m) const;
    double log_pdf(double m) const;
    double cdf(double m) const;
    double mu() const noexcept { return mu_; }
    double mean() const noexcept { return mean_; }
    const WeightFunction& weight() const noexcept { return f_; }

private:
    WeightFunction f_;
    double mu_;
    double log_z_ = 0.0;
    double mean_ = 0.0;
};

GrandCanonicalMarginal marginal(const WeightFunction& f, double mu);

enum class Phase { Fluid, Critical, Condensed, NoTransitionPseudocondensate };
std::string to_string(Phase phase);

inline constexpr double critical_tolerance = 1e-6;  // relative to rho

Phase classify_phase(const WeightFunction& f, double rho);

struct PhaseReport {
    Phase phase = Phase::Fluid;
    std::optional<double> mean_f;  // empty for infinite mean
    double rho = 0.0;
    std::optional<double> mu;      // present when a chemical potential exists
};

PhaseReport phase_report(const WeightFunction& f, double rho);
void write_phase_report_json(std::ostream& out, const PhaseReport& report);

struct CanonicalOracle {
    double total = 0.0;  // M
    std::size_t sites = 0;
    double spacing = 0.0;
    std::vector<double> grid;      // m_j = j * spacing, j = 0..n
    double partition = 0.0;        // Z(M, L)
    std::vector<double> marginal;  // f(m_j) Z(M - m_j, L - 1) / Z(M, L); empty for L = 1
    double normalization = 0.0;    // trapezoid integral of the marginal
};

// \int |p_oracle - p| over [0, inf): trapezoid rule on the oracle grid plus the
// mass of p beyond M, where the oracle vanishes.
double l1_distance(const CanonicalOracle& oracle, const GrandCanonicalMarginal& p);

// `grid_points` intervals on [0, M]; at least 256. Sites at most 8.
CanonicalOracle partition_function_bruteforce(const WeightFunction& f, double total, std::size_t sites,
                                              std::size_t grid_points = 4096, Execution exec = Execution::Parallel);

struct CondensateSummary {
    std::vector<double> series;  // max_i m_i / sum_i m_i per sample
    double mean = 0.0;
    double p99 = 0.0;
};

CondensateSummary condensate_statistic(const SampleChain& chain, Execution exec = Execution::Parallel);

// Two columns (m, density) on `points` equally spaced abscissae in [lower, upper].
void write_marginal_csv(std::ostream& out, const GrandCanonicalMarginal& p, double lower, double upper,
                        std::size_t points);

}  // namespace sfcmc
