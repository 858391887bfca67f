#include "sfcmc/mass_transport.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <type_traits>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>
#include "json.hpp"

#include "sfcmc/errors.hpp"
#include "sfcmc/keyvalue.hpp"
#include "sfcmc/sampler.hpp"
#include "sfcmc/stats.hpp"

namespace sfcmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNegligible = 50.0;  // e^-50 relative to the peak

// log \int_a^b exp(phi(u)) du for a smooth log-integrand phi. Infinite ends
// are truncated where phi drops kNegligible below its maximum; `width`
// sets the scan resolution.
double log_integral(const std::function<double(double)>& phi, double a, double b, double center, double width) {
    if (!(b > a)) return -kInf;
    const double step = std::clamp(width / 4.0, 1e-3, 0.5);
    double lo = std::isfinite(a) ? a : std::min(center, b) - 60.0;
    double hi = std::isfinite(b) ? b : std::max(center, a) + 60.0;
    const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / step));
    std::vector<double> u(n + 1), v(n + 1);
    double peak = -kInf;
    for (std::size_t i = 0; i <= n; ++i) {
        u[i] = std::min(hi, lo + static_cast<double>(i) * step);
        v[i] = phi(u[i]);
        if (std::isnan(v[i])) v[i] = -kInf;
        peak = std::max(peak, v[i]);
    }
    if (peak == -kInf) return -kInf;
    if (peak == kInf) throw DomainError("integral diverges: integrand is unbounded");

    std::size_t first = 0, last = n;
    while (first < n && v[first] < peak - kNegligible) ++first;
    while (last > 0 && v[last] < peak - kNegligible) --last;
    lo = first > 0 ? u[first - 1] : lo;
    hi = last < n ? u[last + 1] : hi;
    if (first == 0 && !std::isfinite(a))
        for (int k = 0; k < 4000 && phi(lo) > peak - kNegligible; ++k) lo -= 0.5;
    if (last == n && !std::isfinite(b))
        for (int k = 0; k < 4000 && phi(hi) > peak - kNegligible; ++k) hi += 0.5;

    auto g = [&](double x) {
        const double p = phi(x);
        return std::isfinite(p) ? std::exp(p - peak) : 0.0;
    };
    const double panel = std::max(step * 2.0, 0.05);
    const auto panels = static_cast<std::size_t>(std::ceil((hi - lo) / panel));
    double total = 0.0;
    for (std::size_t k = 0; k < panels; ++k) {
        const double x0 = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(panels);
        const double x1 = lo + (hi - lo) * static_cast<double>(k + 1) / static_cast<double>(panels);
        total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, x0, x1, 10, 1e-14);
    }
    if (!(total > 0.0)) return -kInf;
    return std::log(total) + peak;
}

double log_of(double x) { return x > 0.0 ? std::log(x) : -kInf; }

// Scan centre and resolution hint in log-money for the tilted integrand.
std::pair<double, double> scan_hint(const WeightFunction& f, double mu) {
    double center = std::log(f.quantile(0.5));
    if (mu > 0.0) center = std::min(center, std::log(1.0 / mu));
    double width = 1.0;
    if (const auto* ln = std::get_if<LogNormalWeight>(&f.family())) width = std::min(1.0, ln->sigma);
    if (const auto* g = std::get_if<GammaWeight>(&f.family())) width = std::min(1.0, 1.0 / std::sqrt(g->shape));
    return {center, width};
}

TiltedMoments moments_by_quadrature(const WeightFunction& f, double mu) {
    const double a = log_of(f.support_lower());
    const double b = std::isfinite(f.support_upper()) ? std::log(f.support_upper()) : kInf;
    const auto [center, width] = scan_hint(f, mu);
    auto phi0 = [&](double u) {
        const double m = std::exp(u);
        return f.log_pdf(m) - mu * m + u;
    };
    auto phi1 = [&](double u) { return phi0(u) + u; };
    const double l0 = log_integral(phi0, a, b, center, width);
    const double l1 = log_integral(phi1, a, b, center, width);
    if (!std::isfinite(l0)) throw DomainError("tilted moments: normalizing integral is not finite");
    return {l0, std::exp(l1 - l0)};
}

// Uniform on [0, U] tilted by e^{-mu m}.
TiltedMoments uniform_moments(double upper, double mu) {
    const double x = mu * upper;
    if (std::abs(x) < 1e-6) {
        // Second-order expansions around x = 0.
        return {-x / 2.0 + x * x / 24.0, upper * (0.5 - x / 12.0)};
    }
    const double log_z = std::log(-std::expm1(-x) / x);
    const double mean = upper * (1.0 / x - 1.0 / std::expm1(x));
    return {log_z, mean};
}

}  // namespace

bool tilt_integrable(const WeightFunction& f, double mu) {
    if (!std::isfinite(mu)) return false;
    return std::visit(
        [&](const auto& w) -> bool {
            using T = std::decay_t<decltype(w)>;
            if constexpr (std::is_same_v<T, GammaWeight>)
                return mu * w.scale > -1.0;
            else if constexpr (std::is_same_v<T, LogNormalWeight>)
                return mu >= 0.0;
            else if constexpr (std::is_same_v<T, PowerLawWeight>)
                return w.x_max.has_value() || mu >= 0.0;
            else
                return true;
        },
        f.family());
}

TiltedMoments tilted_moments(const WeightFunction& f, double mu) {
    if (!tilt_integrable(f, mu))
        throw DomainError("exponential tilt with mu = " + format_double(mu) + " is not integrable for " +
                          f.family_name() + " weight");
    if (mu == 0.0) return {0.0, f.has_finite_mean() ? f.mean() : kInf};
    return std::visit(
        [&](const auto& w) -> TiltedMoments {
            using T = std::decay_t<decltype(w)>;
            if constexpr (std::is_same_v<T, GammaWeight>) {
                const double c = 1.0 + mu * w.scale;
                return {-w.shape * std::log(c), w.shape * w.scale / c};
            } else if constexpr (std::is_same_v<T, UniformWeight>) {
                return uniform_moments(w.upper, mu);
            } else {
                return moments_by_quadrature(f, mu);
            }
        },
        f.family());
}

double solve_chemical_potential(const WeightFunction& f, double rho) {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ParameterDomainError("chemical potential: rho must be positive");
    const bool finite_mean = f.has_finite_mean();
    const double m0 = finite_mean ? f.mean() : kInf;
    if (rho == m0) return 0.0;
    if (rho <= f.support_lower())
        throw NoSolutionError("no chemical potential: rho = " + format_double(rho) +
                              " is not above the lower end of the support");

    auto h = [&](double mu) { return tilted_mean(f, mu) - rho; };
    boost::math::tools::eps_tolerance<double> tol(50);
    double lo = 0.0, hi = 0.0;

    if (rho < m0) {
        hi = 1.0 / rho;
        if (h(hi) > 0.0) {
            lo = hi;
            for (int k = 0; k < 2000 && h(hi) > 0.0; ++k) {
                lo = hi;
                hi *= 2.0;
            }
        } else if (finite_mean) {
            lo = 0.0;
        } else {
            lo = hi / 2.0;
            for (int k = 0; k < 2000 && h(lo) <= 0.0; ++k) {
                hi = lo;
                lo /= 2.0;
            }
        }
    } else {
        if (f.tail_class() != TailClass::ExponentialOrFaster)
            throw NoSolutionError("no chemical potential: rho = " + format_double(rho) + " exceeds the mean " +
                                  format_double(m0) + " of a subexponential weight (condensed regime)");
        if (rho >= f.support_upper())
            throw NoSolutionError("no chemical potential: rho = " + format_double(rho) +
                                  " is not below the upper end of the support");
        hi = 0.0;
        if (const auto* g = std::get_if<GammaWeight>(&f.family())) {
            // Tilted mean a theta / (1 + mu theta) diverges as mu -> -1/theta.
            const double edge = -1.0 / g->scale;
            lo = edge / 2.0;
            for (int k = 0; k < 2000 && h(lo) < 0.0; ++k) {
                hi = lo;
                lo = edge + (lo - edge) / 2.0;
            }
        } else {
            lo = -1.0 / rho;
            for (int k = 0; k < 2000 && h(lo) < 0.0; ++k) {
                hi = lo;
                lo *= 2.0;
            }
        }
    }
    const double flo = h(lo), fhi = h(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if (!(flo > 0.0 && fhi < 0.0))
        throw NoSolutionError("no chemical potential: failed to bracket a root for rho = " + format_double(rho));
    std::uintmax_t iterations = 300;
    const auto [a, b] = boost::math::tools::toms748_solve(h, lo, hi, flo, fhi, tol, iterations);
    return 0.5 * (a + b);
}

GrandCanonicalMarginal::GrandCanonicalMarginal(WeightFunction f, double mu) : f_(std::move(f)), mu_(mu) {
    const auto tm = tilted_moments(f_, mu_);
    log_z_ = tm.log_z;
    mean_ = tm.mean;
}

double GrandCanonicalMarginal::pdf(double m) const {
    if (mu_ == 0.0) return f_.pdf(m);
    return std::exp(log_pdf(m));
}

double GrandCanonicalMarginal::log_pdf(double m) const {
    if (mu_ == 0.0) return f_.log_pdf(m);
    return f_.log_pdf(m) - mu_ * m - log_z_;
}

double GrandCanonicalMarginal::cdf(double m) const {
    if (mu_ == 0.0) return f_.cdf(m);
    if (m <= f_.support_lower()) return 0.0;
    if (m >= f_.support_upper()) return 1.0;
    if (const auto* g = std::get_if<GammaWeight>(&f_.family()))
        return boost::math::gamma_p(g->shape, m * (1.0 + mu_ * g->scale) / g->scale);
    if (const auto* u = std::get_if<UniformWeight>(&f_.family()))
        return std::expm1(-mu_ * m) / std::expm1(-mu_ * u->upper);
    const double a = log_of(f_.support_lower());
    const auto [center, width] = scan_hint(f_, mu_);
    auto phi = [&](double u) {
        const double x = std::exp(u);
        return log_pdf(x) + u;
    };
    return std::min(1.0, std::exp(log_integral(phi, a, std::log(m), center, width)));
}

GrandCanonicalMarginal marginal(const WeightFunction& f, double mu) { return GrandCanonicalMarginal(f, mu); }

std::string to_string(Phase phase) {
    switch (phase) {
        case Phase::Fluid: return "fluid";
        case Phase::Critical: return "critical";
        case Phase::Condensed: return "condensed";
        case Phase::NoTransitionPseudocondensate: return "no_transition_pseudocondensate";
    }
    return "unknown";
}

Phase classify_phase(const WeightFunction& f, double rho) {
    const TailClass tail = f.tail_class();
    if (tail == TailClass::VeryBroad_gamma_1_2) return Phase::NoTransitionPseudocondensate;
    if (!f.has_finite_mean()) return Phase::Fluid;
    const double m = f.mean();
    if (std::abs(m - rho) <= critical_tolerance * rho) return Phase::Critical;
    if (m > rho) return Phase::Fluid;
    return tail == TailClass::ExponentialOrFaster ? Phase::Fluid : Phase::Condensed;
}

PhaseReport phase_report(const WeightFunction& f, double rho) {
    PhaseReport r;
    r.phase = classify_phase(f, rho);
    r.rho = rho;
    if (f.has_finite_mean()) r.mean_f = f.mean();
    try {
        r.mu = solve_chemical_potential(f, rho);
    } catch (const NoSolutionError&) {
    }
    return r;
}

void write_phase_report_json(std::ostream& out, const PhaseReport& report) {
    nlohmann::ordered_json j;
    j["phase"] = to_string(report.phase);
    j["mean_f"] = report.mean_f ? nlohmann::ordered_json(*report.mean_f) : nlohmann::ordered_json(nullptr);
    j["rho"] = report.rho;
    if (report.mu) j["mu"] = *report.mu;
    out << j.dump(2) << '\n';
}

namespace {

// Z_L on the grid by L - 1 trapezoid convolutions of f with itself.
std::vector<double> convolution_power(const std::vector<double>& f, double h, std::size_t power, Execution exec) {
    std::vector<double> z = f, next(f.size());
    for (std::size_t k = 1; k < power; ++k) {
        kernels::trapezoid_convolution(z, f, h, next, exec);
        z.swap(next);
    }
    return z;
}

std::vector<double> sample_pdf(const WeightFunction& f, double h, std::size_t n, std::size_t stride) {
    std::vector<double> v(n / stride + 1);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = f.pdf(static_cast<double>(j * stride) * h);
    return v;
}

}  // namespace

CanonicalOracle partition_function_bruteforce(const WeightFunction& f, double total, std::size_t sites,
                                              std::size_t grid_points, Execution exec) {
    if (sites == 0 || sites > 8) throw ParameterDomainError("partition oracle: sites must be in [1, 8]");
    if (grid_points < 256) throw ParameterDomainError("partition oracle: at least 256 grid intervals required");
    if (!(total > 0.0)) throw ParameterDomainError("partition oracle: total must be positive");
    if (grid_points % 2) ++grid_points;

    CanonicalOracle o;
    o.total = total;
    o.sites = sites;
    o.spacing = total / static_cast<double>(grid_points);
    o.grid.resize(grid_points + 1);
    for (std::size_t j = 0; j <= grid_points; ++j) o.grid[j] = static_cast<double>(j) * o.spacing;
    if (sites == 1) {
        o.partition = f.pdf(total);
        o.normalization = 1.0;
        return o;
    }

    const auto fv = sample_pdf(f, o.spacing, grid_points, 1);
    if (!std::isfinite(fv.front()))
        throw ResolutionError("partition oracle: weight is singular at m = 0; the trapezoid grid cannot resolve it");

    const auto z_minus = convolution_power(fv, o.spacing, sites - 1, exec);
    std::vector<double> z(fv.size());
    kernels::trapezoid_convolution(z_minus, fv, o.spacing, z, exec);
    o.partition = z.back();

    const auto coarse = sample_pdf(f, o.spacing, grid_points, 2);
    const auto zc = convolution_power(coarse, 2.0 * o.spacing, sites, exec);
    if (!(o.partition > 0.0) || std::abs(zc.back() - o.partition) > 0.01 * o.partition)
        throw ResolutionError("partition oracle: grid too coarse (Z changes by more than 1% on halving the resolution)");

    o.marginal.resize(fv.size());
    for (std::size_t j = 0; j <= grid_points; ++j) o.marginal[j] = fv[j] * z_minus[grid_points - j] / o.partition;
    double norm = 0.0;
    for (std::size_t j = 0; j <= grid_points; ++j)
        norm += ((j == 0 || j == grid_points) ? 0.5 : 1.0) * o.marginal[j];
    o.normalization = norm * o.spacing;
    if (std::abs(o.normalization - 1.0) > 0.01)
        throw ResolutionError("partition oracle: marginal normalization off by more than 1%");
    return o;
}

double l1_distance(const CanonicalOracle& oracle, const GrandCanonicalMarginal& p) {
    if (oracle.marginal.empty()) return 2.0;
    const std::size_t n = oracle.grid.size();
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double q = p.pdf(oracle.grid[j]);
        if (!std::isfinite(q)) q = 0.0;
        sum += ((j == 0 || j + 1 == n) ? 0.5 : 1.0) * std::abs(oracle.marginal[j] - q);
    }
    return sum * oracle.spacing + (1.0 - p.cdf(oracle.total));
}

CondensateSummary condensate_statistic(const SampleChain& chain, Execution exec) {
    if (chain.size() == 0) throw ParameterDomainError("condensate statistic: empty chain");
    CondensateSummary s;
    s.series.resize(chain.size());
    if (exec == Execution::Parallel)
        kernels::max_share_parallel(chain.samples, chain.dimension, s.series);
    else
        kernels::max_share_serial(chain.samples, chain.dimension, s.series);
    s.mean = stats::mean(s.series);
    std::vector<double> tmp = s.series;
    s.p99 = stats::percentile(tmp, 0.99);
    return s;
}

void write_marginal_csv(std::ostream& out, const GrandCanonicalMarginal& p, double lower, double upper,
                        std::size_t points) {
    out << "m,density\n";
    for (std::size_t i = 0; i < points; ++i) {
        const double m =
            points > 1 ? lower + (upper - lower) * static_cast<double>(i) / static_cast<double>(points - 1) : lower;
        out << format_double(m) << ',' << format_double(p.pdf(m)) << '\n';
    }
}

}  // namespace sfcmc
