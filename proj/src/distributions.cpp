#include "sfcmc/distributions.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>

#include "sfcmc/errors.hpp"
#include "sfcmc/ingest.hpp"
#include "sfcmc/keyvalue.hpp"
#include "sfcmc/optimize.hpp"

namespace sfcmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// H(x, t) = (exp(x t) - 1) / x, continuous at x = 0.
double expm1_ratio(double x, double t) {
    if (std::abs(x) < 1e-12) return t;
    return std::expm1(x * t) / x;
}

double standard_normal_quantile(double p) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p); }

void require(bool ok, const std::string& what) {
    if (!ok) throw ParameterDomainError(what);
}

}  // namespace

std::string to_string(TailClass tail) {
    switch (tail) {
        case TailClass::ExponentialOrFaster: return "exponential_or_faster";
        case TailClass::SubexponentialHeavierThan_mMinus2: return "subexponential";
        case TailClass::VeryBroad_gamma_1_2: return "very_broad";
    }
    return "?";
}

WeightFunction WeightFunction::gamma(double shape, double scale) {
    require(std::isfinite(shape) && shape > 0.0, "gamma shape must be positive");
    require(std::isfinite(scale) && scale > 0.0, "gamma scale must be positive");
    return WeightFunction(GammaWeight{shape, scale});
}

WeightFunction WeightFunction::lognormal(double sigma, double scale) {
    require(std::isfinite(sigma) && sigma > 0.0, "lognormal sigma must be positive");
    require(std::isfinite(scale) && scale > 0.0, "lognormal scale must be positive");
    return WeightFunction(LogNormalWeight{sigma, scale});
}

WeightFunction WeightFunction::power_law(double exponent, double x_min, std::optional<double> x_max) {
    require(std::isfinite(exponent), "power-law exponent must be finite");
    require(std::isfinite(x_min) && x_min > 0.0, "power-law x_min must be positive");
    if (x_max) {
        require(std::isfinite(*x_max) && *x_max > x_min, "power-law x_max must exceed x_min");
    } else {
        require(exponent > 1.0, "power law without upper cutoff needs exponent > 1");
    }
    return WeightFunction(PowerLawWeight{exponent, x_min, x_max});
}

WeightFunction WeightFunction::uniform(double upper) {
    require(std::isfinite(upper) && upper > 0.0, "uniform upper bound must be positive");
    return WeightFunction(UniformWeight{upper});
}

std::string WeightFunction::family_name() const {
    return std::visit(Overloaded{[](const GammaWeight&) { return std::string("gamma"); },
                                 [](const LogNormalWeight&) { return std::string("lognormal"); },
                                 [](const PowerLawWeight&) { return std::string("power_law"); },
                                 [](const UniformWeight&) { return std::string("uniform"); }},
                      family_);
}

double WeightFunction::log_pdf(double m) const {
    return std::visit(
        Overloaded{
            [m](const GammaWeight& g) {
                if (m < 0.0) return -kInf;
                if (m == 0.0) {
                    if (g.shape < 1.0) return kInf;
                    if (g.shape > 1.0) return -kInf;
                    return -std::log(g.scale);
                }
                return (g.shape - 1.0) * std::log(m) - m / g.scale - std::lgamma(g.shape) - g.shape * std::log(g.scale);
            },
            [m](const LogNormalWeight& l) {
                if (m <= 0.0) return -kInf;
                const double z = (std::log(m) - std::log(l.scale)) / l.sigma;
                return -std::log(m) - std::log(l.sigma) - 0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * z * z;
            },
            [m](const PowerLawWeight& p) {
                if (m < p.x_min || (p.x_max && m > *p.x_max)) return -kInf;
                const double a = 1.0 - p.exponent;
                // normalizer N = x_min^{1-gamma} H(1-gamma, log(x_max/x_min)); unbounded: x_min^{1-gamma}/(gamma-1)
                const double log_norm = a * std::log(p.x_min) +
                                        (p.x_max ? std::log(expm1_ratio(a, std::log(*p.x_max / p.x_min)))
                                                 : -std::log(p.exponent - 1.0));
                return -p.exponent * std::log(m) - log_norm;
            },
            [m](const UniformWeight& u) {
                if (m < 0.0 || m > u.upper) return -kInf;
                return -std::log(u.upper);
            },
        },
        family_);
}

double WeightFunction::pdf(double m) const {
    if (const auto* u = std::get_if<UniformWeight>(&family_)) return (m < 0.0 || m > u->upper) ? 0.0 : 1.0 / u->upper;
    return std::exp(log_pdf(m));
}

double WeightFunction::cdf(double m) const {
    return std::visit(Overloaded{
                          [m](const GammaWeight& g) { return m <= 0.0 ? 0.0 : boost::math::gamma_p(g.shape, m / g.scale); },
                          [m](const LogNormalWeight& l) {
                              if (m <= 0.0) return 0.0;
                              return 0.5 * std::erfc(-(std::log(m) - std::log(l.scale)) / (l.sigma * std::numbers::sqrt2));
                          },
                          [m](const PowerLawWeight& p) {
                              if (m <= p.x_min) return 0.0;
                              if (p.x_max && m >= *p.x_max) return 1.0;
                              const double a = 1.0 - p.exponent;
                              if (!p.x_max) return -std::expm1(a * std::log(m / p.x_min));
                              return expm1_ratio(a, std::log(m / p.x_min)) / expm1_ratio(a, std::log(*p.x_max / p.x_min));
                          },
                          [m](const UniformWeight& u) { return m <= 0.0 ? 0.0 : (m >= u.upper ? 1.0 : m / u.upper); },
                      },
                      family_);
}

double WeightFunction::survival(double m) const {
    return std::visit(Overloaded{
                          [m](const GammaWeight& g) { return m <= 0.0 ? 1.0 : boost::math::gamma_q(g.shape, m / g.scale); },
                          [m](const LogNormalWeight& l) {
                              if (m <= 0.0) return 1.0;
                              return 0.5 * std::erfc((std::log(m) - std::log(l.scale)) / (l.sigma * std::numbers::sqrt2));
                          },
                          [this, m](const PowerLawWeight& p) {
                              if (!p.x_max) return m <= p.x_min ? 1.0 : std::pow(m / p.x_min, 1.0 - p.exponent);
                              return 1.0 - cdf(m);
                          },
                          [this, m](const UniformWeight&) { return 1.0 - cdf(m); },
                      },
                      family_);
}

double WeightFunction::quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
    return std::visit(Overloaded{
                          [p](const GammaWeight& g) { return g.scale * boost::math::gamma_p_inv(g.shape, p); },
                          [p](const LogNormalWeight& l) { return l.scale * std::exp(l.sigma * standard_normal_quantile(p)); },
                          [p](const PowerLawWeight& w) {
                              const double a = 1.0 - w.exponent;
                              if (!w.x_max) return w.x_min * std::exp(std::log1p(-p) / a);
                              const double span = std::log(*w.x_max / w.x_min);
                              const double t = std::abs(a) < 1e-12 ? p * span : std::log1p(p * std::expm1(a * span)) / a;
                              return w.x_min * std::exp(t);
                          },
                          [p](const UniformWeight& u) { return p * u.upper; },
                      },
                      family_);
}

bool WeightFunction::has_finite_mean() const noexcept {
    if (const auto* p = std::get_if<PowerLawWeight>(&family_)) return p->x_max.has_value() || p->exponent > 2.0;
    return true;
}

double WeightFunction::mean() const {
    if (!has_finite_mean()) throw InfiniteMeanError("power law with exponent <= 2 and no upper cutoff has infinite mean");
    return std::visit(Overloaded{
                          [](const GammaWeight& g) { return g.shape * g.scale; },
                          [](const LogNormalWeight& l) { return l.scale * std::exp(0.5 * l.sigma * l.sigma); },
                          [](const PowerLawWeight& p) {
                              if (!p.x_max) return p.x_min * (p.exponent - 1.0) / (p.exponent - 2.0);
                              const double span = std::log(*p.x_max / p.x_min);
                              return p.x_min * expm1_ratio(2.0 - p.exponent, span) / expm1_ratio(1.0 - p.exponent, span);
                          },
                          [](const UniformWeight& u) { return 0.5 * u.upper; },
                      },
                      family_);
}

double WeightFunction::support_lower() const noexcept {
    if (const auto* p = std::get_if<PowerLawWeight>(&family_)) return p->x_min;
    return 0.0;
}

double WeightFunction::support_upper() const noexcept {
    if (const auto* p = std::get_if<PowerLawWeight>(&family_)) return p->x_max.value_or(kInf);
    if (const auto* u = std::get_if<UniformWeight>(&family_)) return u->upper;
    return kInf;
}

TailClass WeightFunction::tail_class() const noexcept {
    return std::visit(Overloaded{
                          [](const GammaWeight&) { return TailClass::ExponentialOrFaster; },
                          [](const LogNormalWeight&) { return TailClass::SubexponentialHeavierThan_mMinus2; },
                          [](const PowerLawWeight& p) {
                              if (p.x_max) return TailClass::ExponentialOrFaster;  // compact support
                              return p.exponent <= 2.0 ? TailClass::VeryBroad_gamma_1_2
                                                       : TailClass::SubexponentialHeavierThan_mMinus2;
                          },
                          [](const UniformWeight&) { return TailClass::ExponentialOrFaster; },
                      },
                      family_);
}

WeightFunction WeightFunction::rescaled(double factor) const {
    require(std::isfinite(factor) && factor > 0.0, "rescaling factor must be positive");
    return std::visit(Overloaded{
                          [&](const GammaWeight& g) { return gamma(g.shape, g.scale * factor); },
                          [&](const LogNormalWeight& l) { return lognormal(l.sigma, l.scale * factor); },
                          [&](const PowerLawWeight& p) {
                              std::optional<double> hi;
                              if (p.x_max) hi = *p.x_max * factor;
                              return power_law(p.exponent, p.x_min * factor, hi);
                          },
                          [&](const UniformWeight& u) { return uniform(u.upper * factor); },
                      },
                      family_);
}

WeightFunction WeightFunction::with_mean(double target) const {
    require(std::isfinite(target) && target > 0.0, "target mean must be positive");
    return rescaled(target / mean());
}

FitFamily parse_fit_family(const std::string& name) {
    if (name == "gamma") return FitFamily::Gamma;
    if (name == "lognormal") return FitFamily::LogNormal;
    if (name == "power_law" || name == "powerlaw" || name == "pareto") return FitFamily::PowerLaw;
    throw ParameterDomainError("unknown family '" + name + "' (expected gamma, lognormal or power_law)");
}

namespace {

// Ordinary least squares y = intercept + slope * x.
std::pair<double, double> least_squares_line(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double det = n * sxx - sx * sx;
    if (!(std::abs(det) > 0.0)) throw FitDegenerateError("percentile table is degenerate");
    const double slope = (n * sxy - sx * sy) / det;
    return {(sy - slope * sx) / n, slope};
}

}  // namespace

FittedWeight fit_to_percentiles(const PercentileTable& table, FitFamily family) {
    const auto& rows = table.rows;
    if (rows.size() < 3) throw FitDegenerateError("fit needs at least 3 percentile rows, got " + std::to_string(rows.size()));
    bool distinct = false;
    for (std::size_t i = 1; i < rows.size(); ++i) distinct = distinct || rows[i].threshold != rows[0].threshold;
    if (!distinct) throw FitDegenerateError("all thresholds are equal");
    std::vector<double> log_q, z;
    for (const auto& row : rows) {
        if (row.threshold > 0.0) {
            log_q.push_back(std::log(row.threshold));
            z.push_back(row.percentile);
        }
    }
    if (log_q.size() < 2 || log_q.front() == log_q.back())
        throw FitDegenerateError("fewer than two distinct positive thresholds");

    std::function<WeightFunction(std::span<const double>)> make;
    std::vector<double> start;
    switch (family) {
        case FitFamily::LogNormal: {
            std::vector<double> normal_scores;
            for (double p : z) normal_scores.push_back(standard_normal_quantile(p));
            auto [intercept, slope] = least_squares_line(normal_scores, log_q);
            if (!(slope > 0.0)) throw FitDegenerateError("thresholds do not increase with percentile");
            start = {std::log(slope), intercept};
            make = [](std::span<const double> x) { return WeightFunction::lognormal(std::exp(x[0]), std::exp(x[1])); };
            break;
        }
        case FitFamily::Gamma: {
            // Moments of the table read as a discrete distribution with midpoint masses.
            double mass = 0.0, m1 = 0.0, m2 = 0.0;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const double lo = i == 0 ? 0.0 : 0.5 * (rows[i - 1].percentile + rows[i].percentile);
                const double hi = i + 1 == rows.size() ? 1.0 : 0.5 * (rows[i].percentile + rows[i + 1].percentile);
                const double w = hi - lo;
                mass += w;
                m1 += w * rows[i].threshold;
                m2 += w * rows[i].threshold * rows[i].threshold;
            }
            const double mean = m1 / mass, var = m2 / mass - mean * mean;
            if (!(mean > 0.0 && var > 0.0)) throw FitDegenerateError("table moments are degenerate");
            start = {std::log(mean * mean / var), std::log(var / mean)};
            make = [](std::span<const double> x) { return WeightFunction::gamma(std::exp(x[0]), std::exp(x[1])); };
            break;
        }
        case FitFamily::PowerLaw: {
            std::vector<double> log_survival;
            for (double p : z) log_survival.push_back(std::log1p(-p));
            auto [intercept, slope] = least_squares_line(log_q, log_survival);
            const double exponent = 1.0 - slope;
            if (!(exponent > 1.0)) throw FitDegenerateError("survival does not decay like a power law");
            start = {std::log(exponent - 1.0), intercept / (exponent - 1.0)};
            make = [](std::span<const double> x) { return WeightFunction::power_law(1.0 + std::exp(x[0]), std::exp(x[1])); };
            break;
        }
    }

    auto objective = [&](std::span<const double> x) {
        for (double v : x)
            if (!std::isfinite(v) || std::abs(v) > 700.0) return kInf;
        const auto f = make(x);
        double sum = 0.0;
        for (const auto& row : rows) {
            const double e = f.cdf(row.threshold) - row.percentile;
            sum += e * e;
        }
        return sum;
    };
    NelderMeadOptions options;
    options.max_evaluations = 20000;
    const auto best = nelder_mead(objective, start, options);
    return {make(best.point), best.value};
}

void write_weight(std::ostream& out, const WeightFunction& f, std::optional<double> residual) {
    out << "family = " << f.family_name() << '\n';
    std::visit(Overloaded{
                   [&](const GammaWeight& g) {
                       out << "shape = " << format_double(g.shape) << "\nscale = " << format_double(g.scale) << '\n';
                   },
                   [&](const LogNormalWeight& l) {
                       out << "sigma = " << format_double(l.sigma) << "\nscale = " << format_double(l.scale) << '\n';
                   },
                   [&](const PowerLawWeight& p) {
                       out << "exponent = " << format_double(p.exponent) << "\nx_min = " << format_double(p.x_min) << '\n';
                       if (p.x_max) out << "x_max = " << format_double(*p.x_max) << '\n';
                   },
                   [&](const UniformWeight& u) { out << "upper = " << format_double(u.upper) << '\n'; },
               },
               f.family());
    if (residual) out << "residual = " << format_double(*residual) << '\n';
}

FittedWeight read_weight(std::istream& in) {
    const auto kv = KeyValueFile::parse(in);
    const auto& family = kv.text("family");
    const double residual = kv.number_or("residual", 0.0);
    if (family == "gamma") return {WeightFunction::gamma(kv.number("shape"), kv.number("scale")), residual};
    if (family == "lognormal") return {WeightFunction::lognormal(kv.number("sigma"), kv.number("scale")), residual};
    if (family == "power_law") {
        std::optional<double> hi;
        if (kv.has("x_max")) hi = kv.number("x_max");
        return {WeightFunction::power_law(kv.number("exponent"), kv.number("x_min"), hi), residual};
    }
    if (family == "uniform") return {WeightFunction::uniform(kv.number("upper")), residual};
    throw ParameterDomainError("unknown family '" + family + "'");
}

FittedWeight read_weight_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParameterDomainError("cannot open distribution file '" + path + "'");
    return read_weight(in);
}

}  // namespace sfcmc
