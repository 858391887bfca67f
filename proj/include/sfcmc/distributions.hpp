#pragma once

// Single-site weight functions f(m): Gamma, log-normal, power law with a
// lower cutoff (optionally an upper one), and the constant weight used for
// uniform sampling on the simplex.

#include <iosfwd>
#include <optional>
#include <string>
#include <variant>

namespace sfcmc {

struct PercentileTable;

struct GammaWeight {
    double shape;  // a
    double scale;  // theta
    bool operator==(const GammaWeight&) const = default;
};

struct LogNormalWeight {
    double sigma;  // shape
    double scale;  // median, exp(mean of log m)
    bool operator==(const LogNormalWeight&) const = default;
};

struct PowerLawWeight {
    double exponent;  // gamma in m^{-gamma}
    double x_min;
    std::optional<double> x_max;
    bool operator==(const PowerLawWeight&) const = default;
};

// pdf = 1/upper on [0, upper].
struct UniformWeight {
    double upper;
    bool operator==(const UniformWeight&) const = default;
};

enum class TailClass {
    ExponentialOrFaster,
    SubexponentialHeavierThan_mMinus2,
    VeryBroad_gamma_1_2,
};

std::string to_string(TailClass tail);

class WeightFunction {
public:
    using Family = std::variant<GammaWeight, LogNormalWeight, PowerLawWeight, UniformWeight>;

    static WeightFunction gamma(double shape, double scale);
    static WeightFunction lognormal(double sigma, double scale);
    static WeightFunction power_law(double exponent, double x_min, std::optional<double> x_max = {});
    static WeightFunction uniform(double upper);

    const Family& family() const noexcept { return family_; }
    std::string family_name() const;

    double pdf(double m) const;
    double log_pdf(double m) const;
    double cdf(double m) const;
    double survival(double m) const;  // 1 - cdf, without cancellation in the tail
    double quantile(double p) const;  // p in (0, 1)

    bool has_finite_mean() const noexcept;
    double mean() const;  // throws InfiniteMeanError

    double support_lower() const noexcept;
    double support_upper() const noexcept;  // +inf when unbounded

    TailClass tail_class() const noexcept;

    // Same shape, every scale-like parameter multiplied by factor.
    WeightFunction rescaled(double factor) const;
    // Rescaled so that mean() == target.
    WeightFunction with_mean(double target) const;

    bool operator==(const WeightFunction&) const = default;

private:
    explicit WeightFunction(Family f) : family_(std::move(f)) {}
    Family family_;
};

inline TailClass tail_class(const WeightFunction& f) { return f.tail_class(); }

enum class FitFamily { Gamma, LogNormal, PowerLaw };
FitFamily parse_fit_family(const std::string& name);

struct FittedWeight {
    WeightFunction weight;
    double residual = 0.0;  // sum of squared cdf errors at the table thresholds
};

// Least-squares fit of cdf(q_i) = p_i, started from moment-style estimates.
FittedWeight fit_to_percentiles(const PercentileTable& table, FitFamily family);

// Key-value text: family name, parameters and (optionally) fit residual.
void write_weight(std::ostream& out, const WeightFunction& f, std::optional<double> residual = {});
FittedWeight read_weight(std::istream& in);
FittedWeight read_weight_file(const std::string& path);

}  // namespace sfcmc
