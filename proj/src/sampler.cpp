#include "sfcmc/sampler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <type_traits>

#include <boost/random/normal_distribution.hpp>

#include "sfcmc/errors.hpp"
#include "sfcmc/keyvalue.hpp"
#include "sfcmc/mass_transport.hpp"
#include "sfcmc/stats.hpp"

namespace sfcmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kDriftInterval = 1024;

// Unnormalized log weights; additive constants cancel in the acceptance ratio.
struct GammaLog {
    double a_minus_1, inv_scale;
    double operator()(double m) const {
        if (m < 0.0) return -kInf;
        if (m == 0.0) return a_minus_1 == 0.0 ? 0.0 : (a_minus_1 > 0.0 ? -kInf : kInf);
        return a_minus_1 * std::log(m) - m * inv_scale;
    }
};

struct LogNormalLog {
    double log_scale, inv_two_var;
    double operator()(double m) const {
        if (!(m > 0.0)) return -kInf;
        const double z = std::log(m);
        return -z - (z - log_scale) * (z - log_scale) * inv_two_var;
    }
};

struct PowerLawLog {
    double exponent, lower, upper;
    double operator()(double m) const {
        if (m < lower || m > upper) return -kInf;
        return -exponent * std::log(m);
    }
};

struct UniformLog {
    double upper;
    double operator()(double m) const { return (m < 0.0 || m > upper) ? -kInf : 0.0; }
};

template <class LogWeight>
class ChainRunner {
public:
    ChainRunner(LogWeight log_w, bool accept_all, const ConstraintSet& cs, const SamplerConfig& config)
        : log_w_(log_w), accept_all_(accept_all), cs_(cs), config_(config), rng_(config.seed) {}

    SampleChain run(SampleChain chain) {
        const std::size_t n = cs_.dimension;
        x_.assign(n, cs_.barycenter_value());
        lw_.resize(n);
        for (std::size_t i = 0; i < n; ++i) lw_[i] = log_w_(x_[i]);
        if (!std::isfinite(lw_[0]))
            throw InitializationError("hit_and_run: weight is zero or non-finite at the barycenter; no interior start");
        if (config_.scheme == DirectionScheme::Hypersphere) {
            y_.resize(n);
            lw_new_.resize(n);
            d_.resize(n);
        }

        const std::uint64_t burn = config_.resolved_burn_in(n);
        chain.samples.reserve(config_.emitted_samples(n) * n);
        for (std::uint64_t step = 1; step <= config_.chain_length; ++step) {
            if (config_.scheme == DirectionScheme::Hypersphere)
                step_hd(chain);
            else
                step_cd(chain);
            if (step % kDriftInterval == 0) correct_drift();
            if (step > burn && (step - burn) % config_.thinning == 0) {
                correct_drift();
                chain.samples.insert(chain.samples.end(), x_.begin(), x_.end());
            }
        }
        return chain;
    }

private:
    bool accept(double delta) {
        if (accept_all_) return true;
        if (delta >= 0.0) return true;
        return std::log(uniform_(rng_)) < delta;
    }

    void step_hd(SampleChain& chain) {
        direction_hd(d_, rng_);
        const Chord c = chord(x_, d_);
        if (c.degenerate()) {
            ++chain.degenerate_chords;
            return;
        }
        const double t = c.t_min + uniform_(rng_) * (c.t_max - c.t_min);
        double sum_old = 0.0, sum_new = 0.0;
        bool valid = true;
        for (std::size_t i = 0; i < x_.size(); ++i) {
            double v = x_[i] + t * d_[i];
            if (v < 0.0) v = 0.0;
            y_[i] = v;
            lw_new_[i] = log_w_(v);
            sum_new += lw_new_[i];
            sum_old += lw_[i];
        }
        if (std::isnan(sum_new) || sum_new == kInf) valid = false;
        ++chain.proposal_count;
        if (valid && accept(sum_new - sum_old)) {
            ++chain.acceptance_count;
            x_.swap(y_);
            lw_.swap(lw_new_);
        }
    }

    void step_cd(SampleChain& chain) {
        const PairDirection p = direction_cd(x_.size(), rng_);
        const double s = x_[p.i] + x_[p.j];
        if (!(s > 0.0)) {
            ++chain.degenerate_chords;
            return;
        }
        // A uniform point on the chord along (e_i - e_j)/sqrt(2) moves m_i uniformly over [0, s].
        const double yi = uniform_(rng_) * s;
        const double yj = s - yi;
        const double li = log_w_(yi), lj = log_w_(yj);
        ++chain.proposal_count;
        const double sum_new = li + lj;
        if (std::isnan(sum_new) || sum_new == kInf) return;
        if (accept(sum_new - (lw_[p.i] + lw_[p.j]))) {
            ++chain.acceptance_count;
            x_[p.i] = yi;
            x_[p.j] = yj;
            lw_[p.i] = li;
            lw_[p.j] = lj;
        }
    }

    // Rounding in the position update lets the sum wander; the residual is
    // folded into the largest coordinate, which keeps every m_i >= 0.
    void correct_drift() {
        double sum = 0.0;
        std::size_t largest = 0;
        for (std::size_t i = 0; i < x_.size(); ++i) {
            sum += x_[i];
            if (x_[i] > x_[largest]) largest = i;
        }
        const double err = cs_.total - sum;
        if (err == 0.0) return;
        x_[largest] = std::max(0.0, x_[largest] + err);
        lw_[largest] = log_w_(x_[largest]);
    }

    LogWeight log_w_;
    bool accept_all_;
    const ConstraintSet& cs_;
    const SamplerConfig& config_;
    Rng rng_;
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    std::vector<double> x_, y_, lw_, lw_new_, d_;
};

template <class LogWeight>
SampleChain run_with(LogWeight log_w, bool accept_all, const ConstraintSet& cs, const SamplerConfig& config,
                     SampleChain chain) {
    return ChainRunner<LogWeight>(log_w, accept_all, cs, config).run(std::move(chain));
}

}  // namespace

void ConstraintSet::validate() const {
    if (!(total > 0.0) || !std::isfinite(total)) throw ParameterDomainError("constraint set: total S must be positive");
    if (dimension < 2) throw ParameterDomainError("constraint set: dimension N must be at least 2");
}

std::string to_string(DirectionScheme scheme) {
    return scheme == DirectionScheme::Hypersphere ? "hd" : "cd";
}

DirectionScheme parse_direction_scheme(const std::string& name) {
    if (name == "hd" || name == "HD") return DirectionScheme::Hypersphere;
    if (name == "cd" || name == "CD") return DirectionScheme::Coordinate;
    throw ParameterDomainError("unknown direction scheme '" + name + "' (expected hd or cd)");
}

std::uint64_t SamplerConfig::emitted_samples(std::size_t dimension) const {
    const std::uint64_t burn = resolved_burn_in(dimension);
    if (thinning == 0 || chain_length <= burn) return 0;
    return (chain_length - burn) / thinning;
}

std::vector<double> SampleChain::coordinate(std::size_t c) const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = samples[i * dimension + c];
    return out;
}

void direction_hd(std::span<double> direction, Rng& rng) {
    boost::random::normal_distribution<double> normal;
    const auto n = direction.size();
    double norm2 = 0.0;
    do {
        double mean = 0.0;
        for (auto& v : direction) {
            v = normal(rng);
            mean += v;
        }
        mean /= static_cast<double>(n);
        norm2 = 0.0;
        for (auto& v : direction) {
            v -= mean;
            norm2 += v * v;
        }
    } while (!(norm2 > 0.0));
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& v : direction) v *= inv;
}

PairDirection direction_cd(std::size_t dimension, Rng& rng) {
    std::uniform_int_distribution<std::size_t> first(0, dimension - 1);
    std::uniform_int_distribution<std::size_t> second(0, dimension - 2);
    std::size_t i = first(rng);
    std::size_t j = second(rng);
    if (j >= i) ++j;
    if (j < i) std::swap(i, j);
    return {i, j};
}

void materialize(PairDirection pair, std::span<double> direction) {
    std::fill(direction.begin(), direction.end(), 0.0);
    direction[pair.i] = 1.0 / std::sqrt(2.0);
    direction[pair.j] = -1.0 / std::sqrt(2.0);
}

Chord chord(std::span<const double> point, std::span<const double> direction) {
    Chord c{-kInf, kInf};
    for (std::size_t i = 0; i < point.size(); ++i) {
        const double d = direction[i];
        if (d > 0.0)
            c.t_min = std::max(c.t_min, -point[i] / d);
        else if (d < 0.0)
            c.t_max = std::min(c.t_max, -point[i] / d);
    }
    return c;
}

double line_acceptance(double log_target_from, double log_target_to) {
    const double delta = log_target_to - log_target_from;
    if (std::isnan(delta)) return 0.0;
    return delta >= 0.0 ? 1.0 : std::exp(delta);
}

SampleChain hit_and_run(const WeightFunction& f, const ConstraintSet& constraints, const SamplerConfig& config) {
    constraints.validate();
    if (config.thinning == 0) throw ParameterDomainError("sampler: thinning must be at least 1");
    if (config.chain_length == 0) throw ParameterDomainError("sampler: chain length must be positive");

    SampleChain chain;
    chain.dimension = constraints.dimension;
    chain.total = constraints.total;
    chain.seed = config.seed;

    const double rho = constraints.barycenter_value();
    const Phase phase = classify_phase(f, rho);
    if (phase == Phase::Condensed)
        throw PhaseRefusalError("sampler: weight is in the condensed phase at rho = " + format_double(rho) +
                                " (mean of f is below rho and the tail is subexponential)");
    if (phase == Phase::Critical)
        chain.warnings.push_back("critical density: rho = " + format_double(rho) +
                                 " equals the mean of f; sampling algorithms can fail near criticality");

    return std::visit(
        [&](const auto& w) -> SampleChain {
            using T = std::decay_t<decltype(w)>;
            if constexpr (std::is_same_v<T, GammaWeight>)
                return run_with(GammaLog{w.shape - 1.0, 1.0 / w.scale}, false, constraints, config, std::move(chain));
            else if constexpr (std::is_same_v<T, LogNormalWeight>)
                return run_with(LogNormalLog{std::log(w.scale), 0.5 / (w.sigma * w.sigma)}, false, constraints, config,
                                std::move(chain));
            else if constexpr (std::is_same_v<T, PowerLawWeight>)
                return run_with(PowerLawLog{w.exponent, w.x_min, w.x_max.value_or(kInf)}, false, constraints, config,
                                std::move(chain));
            else
                return run_with(UniformLog{w.upper}, w.upper >= constraints.total, constraints, config,
                                std::move(chain));
        },
        f.family());
}

std::vector<SampleChain> run_chains(const WeightFunction& f, const ConstraintSet& constraints, const SamplerConfig& config,
                                    std::span<const std::uint64_t> seeds, Execution exec) {
    std::vector<SampleChain> chains(seeds.size());
    std::vector<std::exception_ptr> errors(seeds.size());
    const auto n = static_cast<long>(seeds.size());
    auto one = [&](long k) {
        const auto idx = static_cast<std::size_t>(k);
        try {
            SamplerConfig c = config;
            c.seed = seeds[idx];
            chains[idx] = hit_and_run(f, constraints, c);
        } catch (...) {
            errors[idx] = std::current_exception();
        }
    };
    if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (long k = 0; k < n; ++k) one(k);
    } else {
        for (long k = 0; k < n; ++k) one(k);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return chains;
}

SampleChain merge_chains(std::span<const SampleChain> chains) {
    SampleChain out;
    if (chains.empty()) return out;
    out.dimension = chains.front().dimension;
    out.total = chains.front().total;
    out.seed = chains.front().seed;
    for (const auto& c : chains) {
        if (c.dimension != out.dimension) throw std::invalid_argument("merge_chains: dimension mismatch");
        out.samples.insert(out.samples.end(), c.samples.begin(), c.samples.end());
        for (std::size_t i = 0; i < c.size(); ++i) out.row_seeds.push_back(c.seed_of_row(i));
        out.acceptance_count += c.acceptance_count;
        out.proposal_count += c.proposal_count;
        out.degenerate_chords += c.degenerate_chords;
        for (const auto& w : c.warnings)
            if (std::find(out.warnings.begin(), out.warnings.end(), w) == out.warnings.end()) out.warnings.push_back(w);
    }
    return out;
}

ChainDiagnostics diagnostics(const SampleChain& chain, const WeightFunction* weight) {
    ChainDiagnostics d;
    d.proposals = chain.proposal_count;
    d.acceptances = chain.acceptance_count;
    d.degenerate_chords = chain.degenerate_chords;
    d.samples = chain.size();
    d.rejection_rate = chain.proposal_count
                           ? 1.0 - static_cast<double>(chain.acceptance_count) / static_cast<double>(chain.proposal_count)
                           : 0.0;
    d.expected_coordinate_mean = chain.dimension ? chain.total / static_cast<double>(chain.dimension) : 0.0;
    if (chain.size() == 0) return d;

    constexpr std::size_t lags[] = {1, 2, 5, 10};
    std::vector<double> acf(std::size(lags), 0.0);
    d.coordinate_means.resize(chain.dimension);
    for (std::size_t c = 0; c < chain.dimension; ++c) {
        const auto series = chain.coordinate(c);
        d.coordinate_means[c] = stats::mean(series);
        const double se = std::sqrt(stats::variance(series) / static_cast<double>(series.size()));
        if (se > 0.0) d.max_mean_z = std::max(d.max_mean_z, std::abs(d.coordinate_means[c] - d.expected_coordinate_mean) / se);
        for (std::size_t k = 0; k < acf.size(); ++k) acf[k] += stats::autocorrelation(series, lags[k]);
    }
    for (std::size_t k = 0; k < acf.size(); ++k)
        d.autocorrelation.emplace_back(lags[k], acf[k] / static_cast<double>(chain.dimension));

    if (weight) {
        std::vector<double> pooled(chain.samples);
        d.ks_to_weight = stats::ks_statistic(pooled, [weight](double m) { return weight->cdf(m); });
    }
    return d;
}

SchemeComparison compare_schemes(const ChainDiagnostics& hypersphere, const ChainDiagnostics& coordinate) {
    if (!hypersphere.ks_to_weight || !coordinate.ks_to_weight)
        throw std::invalid_argument("compare_schemes: both diagnostics need a KS distance to the weight");
    SchemeComparison s;
    s.ks_hypersphere = *hypersphere.ks_to_weight;
    s.ks_coordinate = *coordinate.ks_to_weight;
    s.gap = s.ks_coordinate - s.ks_hypersphere;
    s.coordinate_worse = s.gap >= 0.0;
    return s;
}

void write_chain_csv(std::ostream& out, const SampleChain& chain) {
    out << "seed";
    for (std::size_t c = 0; c < chain.dimension; ++c) out << ",m_" << (c + 1);
    out << '\n';
    for (std::size_t i = 0; i < chain.size(); ++i) {
        out << chain.seed_of_row(i);
        for (double v : chain.row(i)) out << ',' << format_double(v);
        out << '\n';
    }
}

namespace {

template <class T>
void put_le(std::ostream& out, T value) {
    static_assert(std::is_unsigned_v<T>);
    unsigned char bytes[sizeof(T)];
    for (std::size_t b = 0; b < sizeof(T); ++b) bytes[b] = static_cast<unsigned char>(value >> (8 * b));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw std::runtime_error("read_chain_binary: truncated");
    T value = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) value |= static_cast<T>(bytes[b]) << (8 * b);
    return value;
}

}  // namespace

void write_chain_binary(std::ostream& out, const SampleChain& chain) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(chain.dimension));
    put_le<std::uint32_t>(out, 0);
    for (double v : chain.samples) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

SampleChain read_chain_binary(std::istream& in) {
    SampleChain chain;
    chain.dimension = get_le<std::uint32_t>(in);
    get_le<std::uint32_t>(in);
    if (chain.dimension == 0) throw std::runtime_error("read_chain_binary: zero dimension");
    unsigned char bytes[8];
    while (in.read(reinterpret_cast<char*>(bytes), 8)) {
        std::uint64_t bits = 0;
        for (std::size_t b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
        chain.samples.push_back(std::bit_cast<double>(bits));
    }
    if (in.gcount() != 0 || chain.samples.size() % chain.dimension != 0)
        throw std::runtime_error("read_chain_binary: trailing partial record");
    if (chain.size() > 0) {
        double s = 0.0;
        for (double v : chain.row(0)) s += v;
        chain.total = s;
    }
    return chain;
}

}  // namespace sfcmc
