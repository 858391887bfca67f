#pragma once

// Hit-and-run sampling of wealth vectors from prod_i f(m_i) restricted to
// {sum_i m_i = S, m_i >= 0}. The move along each chord is a Metropolis step
// with a uniform proposal on the chord.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sfcmc/distributions.hpp"
#include "sfcmc/kernels.hpp"

namespace sfcmc {

using Rng = std::mt19937_64;

struct ConstraintSet {
    double total = 0.0;         // S
    std::size_t dimension = 0;  // N

    void validate() const;  // S > 0, N >= 2
    double barycenter_value() const noexcept { return total / static_cast<double>(dimension); }
};

enum class DirectionScheme { Hypersphere, Coordinate };
std::string to_string(DirectionScheme scheme);
DirectionScheme parse_direction_scheme(const std::string& name);  // "hd" or "cd"

struct SamplerConfig {
    DirectionScheme scheme = DirectionScheme::Hypersphere;
    std::uint64_t chain_length = 0;           // total steps, burn-in included
    std::uint64_t thinning = 1000;
    std::optional<std::uint64_t> burn_in;     // default 10 N
    std::uint64_t seed = 0;

    std::uint64_t resolved_burn_in(std::size_t dimension) const { return burn_in.value_or(10 * dimension); }
    std::uint64_t emitted_samples(std::size_t dimension) const;

    // Chain length that emits `samples` rows after the resolved burn-in.
    static std::uint64_t length_for(std::uint64_t samples, std::uint64_t thinning, std::uint64_t burn_in) {
        return burn_in + samples * thinning;
    }
};

struct SampleChain {
    std::size_t dimension = 0;
    double total = 0.0;
    std::vector<double> samples;  // row-major, one row per emitted sample
    std::uint64_t acceptance_count = 0;
    std::uint64_t proposal_count = 0;
    std::uint64_t degenerate_chords = 0;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> row_seeds;  // per-row chain seed after merging; empty means all rows come from `seed`
    std::vector<std::string> warnings;

    std::size_t size() const noexcept { return dimension ? samples.size() / dimension : 0; }
    std::span<const double> row(std::size_t i) const { return {samples.data() + i * dimension, dimension}; }
    std::vector<double> coordinate(std::size_t c) const;
    std::uint64_t seed_of_row(std::size_t i) const { return row_seeds.empty() ? seed : row_seeds[i]; }
};

// Isotropic unit direction in the hyperplane sum d_i = 0.
void direction_hd(std::span<double> direction, Rng& rng);

// Pair-exchange direction (e_i - e_j)/sqrt(2) for a uniformly drawn pair i < j.
struct PairDirection {
    std::size_t i = 0;
    std::size_t j = 0;
};
PairDirection direction_cd(std::size_t dimension, Rng& rng);
void materialize(PairDirection pair, std::span<double> direction);

struct Chord {
    double t_min = 0.0;
    double t_max = 0.0;
    bool degenerate() const noexcept { return !(t_max > t_min); }
};
// Largest interval of t with point + t * direction >= 0 coordinatewise.
Chord chord(std::span<const double> point, std::span<const double> direction);

// Acceptance probability of a uniform-on-chord proposal: min(1, pi(to)/pi(from)).
double line_acceptance(double log_target_from, double log_target_to);

// Warns on Critical phase; throws PhaseRefusalError on Condensed and
// InitializationError if the barycenter has zero or non-finite weight.
SampleChain hit_and_run(const WeightFunction& f, const ConstraintSet& constraints, const SamplerConfig& config);

// Independent chains, one per seed; results in seed order.
std::vector<SampleChain> run_chains(const WeightFunction& f, const ConstraintSet& constraints, const SamplerConfig& config,
                                    std::span<const std::uint64_t> seeds, Execution exec = Execution::Parallel);
SampleChain merge_chains(std::span<const SampleChain> chains);

struct ChainDiagnostics {
    double rejection_rate = 0.0;
    std::uint64_t proposals = 0;
    std::uint64_t acceptances = 0;
    std::uint64_t degenerate_chords = 0;
    std::size_t samples = 0;
    double expected_coordinate_mean = 0.0;  // S / N
    std::vector<double> coordinate_means;
    double max_mean_z = 0.0;  // largest |mean_c - S/N| / standard error, ignoring autocorrelation
    std::vector<std::pair<std::size_t, double>> autocorrelation;  // (lag, mean over coordinates) of emitted samples
    std::optional<double> ks_to_weight;                           // pooled single-site KS distance to f
};

ChainDiagnostics diagnostics(const SampleChain& chain, const WeightFunction* weight = nullptr);

struct SchemeComparison {
    double ks_hypersphere = 0.0;
    double ks_coordinate = 0.0;
    double gap = 0.0;  // ks_coordinate - ks_hypersphere
    bool coordinate_worse = false;
};
SchemeComparison compare_schemes(const ChainDiagnostics& hypersphere, const ChainDiagnostics& coordinate);

// One row per sample; the first column tags the chain seed.
void write_chain_csv(std::ostream& out, const SampleChain& chain);
// Little-endian: uint32 N, 4 reserved bytes, then float64 samples row-major.
void write_chain_binary(std::ostream& out, const SampleChain& chain);
SampleChain read_chain_binary(std::istream& in);

}  // namespace sfcmc
