// Serial reference vs OpenMP versions of the data-parallel kernels.

#include <cmath>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "sfcmc/distributions.hpp"
#include "sfcmc/kernels.hpp"
#include "sfcmc/mass_transport.hpp"
#include "sfcmc/sampler.hpp"

namespace {

std::vector<double> gamma_grid(std::size_t n) {
    const auto f = sfcmc::WeightFunction::gamma(1.46, 1.0);
    std::vector<double> v(n + 1);
    const double h = 8.0 / static_cast<double>(n);
    for (std::size_t j = 0; j <= n; ++j) v[j] = f.pdf(static_cast<double>(j) * h);
    return v;
}

void convolution(benchmark::State& state, sfcmc::Execution exec) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = gamma_grid(n);
    std::vector<double> out(a.size());
    for (auto _ : state) {
        sfcmc::kernels::trapezoid_convolution(a, a, 8.0 / static_cast<double>(n), out, exec);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetComplexityN(state.range(0));
}

void BM_ConvolutionSerial(benchmark::State& state) { convolution(state, sfcmc::Execution::Serial); }
void BM_ConvolutionParallel(benchmark::State& state) { convolution(state, sfcmc::Execution::Parallel); }
BENCHMARK(BM_ConvolutionSerial)->RangeMultiplier(4)->Range(256, 16384)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ConvolutionParallel)->RangeMultiplier(4)->Range(256, 16384)->Unit(benchmark::kMicrosecond);

void max_share(benchmark::State& state, bool parallel) {
    const std::size_t rows = static_cast<std::size_t>(state.range(0)), cols = 100;
    std::mt19937_64 rng(1);
    std::exponential_distribution<double> e;
    std::vector<double> block(rows * cols);
    for (auto& v : block) v = e(rng);
    std::vector<double> out(rows);
    for (auto _ : state) {
        if (parallel)
            sfcmc::kernels::max_share_parallel(block, cols, out);
        else
            sfcmc::kernels::max_share_serial(block, cols, out);
        benchmark::DoNotOptimize(out.data());
    }
}

void BM_MaxShareSerial(benchmark::State& state) { max_share(state, false); }
void BM_MaxShareParallel(benchmark::State& state) { max_share(state, true); }
BENCHMARK(BM_MaxShareSerial)->Arg(10000)->Arg(100000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MaxShareParallel)->Arg(10000)->Arg(100000)->Unit(benchmark::kMicrosecond);

void chains(benchmark::State& state, sfcmc::Execution exec) {
    const sfcmc::ConstraintSet cs{100.0, 100};
    const auto f = sfcmc::WeightFunction::lognormal(1.72, 1.0).with_mean(1.0);
    sfcmc::SamplerConfig config;
    config.thinning = 100;
    config.burn_in = 1000;
    config.chain_length = 21000;
    const std::vector<std::uint64_t> seeds{1, 2, 3, 4};
    for (auto _ : state) {
        auto result = sfcmc::run_chains(f, cs, config, seeds, exec);
        benchmark::DoNotOptimize(result.data());
    }
}

void BM_ChainsSerial(benchmark::State& state) { chains(state, sfcmc::Execution::Serial); }
void BM_ChainsParallel(benchmark::State& state) { chains(state, sfcmc::Execution::Parallel); }
BENCHMARK(BM_ChainsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ChainsParallel)->Unit(benchmark::kMillisecond);

void BM_PartitionOracle(benchmark::State& state) {
    const auto f = sfcmc::WeightFunction::gamma(1.46, 1.0);
    const auto exec = state.range(0) ? sfcmc::Execution::Parallel : sfcmc::Execution::Serial;
    for (auto _ : state) {
        auto o = sfcmc::partition_function_bruteforce(f, 8.0 * 1.46, 8, 2048, exec);
        benchmark::DoNotOptimize(o.partition);
    }
}
BENCHMARK(BM_PartitionOracle)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
