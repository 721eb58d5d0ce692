// Compares the OpenMP Monte Carlo kernels with their serial references.

#include <benchmark/benchmark.h>

#include "avi/snr_empirical.hpp"

namespace {

avi::GradSampler drep_sampler(int d, double sigma_q, double alpha) {
    const avi::TargetContract target = avi::make_standard_gaussian_target(d);
    const avi::DiagonalGaussian q =
        avi::DiagonalGaussian::mean_zero(std::vector<double>(static_cast<std::size_t>(d), sigma_q));
    return avi::make_sampler(avi::EstimatorKind::Drep, target, q,
                             avi::AlphaParam::general(alpha));
}

void bm_mc_snr_parallel(benchmark::State& state) {
    const int d = static_cast<int>(state.range(0));
    const std::int64_t n = state.range(1);
    const auto sampler = drep_sampler(d, 2.0, 0.4);
    for (auto _ : state) {
        const auto est = avi::mc_snr(sampler, n, avi::RngStream(1, 0));
        benchmark::DoNotOptimize(est.snr);
    }
    state.SetItemsProcessed(state.iterations() * n);
}

void bm_mc_snr_serial(benchmark::State& state) {
    const int d = static_cast<int>(state.range(0));
    const std::int64_t n = state.range(1);
    const auto sampler = drep_sampler(d, 2.0, 0.4);
    for (auto _ : state) {
        const auto est = avi::mc_snr_serial(sampler, n, avi::RngStream(1, 0));
        benchmark::DoNotOptimize(est.snr);
    }
    state.SetItemsProcessed(state.iterations() * n);
}

void bm_mc_variance_parallel(benchmark::State& state) {
    const int d = static_cast<int>(state.range(0));
    const std::int64_t n = state.range(1);
    const auto sampler = drep_sampler(d, 2.0, 0.4);
    for (auto _ : state) {
        const auto est = avi::mc_variance(sampler, n, avi::RngStream(1, 0));
        benchmark::DoNotOptimize(est.total);
    }
    state.SetItemsProcessed(state.iterations() * n);
}

void bm_mc_variance_serial(benchmark::State& state) {
    const int d = static_cast<int>(state.range(0));
    const std::int64_t n = state.range(1);
    const auto sampler = drep_sampler(d, 2.0, 0.4);
    for (auto _ : state) {
        const auto est = avi::mc_variance_serial(sampler, n, avi::RngStream(1, 0));
        benchmark::DoNotOptimize(est.total);
    }
    state.SetItemsProcessed(state.iterations() * n);
}

}  // namespace

BENCHMARK(bm_mc_snr_parallel)->Args({2, 100000})->Args({8, 100000})->Args({32, 100000})
    ->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(bm_mc_snr_serial)->Args({2, 100000})->Args({8, 100000})->Args({32, 100000})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(bm_mc_variance_parallel)->Args({8, 100000})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(bm_mc_variance_serial)->Args({8, 100000})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
