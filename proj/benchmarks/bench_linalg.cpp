#include "lsq/linalg.hpp"
#include "lsq/problem.hpp"

#include <benchmark/benchmark.h>

namespace {

lsq::Matrix synthetic_matrix(lsq::Index rows, lsq::Index cols) {
    lsq::SyntheticSpec spec;
    spec.rows = rows;
    spec.cols = cols;
    spec.kappa = 100.0;
    spec.seed = 17;
    return lsq::make_synthetic(spec).A;
}

void BM_gram(benchmark::State& state) {
    const lsq::Matrix A = synthetic_matrix(state.range(0), state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(lsq::gram(A));
}
BENCHMARK(BM_gram)->Args({608, 188})->Args({900, 900});

void BM_spectral_summary(benchmark::State& state) {
    const lsq::Matrix G = lsq::gram(synthetic_matrix(2 * state.range(0), state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(lsq::spectral_summary(G));
}
BENCHMARK(BM_spectral_summary)->Arg(100)->Arg(300);

void BM_k_beta(benchmark::State& state) {
    const lsq::Matrix G = lsq::gram(synthetic_matrix(2 * state.range(0), state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(lsq::k_beta(G, 1.0));
}
BENCHMARK(BM_k_beta)->Arg(100)->Arg(300);

}  // namespace
