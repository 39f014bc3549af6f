#include "lsq/problem.hpp"
#include "lsq/protocol.hpp"
#include "lsq/solvers.hpp"

#include <benchmark/benchmark.h>

namespace {

struct Setup {
    lsq::LeastSquaresProblem problem;
    std::vector<lsq::AgentShard> shards;
    lsq::SpectralSummary spectrum;
};

Setup make_setup(lsq::Index rows, lsq::Index cols, int agents) {
    lsq::SyntheticSpec spec;
    spec.rows = rows;
    spec.cols = cols;
    spec.kappa = 50.0;
    spec.seed = 23;
    Setup s;
    s.problem = lsq::make_synthetic(spec);
    s.shards = lsq::partition(s.problem, agents);
    s.spectrum = lsq::spectral_summary(lsq::gram(s.problem.A));
    return s;
}

// One full pre-conditioned round: d reply vectors per agent plus the
// server updates. Dominates every experiment's wall time.
void BM_ipg_round(benchmark::State& state) {
    Setup s = make_setup(state.range(0), state.range(1), 10);
    lsq::IpgSolver solver = lsq::IpgSolver::zero_init(lsq::tune_ipg(s.spectrum), state.range(1));
    lsq::RoundEngine engine(s.shards);
    for (auto _ : state) benchmark::DoNotOptimize(lsq::run_round(solver, engine));
}
BENCHMARK(BM_ipg_round)->Args({608, 188})->Args({900, 300})->Unit(benchmark::kMillisecond);

void BM_gd_round(benchmark::State& state) {
    Setup s = make_setup(state.range(0), state.range(1), 10);
    lsq::GdSolver solver(lsq::tune_gd(s.spectrum), lsq::Vector::Zero(state.range(1)));
    lsq::RoundEngine engine(s.shards);
    for (auto _ : state) benchmark::DoNotOptimize(lsq::run_round(solver, engine));
}
BENCHMARK(BM_gd_round)->Args({608, 188})->Args({900, 900});

void BM_round_decimals(benchmark::State& state) {
    lsq::NoiseStream stream(lsq::NoiseChannel::round_decimals(4));
    lsq::Vector v = lsq::Vector::Random(state.range(0));
    for (auto _ : state) {
        stream.apply(v);
        benchmark::DoNotOptimize(v);
    }
}
BENCHMARK(BM_round_decimals)->Arg(900);

}  // namespace
