#include <benchmark/benchmark.h>
#include <rodeepc/svdtrack.hpp>

#include <random>

using namespace rodeepc;

namespace {

Matrix gaussian(std::mt19937_64& rng, Index r, Index c) {
  std::normal_distribution<double> nd;
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

void run_appends(benchmark::State& state, CoreSolver core) {
  const Index rows = state.range(0);
  const Index cols = state.range(1);
  std::mt19937_64 rng(1);
  const Matrix seed = gaussian(rng, rows, cols);
  const Matrix cols_in = gaussian(rng, rows, 64);
  const SvdState base = init_from_batch(seed);
  SvdOptions opt;
  opt.core = core;
  opt.reorth_interval = 0;
  SvdState s = base;
  Index next = 0;
  for (auto _ : state) {
    append_update(s, cols_in.col(next), opt);
    benchmark::DoNotOptimize(s.sigma.data());
    if (++next == cols_in.cols()) {
      state.PauseTiming();
      s = base;
      next = 0;
      state.ResumeTiming();
    }
  }
}

void BM_AppendSecular(benchmark::State& state) { run_appends(state, CoreSolver::secular); }
void BM_AppendDense(benchmark::State& state) { run_appends(state, CoreSolver::dense); }

void BM_BatchSvd(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const Matrix m = gaussian(rng, state.range(0), state.range(1));
  for (auto _ : state) {
    SvdState s = init_from_batch(m);
    benchmark::DoNotOptimize(s.sigma.data());
  }
}

void BM_AdaptiveOrder(benchmark::State& state) {
  Vector s(state.range(0));
  for (Index i = 0; i < s.size(); ++i) s(i) = 1.0 / static_cast<double>(i + 1);
  for (auto _ : state) benchmark::DoNotOptimize(adaptive_order(s, 0.01, 10).adaptive_order);
}

}  // namespace

BENCHMARK(BM_AppendSecular)->Args({50, 20})->Args({320, 100})->Args({320, 442})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_AppendDense)->Args({50, 20})->Args({320, 100})->Args({320, 442})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BatchSvd)->Args({50, 200})->Args({320, 442})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AdaptiveOrder)->Arg(320);
