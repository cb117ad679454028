#include <benchmark/benchmark.h>
#include <rodeepc/bench.hpp>
#include <rodeepc/qpsolve.hpp>

#include <random>

using namespace rodeepc;

namespace {

QuadraticProgram random_box_qp(Index n, Index m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Matrix g(n, n), a(m, n);
  for (Index i = 0; i < g.size(); ++i) g.data()[i] = nd(rng);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = nd(rng);
  Vector x0(n), c(n);
  for (Index i = 0; i < n; ++i) {
    x0(i) = 0.5 * nd(rng);
    c(i) = 3.0 * nd(rng);
  }
  QuadraticProgram qp;
  qp.hessian = BlockDiagonal::dense(g * g.transpose() + 0.1 * Matrix::Identity(n, n));
  qp.linear_cost = c;
  qp.eq_matrix = a;
  qp.eq_rhs = a * x0;
  qp.lower_bounds = Vector::Constant(n, -1.0);
  qp.upper_bounds = Vector::Constant(n, 1.0);
  return qp;
}

void BM_QpBoxed(benchmark::State& state) {
  const QuadraticProgram qp = random_box_qp(state.range(0), state.range(1), 3);
  QpSolver solver;
  for (auto _ : state) benchmark::DoNotOptimize(solver.solve(qp).primal.data());
}

void BM_QpBoxedCold(benchmark::State& state) {
  const QuadraticProgram qp = random_box_qp(state.range(0), state.range(1), 4);
  for (auto _ : state) benchmark::DoNotOptimize(solve(qp).primal.data());
}

void BM_DeePCStep(benchmark::State& state) {
  ExperimentConfig cfg = default_config(static_cast<BenchmarkKind>(state.range(0)));
  cfg.deepc.variant = ControllerVariant::static_deepc;
  const OfflineData d = make_offline_data(cfg, 1);
  Controller ctrl(cfg.deepc, d.inputs, d.outputs);
  LtvPlant plant = cfg.make_plant();
  warmup(ctrl, plant, cfg.warmup);
  const Matrix ref = cfg.output_reference.window(0, cfg.deepc.horizon);
  for (auto _ : state) benchmark::DoNotOptimize(ctrl.solve(ref).applied_input.data());
}

}  // namespace

BENCHMARK(BM_QpBoxed)->Args({10, 3})->Args({60, 20})->Args({200, 50})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_QpBoxedCold)->Args({10, 3})->Args({60, 20})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_DeePCStep)
    ->Arg(static_cast<int>(BenchmarkKind::ltv))
    ->Arg(static_cast<int>(BenchmarkKind::rollover))
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
