#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "balw/dual_solver.hpp"
#include "balw/fixtures.hpp"
#include "balw/oracle.hpp"
#include "balw/phi_divergence.hpp"

namespace {

using namespace balw;

Population ShiftedGaussians(Eigen::Index n, Eigen::Index dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd xs(n, dim), xt(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      xs(i, j) = normal(rng);
      xt(i, j) = normal(rng) + 0.5;
    }
  }
  return Population::Uniform(xs, xt);
}

FunctionClassSpec SpecFor(int kind) {
  switch (kind) {
    case 0: return FunctionClassSpec::Linear(1.0);
    case 1: return FunctionClassSpec::Linear(1.0, LinearNorm::L1);
    case 2: return FunctionClassSpec::Rkhs(1.0);
    default: return FunctionClassSpec::Bounded(1.0);
  }
}

// Range(0): sample size per side. Range(1): class (linear-l2, linear-l1, rkhs, bounded).
void BM_SolveDual(benchmark::State& state) {
  const Population pop = ShiftedGaussians(state.range(0), 3, 1);
  const DualProblem problem(SpecFor(static_cast<int>(state.range(1))), pop);
  for (auto _ : state) benchmark::DoNotOptimize(problem.Solve(2.0).delta);
  state.SetLabel(ToString(problem.bound_class().spec().kind()));
}
BENCHMARK(BM_SolveDual)->ArgsProduct({{50, 200, 800}, {0, 1, 2, 3}})->Unit(benchmark::kMillisecond);

void BM_BuildProblem(benchmark::State& state) {
  const Population pop = ShiftedGaussians(state.range(0), 3, 2);
  for (auto _ : state) {
    const DualProblem problem(FunctionClassSpec::Rkhs(1.0), pop);
    benchmark::DoNotOptimize(&problem);
  }
}
BENCHMARK(BM_BuildProblem)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_FindDeltaMin(benchmark::State& state) {
  const fixtures::Fixture fx = fixtures::DisjointUniformGrid(static_cast<int>(state.range(0)));
  const DualProblem problem(FunctionClassSpec::Bounded(1.0), fx.population);
  for (auto _ : state) benchmark::DoNotOptimize(FindDeltaMin(problem).delta_min);
}
BENCHMARK(BM_FindDeltaMin)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_Sweep(benchmark::State& state) {
  const fixtures::Fixture fx = fixtures::GaussianShiftGrid(512);
  const DualProblem problem(FunctionClassSpec::Bounded(1.0), fx.population);
  std::vector<double> grid{0.0};
  for (double mu = 0.01; mu < 100.0; mu *= 1.3) grid.push_back(mu);
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(Sweep(problem, grid, 1.0, threads, false));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * grid.size()));
}
BENCHMARK(BM_Sweep)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_SolveDualPhi(benchmark::State& state) {
  const Population pop = ShiftedGaussians(200, 2, 3);
  const PhiSpec phi{static_cast<PhiFamily>(state.range(0))};
  for (auto _ : state)
    benchmark::DoNotOptimize(SolveDualPhi(FunctionClassSpec::Linear(1.0), pop, phi, 2.0).delta);
  state.SetLabel(ToString(phi.family));
}
BENCHMARK(BM_SolveDualPhi)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

void BM_PrimalOracle(benchmark::State& state) {
  const Population pop = ShiftedGaussians(12, 2, 4);
  const FunctionClassSpec spec = FunctionClassSpec::Rkhs(1.0);
  const double floor = FindDeltaMin(spec, pop).delta_min;
  const double delta = floor + 0.5 * (DeltaMax(spec, pop) - floor);
  for (auto _ : state) benchmark::DoNotOptimize(PrimalSolve(spec, pop, delta).objective);
}
BENCHMARK(BM_PrimalOracle)->Unit(benchmark::kMillisecond);

void BM_MonteCarlo(benchmark::State& state) {
  const fixtures::Fixture fx = fixtures::GaussianShiftGrid(512);
  const WeightVector w = SolveDual(FunctionClassSpec::FullInfo(*fx.f0), fx.population, 1.0).weights;
  for (auto _ : state)
    benchmark::DoNotOptimize(MseMonteCarlo(fx.population, *fx.f0, 1.0, w, state.range(0), 7).mse);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MonteCarlo)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
