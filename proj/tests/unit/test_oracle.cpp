#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "balw/dual_solver.hpp"
#include "balw/errors.hpp"
#include "balw/fixtures.hpp"
#include "balw/oracle.hpp"
#include "instances.hpp"

namespace balw {
namespace {

TEST(PrimalSolve, UniformWeightsAtDeltaMax) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10; ++i) {
    const Population pop = testing::RandomShiftedPopulation(rng, 5, 4, 1, 0.5);
    const FunctionClassSpec spec = testing::RandomSpec(rng, i, pop);
    const PrimalSolution sol = PrimalSolve(spec, pop, DeltaMax(spec, pop));
    EXPECT_LT((sol.weights.values().array() - 1.0).abs().maxCoeff(), 1e-6)
        << testing::KindName(spec);
    EXPECT_NEAR(sol.objective, 1.0, 1e-9);
    EXPECT_LE(sol.constraint_violation, 1e-12);
  }
}

TEST(PrimalSolve, TwoPointInstance) {
  const fixtures::Fixture fx = fixtures::TwoPoint();
  const FunctionClassSpec spec = FunctionClassSpec::FullInfo(*fx.f0);
  const PrimalSolution sol = PrimalSolve(spec, fx.population, 0.125);
  EXPECT_NEAR(sol.weights[0], 0.75, 1e-6);
  EXPECT_NEAR(sol.weights[1], 1.25, 1e-6);
  // D_2 = E_P[w^2] - 1 = 0.0625.
  EXPECT_NEAR(sol.objective - 1.0, 0.0625, 1e-6);
  EXPECT_LE(sol.achieved_bias, 0.125 + 1e-6);
  EXPECT_EQ(sol.method.rfind("admm", 0), 0u);
}

TEST(PrimalSolve, ApproachesTheDensityRatioAsDeltaVanishes) {
  Eigen::MatrixXd x(4, 1);
  x << 0, 1, 2, 3;
  Eigen::VectorXd p(4), q(4);
  p << 0.4, 0.3, 0.2, 0.1;
  q << 0.1, 0.2, 0.3, 0.4;
  const Population pop(x, x, p, q);
  const Eigen::VectorXd ratio = q.cwiseQuotient(p);
  double previous = INFINITY;
  for (double delta : {0.1, 0.01, 1e-3, 1e-5}) {
    const PrimalSolution sol = PrimalSolve(FunctionClassSpec::Bounded(1.0), pop, delta);
    const double dist = (sol.weights.values() - ratio).cwiseAbs().maxCoeff();
    EXPECT_LT(dist, previous + 1e-9);
    previous = dist;
  }
  EXPECT_LT(previous, 1e-3);
}

TEST(PrimalSolve, FeasibleAndNoWorseThanSampledFeasibleWeights) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 15; ++i) {
    const Population pop = i % 5 == 4 ? testing::RandomPooledPopulation(rng, 4, 4, 4, 1)
                                      : testing::RandomShiftedPopulation(rng, 4, 4, 1, 0.6);
    const FunctionClassSpec spec = testing::RandomSpec(rng, i, pop);
    const BoundClass bound(spec, pop);
    const double dmax = DeltaMax(spec, pop);
    const Eigen::VectorXd& p = pop.source_masses();
    // Budget at the bias of a random normalized weight vector, which is then feasible.
    Eigen::VectorXd w = Eigen::VectorXd::Ones(4) + 0.8 * testing::RandomNormal(rng, 4, 1).col(0);
    w.array() += 1.0 - p.dot(w);
    const double delta = bound.Ipm(w);
    if (delta >= dmax) continue;
    const PrimalSolution sol = PrimalSolve(spec, pop, delta);
    EXPECT_LE(sol.achieved_bias, delta + 1e-6) << testing::KindName(spec);
    EXPECT_LE(sol.objective, p.dot(w.cwiseAbs2()) + 1e-8) << testing::KindName(spec);
    EXPECT_NEAR(sol.achieved_bias, bound.Ipm(sol.weights.values()), 1e-15);
  }
}

TEST(PrimalSolve, InfeasibleAndContractCases) {
  const fixtures::Fixture large = fixtures::DisjointUniformGrid(40);
  Eigen::MatrixXd xs(3, 1), xt(2, 1);
  xs << 0.0, 1.0, 2.0;
  xt << 5.0, 6.0;
  const Population apart = Population::Uniform(xs, xt);
  try {
    PrimalSolve(FunctionClassSpec::Bounded(1.0), apart, 0.5);
    FAIL() << "expected InfeasibleBiasError";
  } catch (const InfeasibleBiasError& e) {
    // Disjoint supports: every normalized reweighting has bias 2B.
    EXPECT_NEAR(e.delta_min(), 2.0, 1e-6);
    EXPECT_EQ(e.requested(), 0.5);
  }
  EXPECT_THROW(PrimalSolve(FunctionClassSpec::Bounded(1.0), large.population, 0.1), ContractError);
  EXPECT_THROW(PrimalSolve(FunctionClassSpec::Bounded(1.0), apart, -1.0), ContractError);
}

TEST(GridPrimalSolve, Examples) {
  const fixtures::Fixture fx = fixtures::TwoPoint();
  const FunctionClassSpec spec = FunctionClassSpec::FullInfo(*fx.f0);
  const PrimalSolution sol = GridPrimalSolve(spec, fx.population, 0.125, 1e-4);
  EXPECT_NEAR(sol.weights[0], 0.75, 1e-4);
  EXPECT_NEAR(sol.weights[1], 1.25, 1e-4);
  EXPECT_EQ(sol.method, "grid(resolution=0.0001)");

  Eigen::MatrixXd xs(1, 1), xt(2, 1);
  xs << 0.0;
  xt << 0.0, 1.0;
  const Population single = Population::Uniform(xs, xt);
  EXPECT_EQ(GridPrimalSolve(FunctionClassSpec::Bounded(1.0), single, 10.0, 0.1).weights[0], 1.0);

  EXPECT_THROW(GridPrimalSolve(FunctionClassSpec::FullInfo(*fx.f0), fx.population, 0.01, 1e-3, 0.1),
               InfeasibleBiasError);
  std::mt19937_64 rng(3);
  EXPECT_THROW(GridPrimalSolve(FunctionClassSpec::Bounded(1.0),
                               testing::RandomShiftedPopulation(rng, 4, 2, 1, 0.0), 1.0, 0.1),
               ContractError);
  EXPECT_THROW(GridPrimalSolve(spec, fx.population, 0.1, 0.0), ContractError);
}

TEST(GridPrimalSolve, AgreesWithAdmmOnTinyInstances) {
  std::mt19937_64 rng(4);
  int compared = 0;
  for (int i = 0; i < 20; ++i) {
    const Population pop = i % 5 == 4 ? testing::RandomPooledPopulation(rng, 3, 3, 3, 1)
                                      : testing::RandomShiftedPopulation(rng, 2 + i % 2, 3, 1, 0.6);
    const FunctionClassSpec spec = testing::RandomSpec(rng, i, pop);
    const double dmax = DeltaMax(spec, pop);
    double delta = 0.0;
    try {
      delta = FindDeltaMin(spec, pop).delta_min;
    } catch (const ConvergenceError&) {
      continue;
    }
    delta += 0.5 * (dmax - delta);
    if (dmax < 1e-6) continue;
    const double resolution = 2e-3;
    const PrimalSolution admm = PrimalSolve(spec, pop, delta);
    // The grid only covers the box 1 +/- half_width.
    if ((admm.weights.values().array() - 1.0).abs().maxCoeff() > 2.5) continue;
    ++compared;
    const PrimalSolution grid = GridPrimalSolve(spec, pop, delta, resolution, 3.0);
    // The grid optimum lies within a few cells of the continuous optimum.
    EXPECT_GE(grid.objective, admm.objective - 1e-9) << testing::KindName(spec);
    EXPECT_LT((grid.weights.values() - admm.weights.values()).cwiseAbs().maxCoeff(),
              0.05 + 20 * resolution)
        << testing::KindName(spec);
    EXPECT_LT(grid.objective - admm.objective, 0.01) << testing::KindName(spec);
  }
}

TEST(MseMonteCarlo, DegenerateCases) {
  const fixtures::Fixture fx = fixtures::TwoPoint();
  const Population& pop = fx.population;
  Eigen::VectorXd ratio(2);
  ratio << 0.5, 1.5;
  const MonteCarloResult exact = MseMonteCarlo(pop, *fx.f0, 0.0, WeightVector(ratio, pop), 100, 1);
  EXPECT_EQ(exact.mse, 0.0);
  const MonteCarloResult bias_only =
      MseMonteCarlo(pop, *fx.f0, 0.0, WeightVector::Uniform(pop), 100, 1);
  EXPECT_DOUBLE_EQ(bias_only.mse, 0.0625);
  EXPECT_DOUBLE_EQ(bias_only.bias_squared, 0.0625);
  EXPECT_EQ(bias_only.standard_error, 0.0);
}

TEST(MseMonteCarlo, MatchesBiasPlusVarianceAndIsDeterministic) {
  const fixtures::Fixture fx = fixtures::TwoPoint();
  const Population& pop = fx.population;
  Eigen::VectorXd w(2);
  w << 0.75, 1.25;
  const WeightVector weights(w, pop);
  const double sigma0 = 0.5;
  const MonteCarloResult a = MseMonteCarlo(pop, *fx.f0, sigma0, weights, 200000, 42);
  const double expected = 0.125 * 0.125 + sigma0 * sigma0 * (0.5 * 0.5625 + 0.5 * 1.5625);
  EXPECT_DOUBLE_EQ(a.noise_variance, sigma0 * sigma0 * 1.0625);
  EXPECT_DOUBLE_EQ(a.bias_squared, 0.015625);
  EXPECT_LT(std::abs(a.mse - expected), 3.0 * a.standard_error);
  EXPECT_EQ(a.seed, 42u);
  EXPECT_EQ(a.trials, 200000);

  const MonteCarloResult b = MseMonteCarlo(pop, *fx.f0, sigma0, weights, 200000, 42);
  EXPECT_EQ(a.mse, b.mse);
  EXPECT_EQ(a.standard_error, b.standard_error);
  const MonteCarloResult c = MseMonteCarlo(pop, *fx.f0, sigma0, weights, 200000, 43);
  EXPECT_NE(a.mse, c.mse);
  EXPECT_THROW(MseMonteCarlo(pop, *fx.f0, sigma0, weights, 1, 0), ContractError);
  EXPECT_THROW(MseMonteCarlo(pop, *fx.f0, -1.0, weights, 10, 0), ContractError);
  EXPECT_THROW(MseMonteCarlo(pop, *fx.f0, sigma0, weights, 10, 0, 0), ContractError);
}

TEST(StrongDuality, DualValueEqualsPrimalValue) {
  // J(f*) = delta + D_2 / mu, with D_2 taken from the independent primal solution.
  std::mt19937_64 rng(5);
  for (int i = 0; i < 15; ++i) {
    const Population pop = i % 5 == 4 ? testing::RandomPooledPopulation(rng, 5, 5, 4, 1)
                                      : testing::RandomShiftedPopulation(rng, 5, 5, 1, 0.6);
    const FunctionClassSpec spec = testing::RandomSpec(rng, i, pop);
    const double mu = testing::Uniform(rng, 0.3, 5.0);
    const DualSolution dual = SolveDual(spec, pop, mu);
    if (dual.delta < 1e-6) continue;
    const PrimalSolution primal = PrimalSolve(spec, pop, dual.delta);
    EXPECT_NEAR(dual.dual_objective, dual.delta + (primal.objective - 1.0) / mu, 1e-5)
        << testing::KindName(spec);
  }
}

}  // namespace
}  // namespace balw
