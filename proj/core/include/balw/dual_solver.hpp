#pragma once

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <vector>

#include "balw/ball_qp.hpp"
#include "balw/function_class.hpp"
#include "balw/population.hpp"

namespace balw {

enum class RkhsMethod { Exact, ProjectedGradient };
enum class BoundedMethod { Exact, CoordinateAscent };

struct SolverOptions {
  /// Stationarity tolerance for the iterative methods.
  double tolerance = 1e-7;
  int max_iterations = 10000;
  RkhsMethod rkhs_method = RkhsMethod::Exact;
  BoundedMethod bounded_method = BoundedMethod::Exact;
};

/// Maximizer of J(f) = E_Q f - E_P f - (mu/4) Var_P f over F, and the weights it induces.
struct DualSolution {
  double mu = 0.0;
  ClassParams params;
  FunctionValues f_star;
  /// E_P f* - 2/mu; absent at mu = 0.
  std::optional<double> lambda_star;
  /// Worst-case bias of the induced weights, clamped at zero.
  double delta = 0.0;
  double dual_objective = 0.0;
  WeightVector weights;
  int iterations = 0;
  double residual = 0.0;
  /// Linear class: ridge penalty 2 nu / mu of the equivalent regression (infinite at mu = 0).
  std::optional<double> ridge_penalty;
};

/// Weights 1 + (mu/2)(f - E_P f) over the source rows.
WeightVector WeightsFromDual(const Eigen::VectorXd& f_on_source, double mu, const Population& pop);

/// E_Q f* - E_P f* - (mu/2) Var_P f*, clamped at zero.
double DeltaOfMu(const DualSolution& solution, const Population& pop);

/// A class bound to a population with the mu-independent factorizations cached, so that
/// repeated solves along a mu schedule are cheap.
class DualProblem {
 public:
  DualProblem(const FunctionClassSpec& spec, const Population& pop, SolverOptions options = {});
  ~DualProblem();
  DualProblem(DualProblem&&) noexcept;
  DualProblem& operator=(DualProblem&&) noexcept;

  DualSolution Solve(double mu) const;

  /// sup over F of E_Q f - E_P f.
  double DeltaMax() const;

  const BoundClass& bound_class() const noexcept { return bound_; }
  const Population& population() const noexcept { return bound_.population(); }
  const SolverOptions& options() const noexcept { return options_; }

 private:
  struct Cache;

  DualSolution FullInfo(double mu) const;
  DualSolution LinearL2(double mu) const;
  DualSolution LinearL1(double mu) const;
  DualSolution RkhsExact(double mu) const;
  DualSolution RkhsGradient(double mu) const;
  DualSolution BoundedExact(double mu) const;
  DualSolution BoundedCoordinate(double mu) const;
  DualSolution Finish(double mu, ClassParams params, FunctionValues f, int iterations,
                      double residual) const;

  BoundClass bound_;
  SolverOptions options_;
  std::unique_ptr<Cache> cache_;
};

DualSolution SolveDual(const FunctionClassSpec& spec, const Population& pop, double mu,
                       const SolverOptions& options = {});

double DeltaMax(const FunctionClassSpec& spec, const Population& pop);

struct DeltaMinResult {
  double delta_min = 0.0;
  double mu_max = 0.0;
  /// (mu, delta) along the doubling schedule.
  std::vector<std::pair<double, double>> trace;
};

/// Doubles mu from 1 until delta decreases by less than tolerance * delta_max over two
/// consecutive doublings. Throws ConvergenceError past mu = 1e12.
DeltaMinResult FindDeltaMin(const DualProblem& problem, double tolerance = 1e-4);
DeltaMinResult FindDeltaMin(const FunctionClassSpec& spec, const Population& pop,
                            double tolerance = 1e-4, const SolverOptions& options = {});

struct MuForDeltaResult {
  double mu = 0.0;
  DualSolution solution;
  /// The budget is at or above delta_max, so uniform weights already meet it.
  bool slack = false;
};

/// Smallest-variance weights with bias at most `delta_target`. Throws InfeasibleBiasError
/// when the target is not above delta_min.
MuForDeltaResult MuForDelta(const DualProblem& problem, double delta_target,
                            double delta_min_tolerance = 1e-4);
MuForDeltaResult MuForDelta(const FunctionClassSpec& spec, const Population& pop,
                            double delta_target, const SolverOptions& options = {});

struct FrontierRecord {
  double mu = 0.0;
  double delta = 0.0;
  /// D_2(w || 1) = E_P[w^2] - 1.
  double weight_variance = 0.0;
  /// delta^2 + sigma^2 D_2.
  double mse_bound = 0.0;
  /// delta^2 + sigma^2 E_P[w^2].
  double mse_total = 0.0;
  double weight_min = 0.0;
  double weight_max = 0.0;
};

struct FrontierProfile {
  std::vector<FrontierRecord> records;
  double sigma2 = 0.0;
  double delta_max = 0.0;
  std::optional<DeltaMinResult> delta_min;

  /// Index of the record with the smallest mse_bound.
  std::size_t BestIndex() const;
};

/// Solves at every mu of an ascending grid. Results do not depend on `threads`.
FrontierProfile Sweep(const DualProblem& problem, const std::vector<double>& mu_grid, double sigma2,
                      int threads = 1, bool with_delta_min = true);
FrontierProfile Sweep(const FunctionClassSpec& spec, const Population& pop,
                      const std::vector<double>& mu_grid, double sigma2,
                      const SolverOptions& options = {});

/// True when delta is non-increasing and variance non-decreasing in mu, up to `slack`.
bool FrontierIsMonotone(const FrontierProfile& profile, double slack = 1e-7);

/// Closed form for F = conv{f0, -f0} on the frontier segment delta in [0, |Delta|].
struct FullInfoFrontierPoint {
  double delta = 0.0;
  double mu = 0.0;
  WeightVector weights;
  double weight_variance = 0.0;
  double mse_bound = 0.0;
  /// Var_P f0 = 0: weights cannot move the bias, so the solution is uniform.
  bool degenerate = false;
};

/// The point with bias budget `delta`.
FullInfoFrontierPoint FullInfoFrontierAt(const FunctionValues& f0, const Population& pop,
                                         double sigma2, double delta);

/// The MSE-optimal point, delta* = sigma^2 |Delta| / (Var_P f0 + sigma^2).
FullInfoFrontierPoint FullInfoClosedForm(const FunctionValues& f0, const Population& pop,
                                         double sigma2);

/// The linear-class weighting estimate next to the equivalent mass-weighted ridge fit with an
/// unpenalized intercept.
struct RidgeEquivalence {
  double dual_estimate = 0.0;
  double ridge_estimate = 0.0;
  double ridge_penalty = 0.0;
  bool interior = false;
};

RidgeEquivalence RidgeEquivalenceEstimate(const FunctionClassSpec& linear_spec,
                                          const Population& pop, double mu);

}  // namespace balw
