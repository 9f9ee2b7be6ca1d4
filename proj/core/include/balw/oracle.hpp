#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>

#include "balw/function_class.hpp"
#include "balw/population.hpp"

namespace balw {

/// Direct solution of  min E_P[w^2]  s.t.  E_P[w] = 1, IPM_F(Q, R_w) <= delta.
struct PrimalSolution {
  WeightVector weights;
  /// E_P[w^2].
  double objective = 0.0;
  /// Exact IPM of the returned weights.
  double achieved_bias = 0.0;
  /// max(0, achieved_bias - delta).
  double constraint_violation = 0.0;
  int iterations = 0;
  /// Solver descriptor, e.g. "admm" or "grid(resolution=0.0001)".
  std::string method;
};

struct PrimalOptions {
  int max_iterations = 200000;
  double tolerance = 1e-12;
  /// Largest allowed constraint violation of the returned weights.
  double feasibility_tolerance = 1e-6;
};

/// ADMM on the primal with the IPM constraint written as a norm ball on a linear image of w.
/// Limited to n_P + n_Q <= 30. Throws InfeasibleBiasError (carrying the smallest bias seen)
/// when no feasible point is reached.
PrimalSolution PrimalSolve(const FunctionClassSpec& spec, const Population& pop, double delta,
                           const PrimalOptions& options = {});

/// Exhaustive search over a grid on the slice E_P[w] = 1, for n_P <= 3. Coordinates range
/// over [1 - half_width, 1 + half_width] with spacing `resolution`.
PrimalSolution GridPrimalSolve(const FunctionClassSpec& spec, const Population& pop, double delta,
                               double resolution, double half_width = 2.0);

/// Monte-Carlo MSE of the weighting estimator E_P[w Y] for E_Q f0 under the fixed-design model
/// Y_i = f0(x_i) + sigma0 e_i / sqrt(p_i), e_i ~ N(0, 1), whose noise term has variance
/// sigma0^2 E_P[w^2].
struct MonteCarloResult {
  double mse = 0.0;
  double standard_error = 0.0;
  /// (E_P[w f0] - E_Q f0)^2.
  double bias_squared = 0.0;
  /// sigma0^2 E_P[w^2].
  double noise_variance = 0.0;
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
};

MonteCarloResult MseMonteCarlo(const Population& pop, const FunctionValues& f0, double sigma0,
                               const WeightVector& weights, std::int64_t trials, std::uint64_t seed,
                               int shards = 16);

}  // namespace balw
