#pragma once

#include <Eigen/Dense>

#include <random>
#include <string>
#include <vector>

#include "balw/function_class.hpp"
#include "balw/population.hpp"

namespace balw::testing {

inline Eigen::VectorXd RandomMasses(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  Eigen::VectorXd m(n);
  for (Eigen::Index i = 0; i < n; ++i) m[i] = u(rng);
  return m / m.sum();
}

inline Eigen::MatrixXd RandomNormal(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                                    double shift = 0.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) x(i, j) = n(rng) + shift;
  return x;
}

/// Source and target rows drawn with replacement from a small pool of distinct points, so that
/// supports partially overlap.
inline Population RandomPooledPopulation(std::mt19937_64& rng, Eigen::Index n_p, Eigen::Index n_q,
                                         Eigen::Index pool, Eigen::Index dim = 1) {
  const Eigen::MatrixXd points = RandomNormal(rng, pool, dim);
  std::uniform_int_distribution<Eigen::Index> pick(0, pool - 1);
  Eigen::MatrixXd xs(n_p, dim), xt(n_q, dim);
  for (Eigen::Index i = 0; i < n_p; ++i) xs.row(i) = points.row(pick(rng));
  for (Eigen::Index j = 0; j < n_q; ++j) xt.row(j) = points.row(pick(rng));
  return Population(xs, xt, RandomMasses(rng, n_p), RandomMasses(rng, n_q));
}

/// Continuous covariates with a mean shift between the samples.
inline Population RandomShiftedPopulation(std::mt19937_64& rng, Eigen::Index n_p, Eigen::Index n_q,
                                          Eigen::Index dim, double shift, bool outcomes = false) {
  Eigen::MatrixXd xs = RandomNormal(rng, n_p, dim);
  Eigen::MatrixXd xt = RandomNormal(rng, n_q, dim, shift);
  std::optional<Eigen::VectorXd> y;
  if (outcomes) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::VectorXd v(n_p);
    for (Eigen::Index i = 0; i < n_p; ++i) v[i] = xs.row(i).sum() + 0.5 * n(rng);
    y = v;
  }
  return Population(xs, xt, RandomMasses(rng, n_p), RandomMasses(rng, n_q), y);
}

inline FunctionValues RandomValues(std::mt19937_64& rng, const Population& pop) {
  return FunctionValues{RandomNormal(rng, pop.n_source(), 1).col(0),
                        RandomNormal(rng, pop.n_target(), 1).col(0)};
}

inline double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// One random class of each kind, cycling FullInfo, Linear (L2 and L1), Rkhs, Bounded.
inline FunctionClassSpec RandomSpec(std::mt19937_64& rng, int index, const Population& pop) {
  switch (index % 5) {
    case 0: return FunctionClassSpec::FullInfo(RandomValues(rng, pop));
    case 1: return FunctionClassSpec::Linear(Uniform(rng, 0.3, 3.0), LinearNorm::L2, 1 + index % 2);
    case 2: return FunctionClassSpec::Linear(Uniform(rng, 0.3, 3.0), LinearNorm::L1, 1);
    case 3:
      return FunctionClassSpec::Rkhs(Uniform(rng, 0.3, 3.0), KernelSpec{Uniform(rng, 0.5, 2.0)});
    default: return FunctionClassSpec::Bounded(Uniform(rng, 0.3, 3.0));
  }
}

inline std::string KindName(const FunctionClassSpec& spec) {
  std::string name = ToString(spec.kind());
  if (spec.kind() == ClassKind::Linear)
    name += spec.linear_norm() == LinearNorm::L2 ? "-l2" : "-l1";
  return name;
}

}  // namespace balw::testing
