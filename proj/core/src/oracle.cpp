#include "balw/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "balw/errors.hpp"

namespace balw {
namespace {

enum class BallNorm { L2, LInf, L1 };

// The IPM constraint as  c - A w  in a norm ball of the given radius.
struct ConstraintImage {
  Eigen::MatrixXd a;
  Eigen::VectorXd c;
  BallNorm norm = BallNorm::L2;
  double radius = 0.0;
};

ConstraintImage BuildImage(const FunctionClassSpec& spec, const BoundClass& bound,
                           const Population& pop, double delta) {
  const Eigen::VectorXd& p = pop.source_masses();
  const Eigen::VectorXd& q = pop.target_masses();
  ConstraintImage img;
  switch (spec.kind()) {
    case ClassKind::FullInfo: {
      const FunctionValues& f0 = spec.f0();
      img.a = p.cwiseProduct(f0.on_source).transpose();
      img.c = Eigen::VectorXd::Constant(1, q.dot(f0.on_target));
      img.radius = delta;
      break;
    }
    case ClassKind::Linear: {
      img.a = bound.source_features().transpose() * p.asDiagonal();
      img.c = bound.target_features().transpose() * q;
      img.norm = spec.linear_norm() == LinearNorm::L2 ? BallNorm::L2 : BallNorm::LInf;
      img.radius = delta / spec.bound();
      break;
    }
    case ClassKind::Rkhs: {
      // ||s||_K = ||L' s|| with K = L L' and L = V diag(sqrt(lambda)).
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(bound.gram());
      if (eig.info() != Eigen::Success) throw NumericError("Gram eigendecomposition failed");
      const Eigen::MatrixXd l =
          eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
      img.a = l.topRows(pop.n_source()).transpose() * p.asDiagonal();
      img.c = l.bottomRows(pop.n_target()).transpose() * q;
      img.radius = delta / spec.rkhs_radius();
      break;
    }
    case ClassKind::Bounded: {
      const PointIndex& points = bound.points();
      img.a = Eigen::MatrixXd::Zero(points.n_unique, pop.n_source());
      for (std::size_t i = 0; i < points.source_ids.size(); ++i)
        img.a(points.source_ids[i], static_cast<Eigen::Index>(i)) = p[static_cast<Eigen::Index>(i)];
      img.c = points.target_mass;
      img.norm = BallNorm::L1;
      img.radius = delta / spec.bound();
      break;
    }
  }
  return img;
}

Eigen::VectorXd Project(const Eigen::VectorXd& v, BallNorm norm, double radius) {
  switch (norm) {
    case BallNorm::L2: {
      const double n = v.norm();
      return n <= radius ? v : Eigen::VectorXd(v * (radius / n));
    }
    case BallNorm::LInf: return v.cwiseMax(-radius).cwiseMin(radius);
    case BallNorm::L1: {
      if (v.lpNorm<1>() <= radius) return v;
      // Bisection on the soft-threshold level.
      double lo = 0.0, hi = v.cwiseAbs().maxCoeff();
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double mass = (v.cwiseAbs().array() - mid).max(0.0).sum();
        (mass > radius ? lo : hi) = mid;
      }
      const double theta = hi;
      return v.unaryExpr([theta](double x) {
        const double s = std::max(std::abs(x) - theta, 0.0);
        return x < 0.0 ? -s : s;
      });
    }
  }
  return v;
}

void CheckOracleInputs(const Population& pop, double delta) {
  if (pop.n_pooled() > 30) throw ContractError("the primal oracle is limited to n_P + n_Q <= 30");
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw ContractError("delta must be finite, >= 0");
}

PrimalSolution Package(Eigen::VectorXd w, const BoundClass& bound, const Population& pop,
                       double delta, int iterations, std::string method) {
  const double objective = pop.source_masses().dot(w.cwiseAbs2());
  const double bias = bound.Ipm(w);
  return PrimalSolution{WeightVector(std::move(w), pop), objective,  bias,
                        std::max(0.0, bias - delta),     iterations, std::move(method)};
}

}  // namespace

PrimalSolution PrimalSolve(const FunctionClassSpec& spec, const Population& pop, double delta,
                           const PrimalOptions& options) {
  CheckOracleInputs(pop, delta);
  const BoundClass bound(spec, pop);
  const ConstraintImage img = BuildImage(spec, bound, pop, delta);
  const Eigen::VectorXd& p = pop.source_masses();
  const Eigen::Index n = pop.n_source();
  const Eigen::Index m = img.a.rows();
  const Eigen::MatrixXd ata = img.a.transpose() * img.a;

  double rho = 1.0;
  Eigen::LDLT<Eigen::MatrixXd> kkt;
  Eigen::VectorXd m_inv_p;
  auto factor = [&] {
    kkt.compute(Eigen::MatrixXd(p.asDiagonal()) + rho * ata);
    m_inv_p = kkt.solve(p);
  };
  factor();

  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd aw = img.a * w;
  Eigen::VectorXd z = Project(img.c - aw, img.norm, img.radius);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
  double best_bias = bound.Ipm(w);
  Eigen::VectorXd best_feasible;
  double best_feasible_objective = std::numeric_limits<double>::infinity();
  const double tol = options.tolerance;

  int iter = 0;
  bool converged = false;
  for (; iter < options.max_iterations; ++iter) {
    // w-step: equality-constrained least squares through the KKT system.
    const Eigen::VectorXd w0 = kkt.solve(rho * (img.a.transpose() * (img.c - z + u)));
    const double nu = (p.dot(w0) - 1.0) / p.dot(m_inv_p);
    w = w0 - nu * m_inv_p;
    aw = img.a * w;
    const Eigen::VectorXd z_old = z;
    z = Project(img.c - aw + u, img.norm, img.radius);
    const Eigen::VectorXd primal_gap = img.c - aw - z;
    u += primal_gap;

    const double r_norm = primal_gap.norm();
    const double s_norm = rho * (img.a.transpose() * (z - z_old)).norm();
    const double eps_pri = std::sqrt(static_cast<double>(m)) * tol +
                           tol * std::max({aw.norm(), z.norm(), img.c.norm()});
    const double eps_dual =
        std::sqrt(static_cast<double>(n)) * tol + tol * rho * (img.a.transpose() * u).norm();

    if (iter % 25 == 0 || (r_norm <= eps_pri && s_norm <= eps_dual)) {
      const double bias = bound.Ipm(w);
      best_bias = std::min(best_bias, bias);
      if (bias <= delta + options.feasibility_tolerance) {
        const double obj = p.dot(w.cwiseAbs2());
        if (obj < best_feasible_objective) {
          best_feasible_objective = obj;
          best_feasible = w;
        }
      }
    }
    if (r_norm <= eps_pri && s_norm <= eps_dual) {
      converged = true;
      break;
    }
    if (iter % 20 == 19) {
      double scale = 1.0;
      if (r_norm > 10.0 * s_norm) scale = 2.0;
      if (s_norm > 10.0 * r_norm) scale = 0.5;
      if (scale != 1.0 && rho * scale > 1e-8 && rho * scale < 1e12) {
        rho *= scale;
        u /= scale;
        factor();
      }
    }
  }

  const int iterations = std::min(iter + 1, options.max_iterations);
  if (converged) {
    PrimalSolution sol = Package(w, bound, pop, delta, iterations, "admm");
    if (sol.constraint_violation <= options.feasibility_tolerance) return sol;
  }
  if (best_feasible.size() > 0)
    return Package(best_feasible, bound, pop, delta, iterations, "admm(best feasible iterate)");
  throw InfeasibleBiasError(delta, best_bias);
}

PrimalSolution GridPrimalSolve(const FunctionClassSpec& spec, const Population& pop, double delta,
                               double resolution, double half_width) {
  CheckOracleInputs(pop, delta);
  const Eigen::Index n = pop.n_source();
  if (n > 3) throw ContractError("the grid oracle is limited to n_P <= 3");
  if (!(resolution > 0.0) || !(half_width > 0.0))
    throw ContractError("grid resolution and half-width must be positive");
  const BoundClass bound(spec, pop);
  const Eigen::VectorXd& p = pop.source_masses();
  const double slack = 1e-12 * (1.0 + delta);

  Eigen::VectorXd best;
  double best_obj = std::numeric_limits<double>::infinity();
  double best_bias = std::numeric_limits<double>::infinity();
  auto consider = [&](const Eigen::VectorXd& w) {
    const double bias = bound.Ipm(w);
    best_bias = std::min(best_bias, bias);
    if (bias > delta + slack) return;
    const double obj = p.dot(w.cwiseAbs2());
    if (obj < best_obj) {
      best_obj = obj;
      best = w;
    }
  };

  const auto steps = static_cast<long>(std::floor(2.0 * half_width / resolution + 1e-9));
  const double lo = 1.0 - half_width;
  Eigen::VectorXd w(n);
  if (n == 1) {
    w[0] = 1.0 / p[0];
    consider(w);
  } else if (n == 2) {
    for (long k = 0; k <= steps; ++k) {
      w[0] = lo + static_cast<double>(k) * resolution;
      w[1] = (1.0 - p[0] * w[0]) / p[1];
      consider(w);
    }
  } else {
    for (long k = 0; k <= steps; ++k) {
      w[0] = lo + static_cast<double>(k) * resolution;
      for (long j = 0; j <= steps; ++j) {
        w[1] = lo + static_cast<double>(j) * resolution;
        w[2] = (1.0 - p[0] * w[0] - p[1] * w[1]) / p[2];
        consider(w);
      }
    }
  }
  if (best.size() == 0) throw InfeasibleBiasError(delta, best_bias);
  const auto evaluations = static_cast<int>(std::min<long>(
      n == 3 ? (steps + 1) * (steps + 1) : steps + 1, std::numeric_limits<int>::max()));
  char method[64];
  std::snprintf(method, sizeof method, "grid(resolution=%g)", resolution);
  return Package(best, bound, pop, delta, evaluations, method);
}

MonteCarloResult MseMonteCarlo(const Population& pop, const FunctionValues& f0, double sigma0,
                               const WeightVector& weights, std::int64_t trials, std::uint64_t seed,
                               int shards) {
  if (trials < 2) throw ContractError("need at least two Monte-Carlo trials");
  if (shards < 1) throw ContractError("shard count must be positive");
  if (!(sigma0 >= 0.0)) throw ContractError("sigma0 must be non-negative");
  if (weights.size() != pop.n_source() || f0.on_source.size() != pop.n_source() ||
      f0.on_target.size() != pop.n_target())
    throw DimensionError("weights or f0 do not match the population");

  const Eigen::VectorXd& p = pop.source_masses();
  const Eigen::VectorXd& w = weights.values();
  const double bias = p.dot(w.cwiseProduct(f0.on_source)) - MeanQ(f0.on_target, pop);
  const Eigen::VectorXd noise_loading = sigma0 * (p.cwiseSqrt().cwiseProduct(w));

  double sum = 0.0, sum_sq = 0.0;
  for (int s = 0; s < shards; ++s) {
    const std::int64_t begin = trials * s / shards;
    const std::int64_t end = trials * (s + 1) / shards;
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(s)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::int64_t t = begin; t < end; ++t) {
      double err = bias;
      for (Eigen::Index i = 0; i < noise_loading.size(); ++i) err += noise_loading[i] * normal(rng);
      const double sq = err * err;
      sum += sq;
      sum_sq += sq * sq;
    }
  }
  const auto nt = static_cast<double>(trials);
  const double mean = sum / nt;
  const double var = std::max(0.0, (sum_sq / nt - mean * mean) * nt / (nt - 1.0));
  return MonteCarloResult{
      mean, std::sqrt(var / nt), bias * bias, sigma0 * sigma0 * p.dot(w.cwiseAbs2()), trials, seed};
}

}  // namespace balw
