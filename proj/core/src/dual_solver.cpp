#include "balw/dual_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>
#include <vector>

#include "balw/errors.hpp"

namespace balw {
namespace {

double SignPlus(double x) { return x >= 0.0 ? 1.0 : -1.0; }

// Mass-weighted covariance of the feature columns.
Eigen::MatrixXd FeatureCovariance(const Eigen::MatrixXd& features, const Eigen::VectorXd& p,
                                  const Eigen::VectorXd& mean) {
  Eigen::MatrixXd centered = features.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = centered.transpose() * p.asDiagonal() * centered;
  return 0.5 * (cov + cov.transpose());
}

// Exact refinement of an approximate L1-ball maximizer of c'b - (q/2) b' Sigma b: solve the
// stationarity system on the face fixed by the signs of `beta`, and keep the result when it
// meets the optimality conditions at least as well.
Eigen::VectorXd PolishL1(const Eigen::VectorXd& beta, const Eigen::VectorXd& c,
                         const Eigen::MatrixXd& sigma, double q, double bound) {
  const Eigen::Index d = beta.size();
  const double cutoff = 1e-9 * std::max(bound, beta.cwiseAbs().maxCoeff());
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < d; ++i)
    if (std::abs(beta[i]) > cutoff) support.push_back(i);
  const auto k = static_cast<Eigen::Index>(support.size());
  if (k == 0) return beta;

  Eigen::VectorXd sign(k), c_face(k);
  Eigen::MatrixXd h(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    sign[a] = SignPlus(beta[support[a]]);
    c_face[a] = c[support[a]];
    for (Eigen::Index b = 0; b < k; ++b) h(a, b) = q * sigma(support[a], support[b]);
  }
  const bool on_boundary = beta.lpNorm<1>() >= bound * (1.0 - 1e-9);
  Eigen::VectorXd face;
  double nu = 0.0;
  if (on_boundary) {
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
    kkt.topLeftCorner(k, k) = h;
    kkt.topRightCorner(k, 1) = sign;
    kkt.bottomLeftCorner(1, k) = sign.transpose();
    Eigen::VectorXd rhs(k + 1);
    rhs << c_face, bound;
    const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    face = sol.head(k);
    nu = sol[k];
    if (nu < 0.0) return beta;
  } else {
    face = h.completeOrthogonalDecomposition().solve(c_face);
  }

  Eigen::VectorXd candidate = Eigen::VectorXd::Zero(d);
  for (Eigen::Index a = 0; a < k; ++a) {
    if (face[a] * sign[a] < 0.0) return beta;
    candidate[support[a]] = face[a];
  }
  if (candidate.lpNorm<1>() > bound * (1.0 + 1e-12)) return beta;

  auto violation = [&](const Eigen::VectorXd& b, double multiplier) {
    const Eigen::VectorXd g = c - q * (sigma * b);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double r =
          b[i] != 0.0 ? std::abs(g[i] - multiplier * SignPlus(b[i])) : std::abs(g[i]) - multiplier;
      worst = std::max(worst, r);
    }
    return worst;
  };
  const Eigen::VectorXd g0 = c - q * (sigma * beta);
  const double nu0 = on_boundary ? g0.cwiseAbs().maxCoeff() : 0.0;
  const double floor = 1e-9 * (1.0 + c.cwiseAbs().maxCoeff());
  return violation(candidate, nu) <= std::max(violation(beta, nu0), floor) ? candidate : beta;
}

}  // namespace

struct DualProblem::Cache {
  // Linear and RKHS: f = features * z; mu-independent pieces of the quadratic.
  Eigen::MatrixXd source_features;
  Eigen::MatrixXd target_features;
  Eigen::VectorXd mean_gap;  // E_Q g - E_P g
  std::optional<BallQuadratic> quadratic;
  std::optional<KernelFactor> kernel;
  Eigen::MatrixXd covariance;
  double curvature_max = 0.0;
};

WeightVector WeightsFromDual(const Eigen::VectorXd& f_on_source, double mu, const Population& pop) {
  if (f_on_source.size() != pop.n_source()) throw DimensionError("f must cover the source rows");
  if (mu < 0.0) throw ContractError("mu must be non-negative");
  const Eigen::VectorXd& p = pop.source_masses();
  Eigen::VectorXd centered = (f_on_source.array() - MeanP(f_on_source, pop)).matrix();
  // A second centering pass removes the round-off mean that large mu would amplify.
  centered.array() -= p.dot(centered);
  Eigen::VectorXd w = (1.0 + 0.5 * mu * centered.array()).matrix();
  return WeightVector(std::move(w), pop);
}

double DeltaOfMu(const DualSolution& solution, const Population& pop) {
  const double gap = MeanQ(solution.f_star, pop) - MeanP(solution.f_star, pop);
  return std::max(0.0, gap - 0.5 * solution.mu * VarP(solution.f_star, pop));
}

DualProblem::DualProblem(const FunctionClassSpec& spec, const Population& pop,
                         SolverOptions options)
    : bound_(spec, pop), options_(options), cache_(std::make_unique<Cache>()) {
  if (!(options_.tolerance > 0.0)) throw ContractError("tolerance must be positive");
  if (options_.max_iterations < 1) throw ContractError("max_iterations must be positive");
  const Eigen::VectorXd& p = pop.source_masses();
  const Eigen::VectorXd& q = pop.target_masses();
  auto build_quadratic = [&] {
    const Eigen::VectorXd mean_p = cache_->source_features.transpose() * p;
    const Eigen::VectorXd mean_q = cache_->target_features.transpose() * q;
    cache_->mean_gap = mean_q - mean_p;
    cache_->covariance = FeatureCovariance(cache_->source_features, p, mean_p);
    cache_->quadratic.emplace(cache_->covariance);
    const Eigen::VectorXd& eig = cache_->quadratic->eigenvalues();
    cache_->curvature_max = eig.size() > 0 ? eig.maxCoeff() : 0.0;
  };
  switch (spec.kind()) {
    case ClassKind::Linear:
      cache_->source_features = bound_.source_features();
      cache_->target_features = bound_.target_features();
      build_quadratic();
      break;
    case ClassKind::Rkhs: {
      cache_->kernel.emplace(FactorGram(bound_.gram()));
      const Eigen::MatrixXd& phi = cache_->kernel->features;
      cache_->source_features = phi.topRows(pop.n_source());
      cache_->target_features = phi.bottomRows(pop.n_target());
      build_quadratic();
      break;
    }
    case ClassKind::FullInfo:
    case ClassKind::Bounded: break;
  }
}

DualProblem::~DualProblem() = default;
DualProblem::DualProblem(DualProblem&&) noexcept = default;
DualProblem& DualProblem::operator=(DualProblem&&) noexcept = default;

double DualProblem::DeltaMax() const {
  return bound_.Ipm(Eigen::VectorXd::Ones(population().n_source()));
}

DualSolution DualProblem::Solve(double mu) const {
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw ContractError("mu must be finite and >= 0");
  const FunctionClassSpec& spec = bound_.spec();
  switch (spec.kind()) {
    case ClassKind::FullInfo: return FullInfo(mu);
    case ClassKind::Linear:
      return spec.linear_norm() == LinearNorm::L2 ? LinearL2(mu) : LinearL1(mu);
    case ClassKind::Rkhs:
      return options_.rkhs_method == RkhsMethod::Exact ? RkhsExact(mu) : RkhsGradient(mu);
    case ClassKind::Bounded:
      return options_.bounded_method == BoundedMethod::Exact ? BoundedExact(mu)
                                                             : BoundedCoordinate(mu);
  }
  throw ContractError("unknown class kind");
}

DualSolution DualProblem::Finish(double mu, ClassParams params, FunctionValues f, int iterations,
                                 double residual) const {
  const Population& pop = population();
  const double mean_p = MeanP(f, pop);
  const double gap = MeanQ(f, pop) - mean_p;
  const double var = VarP(f, pop);
  WeightVector w = mu > 0.0 ? WeightsFromDual(f.on_source, mu, pop) : WeightVector::Uniform(pop);
  DualSolution out{mu,
                   std::move(params),
                   std::move(f),
                   mu > 0.0 ? std::optional<double>(mean_p - 2.0 / mu) : std::nullopt,
                   mu > 0.0 ? std::max(0.0, gap - 0.5 * mu * var) : DeltaMax(),
                   gap - 0.25 * mu * var,
                   std::move(w),
                   iterations,
                   residual,
                   std::nullopt};
  return out;
}

DualSolution DualProblem::FullInfo(double mu) const {
  const Population& pop = population();
  const FunctionValues& f0 = bound_.spec().f0();
  const double gap = MeanQ(f0, pop) - MeanP(f0, pop);
  const double var = VarP(f0, pop);
  // J(t f0) = t gap - (mu/4) t^2 var is maximized over t in [-1, 1].
  double t = SignPlus(gap);
  if (mu > 0.0 && var > 0.0) t = std::clamp(2.0 * gap / (mu * var), -1.0, 1.0);
  FunctionValues f{t * f0.on_source, t * f0.on_target};
  return Finish(mu, ClassParams{Eigen::VectorXd::Constant(1, t)}, std::move(f), 0, 0.0);
}

DualSolution DualProblem::LinearL2(double mu) const {
  const double bound = bound_.spec().bound();
  const Eigen::VectorXd& c = cache_->mean_gap;
  Eigen::VectorXd beta;
  std::optional<double> ridge;
  if (mu == 0.0) {
    const double norm = c.norm();
    beta = norm > 0.0 ? Eigen::VectorXd(c * (bound / norm)) : Eigen::VectorXd::Zero(c.size());
    if (norm == 0.0 && c.size() > 0) beta[0] = bound;
    ridge = std::numeric_limits<double>::infinity();
  } else {
    const BallQuadratic::Solution qp = cache_->quadratic->Maximize(c, 0.5 * mu, bound);
    beta = qp.z;
    ridge = 2.0 * qp.multiplier / mu;
  }
  FunctionValues f{cache_->source_features * beta, cache_->target_features * beta};
  DualSolution out = Finish(mu, ClassParams{beta}, std::move(f), 0, 0.0);
  out.ridge_penalty = ridge;
  return out;
}

DualSolution DualProblem::LinearL1(double mu) const {
  const double bound = bound_.spec().bound();
  if (mu == 0.0) {
    SupResult sup = bound_.SupOver(
        TargetMinusReweighted(Eigen::VectorXd::Ones(population().n_source()), population()));
    return Finish(mu, std::move(sup.params), std::move(sup.maximizer), 0, 0.0);
  }
  const Eigen::VectorXd& c = cache_->mean_gap;
  const Eigen::MatrixXd& gp = cache_->source_features;
  const Eigen::VectorXd& p = population().source_masses();
  // J(beta) = c'beta - (mu/4) beta' Sigma beta, with Sigma applied through the features.
  auto objective = [&](const Eigen::VectorXd& beta, Eigen::VectorXd& grad) {
    const Eigen::VectorXd fp = gp * beta;
    const double mean = p.dot(fp);
    const Eigen::VectorXd centered = (fp.array() - mean).matrix();
    const Eigen::VectorXd sigma_beta = gp.transpose() * p.cwiseProduct(centered);
    grad = c - 0.5 * mu * sigma_beta;
    return c.dot(beta) - 0.25 * mu * p.dot(centered.cwiseAbs2());
  };
  ProjectedGradientOptions pg{options_.tolerance, options_.max_iterations,
                              1.0 / std::max(0.5 * mu * cache_->curvature_max, 1e-300)};
  const ProjectedGradientResult res = MaximizeProjected(
      objective, [bound](const Eigen::VectorXd& v) { return ProjectL1Ball(v, bound); },
      Eigen::VectorXd::Zero(c.size()), pg);
  if (!res.converged)
    throw ConvergenceError("L1 linear dual did not converge", res.residual, res.value);
  Eigen::VectorXd beta = PolishL1(res.x, c, cache_->covariance, 0.5 * mu, bound);
  FunctionValues f{gp * beta, cache_->target_features * beta};
  return Finish(mu, ClassParams{std::move(beta)}, std::move(f), res.iterations, res.residual);
}

DualSolution DualProblem::RkhsExact(double mu) const {
  const double radius = bound_.spec().rkhs_radius();
  const Eigen::VectorXd& c = cache_->mean_gap;
  Eigen::VectorXd z;
  if (mu == 0.0) {
    const double norm = c.norm();
    z = norm > 0.0 ? Eigen::VectorXd(c * (radius / norm)) : Eigen::VectorXd::Zero(c.size());
  } else {
    z = cache_->quadratic->Maximize(c, 0.5 * mu, radius).z;
  }
  FunctionValues f{cache_->source_features * z, cache_->target_features * z};
  return Finish(mu, ClassParams{cache_->kernel->AlphaFromCoordinates(z)}, std::move(f), 0, 0.0);
}

DualSolution DualProblem::RkhsGradient(double mu) const {
  const double radius = bound_.spec().rkhs_radius();
  const Eigen::VectorXd& c = cache_->mean_gap;
  const Eigen::MatrixXd& phi_p = cache_->source_features;
  const Eigen::VectorXd& p = population().source_masses();
  auto objective = [&](const Eigen::VectorXd& z, Eigen::VectorXd& grad) {
    const Eigen::VectorXd fp = phi_p * z;
    const Eigen::VectorXd centered = (fp.array() - p.dot(fp)).matrix();
    grad = c - 0.5 * mu * (phi_p.transpose() * p.cwiseProduct(centered));
    return c.dot(z) - 0.25 * mu * p.dot(centered.cwiseAbs2());
  };
  ProjectedGradientOptions pg{options_.tolerance, options_.max_iterations,
                              1.0 / std::max(0.5 * mu * cache_->curvature_max, 1e-12)};
  const ProjectedGradientResult res = MaximizeProjected(
      objective, [radius](const Eigen::VectorXd& v) { return ProjectL2Ball(v, radius); },
      Eigen::VectorXd::Zero(c.size()), pg);
  if (!res.converged) throw ConvergenceError("RKHS dual did not converge", res.residual, res.value);
  FunctionValues f{phi_p * res.x, cache_->target_features * res.x};
  return Finish(mu, ClassParams{cache_->kernel->AlphaFromCoordinates(res.x)}, std::move(f),
                res.iterations, res.residual);
}

namespace {

FunctionValues ExpandPointValues(const Eigen::VectorXd& values, const PointIndex& points) {
  FunctionValues f{Eigen::VectorXd(static_cast<Eigen::Index>(points.source_ids.size())),
                   Eigen::VectorXd(static_cast<Eigen::Index>(points.target_ids.size()))};
  for (std::size_t i = 0; i < points.source_ids.size(); ++i)
    f.on_source[static_cast<Eigen::Index>(i)] = values[points.source_ids[i]];
  for (std::size_t j = 0; j < points.target_ids.size(); ++j)
    f.on_target[static_cast<Eigen::Index>(j)] = values[points.target_ids[j]];
  return f;
}

}  // namespace

DualSolution DualProblem::BoundedExact(double mu) const {
  const PointIndex& points = bound_.points();
  const double bound = bound_.spec().bound();
  const Eigen::VectorXd& pu = points.source_mass;
  const Eigen::VectorXd& qu = points.target_mass;
  const Eigen::Index m = points.n_unique;
  Eigen::VectorXd values(m);
  if (mu == 0.0) {
    for (Eigen::Index u = 0; u < m; ++u) values[u] = bound * SignPlus(qu[u] - pu[u]);
    return Finish(mu, ClassParams{values}, ExpandPointValues(values, points), 0, 0.0);
  }

  // Optimal f_u = clip(c + r_u, -B, B) on supp P and +B elsewhere, where c = E_P f solves
  // phi(c) = sum_u p_u clip(c + r_u) - c = 0 (phi is non-increasing).
  Eigen::VectorXd r = Eigen::VectorXd::Zero(m);
  double r_abs = 0.0;
  for (Eigen::Index u = 0; u < m; ++u) {
    if (pu[u] > 0.0) {
      r[u] = 2.0 * (qu[u] - pu[u]) / (mu * pu[u]);
      r_abs = std::max(r_abs, std::abs(r[u]));
    }
  }
  auto phi = [&](double c) {
    double s = 0.0;
    for (Eigen::Index u = 0; u < m; ++u)
      if (pu[u] > 0.0) s += pu[u] * std::clamp(c + r[u], -bound, bound);
    return s - c;
  };
  double lo = -3.0 * bound - r_abs - 1.0;
  double hi = 3.0 * bound + r_abs + 1.0;
  int iterations = 0;
  for (; iterations < 300 && hi - lo > 0.0; ++iterations) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (phi(mid) > 0.0 ? lo : hi) = mid;
  }
  double c = 0.5 * (lo + hi);

  // Closed-form c on the active set found by bisection.
  double free_mass = 0.0, rhs = 0.0;
  for (Eigen::Index u = 0; u < m; ++u) {
    if (pu[u] <= 0.0) continue;
    const double x = c + r[u];
    if (x >= bound) {
      rhs += pu[u] * bound;
    } else if (x <= -bound) {
      rhs -= pu[u] * bound;
    } else {
      free_mass += pu[u];
      rhs += pu[u] * r[u];
    }
  }
  if (1.0 - free_mass > 1e-12) {
    const double exact = rhs / (1.0 - free_mass);
    if (std::abs(exact - c) <= 1e-9 * (1.0 + std::abs(c))) c = exact;
  }

  for (Eigen::Index u = 0; u < m; ++u)
    values[u] = pu[u] > 0.0 ? std::clamp(c + r[u], -bound, bound) : bound;
  return Finish(mu, ClassParams{values}, ExpandPointValues(values, points), iterations,
                std::abs(phi(c)));
}

DualSolution DualProblem::BoundedCoordinate(double mu) const {
  const PointIndex& points = bound_.points();
  const double bound = bound_.spec().bound();
  const Eigen::VectorXd& pu = points.source_mass;
  const Eigen::VectorXd& qu = points.target_mass;
  const Eigen::Index m = points.n_unique;
  Eigen::VectorXd values(m);
  for (Eigen::Index u = 0; u < m; ++u) values[u] = bound * SignPlus(qu[u] - pu[u]);
  if (mu == 0.0) return Finish(mu, ClassParams{values}, ExpandPointValues(values, points), 0, 0.0);

  const double half_mu = 0.5 * mu;
  double mean = pu.dot(values);
  auto residual = [&] {
    double worst = 0.0;
    for (Eigen::Index u = 0; u < m; ++u) {
      const double g = qu[u] - pu[u] - half_mu * pu[u] * (values[u] - mean);
      worst = std::max(worst, std::abs(std::clamp(values[u] + g, -bound, bound) - values[u]));
    }
    return worst;
  };

  int sweep = 0;
  double res = residual();
  while (res > options_.tolerance && sweep < options_.max_iterations) {
    ++sweep;
    for (Eigen::Index u = 0; u < m; ++u) {
      const double a = qu[u] - pu[u];
      const double rest = mean - pu[u] * values[u];
      const double denom = half_mu * pu[u] * (1.0 - pu[u]);
      double x;
      if (pu[u] == 0.0) {
        x = bound;
      } else if (denom <= 1e-300) {
        x = a >= 0.0 ? bound : -bound;
      } else {
        x = std::clamp((a + half_mu * pu[u] * rest) / denom, -bound, bound);
      }
      mean = rest + pu[u] * x;
      values[u] = x;
    }
    mean = pu.dot(values);
    res = residual();
  }
  if (res > options_.tolerance)
    throw ConvergenceError("bounded-class coordinate ascent did not converge", res);
  return Finish(mu, ClassParams{values}, ExpandPointValues(values, points), sweep, res);
}

DualSolution SolveDual(const FunctionClassSpec& spec, const Population& pop, double mu,
                       const SolverOptions& options) {
  return DualProblem(spec, pop, options).Solve(mu);
}

double DeltaMax(const FunctionClassSpec& spec, const Population& pop) {
  return BoundClass(spec, pop).Ipm(Eigen::VectorXd::Ones(pop.n_source()));
}

DeltaMinResult FindDeltaMin(const DualProblem& problem, double tolerance) {
  if (!(tolerance > 0.0)) throw ContractError("delta_min tolerance must be positive");
  DeltaMinResult result;
  const double delta_max = problem.DeltaMax();
  if (delta_max <= 0.0) return result;
  double mu = 1.0;
  result.trace.emplace_back(mu, problem.Solve(mu).delta);
  for (;;) {
    const std::size_t n = result.trace.size();
    const double current = result.trace.back().second;
    if (current <= 1e-15 * delta_max) break;
    if (n >= 3 && result.trace[n - 3].second - current < tolerance * delta_max) break;
    mu *= 2.0;
    if (mu > 1e12) {
      const double drop = n >= 3 ? result.trace[n - 3].second - current : delta_max;
      throw ConvergenceError("delta_min search did not settle below mu = 1e12", drop, current);
    }
    result.trace.emplace_back(mu, problem.Solve(mu).delta);
  }
  result.mu_max = result.trace.back().first;
  result.delta_min = result.trace.back().second;
  return result;
}

DeltaMinResult FindDeltaMin(const FunctionClassSpec& spec, const Population& pop, double tolerance,
                            const SolverOptions& options) {
  return FindDeltaMin(DualProblem(spec, pop, options), tolerance);
}

MuForDeltaResult MuForDelta(const DualProblem& problem, double delta_target,
                            double delta_min_tolerance) {
  if (!std::isfinite(delta_target)) throw ContractError("delta target must be finite");
  const double delta_max = problem.DeltaMax();
  if (delta_target >= delta_max) return MuForDeltaResult{0.0, problem.Solve(0.0), true};

  const DeltaMinResult floor = FindDeltaMin(problem, delta_min_tolerance);
  const double tol = 1e-6 * delta_max;
  if (delta_target <= floor.delta_min + tol)
    throw InfeasibleBiasError(delta_target, floor.delta_min);

  double hi = 1.0;
  DualSolution at_hi = problem.Solve(hi);
  while (at_hi.delta > delta_target) {
    hi *= 2.0;
    if (hi > 1e12) throw ConvergenceError("mu search exceeded 1e12", at_hi.delta - delta_target);
    at_hi = problem.Solve(hi);
  }
  if (std::abs(at_hi.delta - delta_target) <= tol) return MuForDeltaResult{hi, std::move(at_hi)};
  double lo = hi == 1.0 ? 0.0 : 0.5 * hi;
  for (int iter = 0; iter < 100; ++iter) {
    const double mid = 0.5 * (lo + hi);
    DualSolution at_mid = problem.Solve(mid);
    if (std::abs(at_mid.delta - delta_target) <= tol)
      return MuForDeltaResult{mid, std::move(at_mid)};
    if (at_mid.delta > delta_target) {
      lo = mid;
    } else {
      hi = mid;
      at_hi = std::move(at_mid);
    }
  }
  return MuForDeltaResult{hi, std::move(at_hi)};
}

MuForDeltaResult MuForDelta(const FunctionClassSpec& spec, const Population& pop,
                            double delta_target, const SolverOptions& options) {
  return MuForDelta(DualProblem(spec, pop, options), delta_target);
}

std::size_t FrontierProfile::BestIndex() const {
  if (records.empty()) throw ContractError("empty frontier");
  std::size_t best = 0;
  for (std::size_t i = 1; i < records.size(); ++i)
    if (records[i].mse_bound < records[best].mse_bound) best = i;
  return best;
}

FrontierProfile Sweep(const DualProblem& problem, const std::vector<double>& mu_grid, double sigma2,
                      int threads, bool with_delta_min) {
  if (mu_grid.empty()) throw ContractError("mu grid is empty");
  if (!(sigma2 >= 0.0)) throw ContractError("sigma2 must be non-negative");
  for (std::size_t i = 0; i < mu_grid.size(); ++i) {
    if (!(mu_grid[i] >= 0.0) || !std::isfinite(mu_grid[i]))
      throw ContractError("mu grid values must be finite and >= 0");
    if (i > 0 && mu_grid[i] <= mu_grid[i - 1])
      throw ContractError("mu grid must be strictly ascending");
  }

  const Population& pop = problem.population();
  FrontierProfile profile;
  profile.sigma2 = sigma2;
  profile.delta_max = problem.DeltaMax();
  profile.records.resize(mu_grid.size());
  auto solve_one = [&](std::size_t i) {
    const DualSolution sol = problem.Solve(mu_grid[i]);
    const double d2 = WeightVariance(sol.weights, pop);
    FrontierRecord& rec = profile.records[i];
    rec.mu = sol.mu;
    rec.delta = sol.delta;
    rec.weight_variance = d2;
    rec.mse_bound = sol.delta * sol.delta + sigma2 * d2;
    rec.mse_total = sol.delta * sol.delta + sigma2 * (1.0 + d2);
    rec.weight_min = sol.weights.values().minCoeff();
    rec.weight_max = sol.weights.values().maxCoeff();
  };

  const std::size_t workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, mu_grid.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < mu_grid.size(); ++i) solve_one(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t k = 0; k < workers; ++k) {
      pool.emplace_back([&, k] {
        try {
          for (std::size_t i = k; i < mu_grid.size(); i += workers) solve_one(i);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  if (with_delta_min) profile.delta_min = FindDeltaMin(problem);
  return profile;
}

FrontierProfile Sweep(const FunctionClassSpec& spec, const Population& pop,
                      const std::vector<double>& mu_grid, double sigma2,
                      const SolverOptions& options) {
  return Sweep(DualProblem(spec, pop, options), mu_grid, sigma2);
}

bool FrontierIsMonotone(const FrontierProfile& profile, double slack) {
  const double scale = 1.0 + profile.delta_max;
  for (std::size_t i = 1; i < profile.records.size(); ++i) {
    const FrontierRecord& a = profile.records[i - 1];
    const FrontierRecord& b = profile.records[i];
    if (b.delta > a.delta + slack * scale) return false;
    if (b.weight_variance < a.weight_variance - slack * (1.0 + a.weight_variance)) return false;
  }
  return true;
}

FullInfoFrontierPoint FullInfoFrontierAt(const FunctionValues& f0, const Population& pop,
                                         double sigma2, double delta) {
  const double gap = MeanQ(f0, pop) - MeanP(f0, pop);
  const double var = VarP(f0, pop);
  const double reach = std::abs(gap);
  if (!(delta >= 0.0) || delta > reach * (1.0 + 1e-12) + 1e-300)
    throw ContractError("delta must lie in [0, |E_Q f0 - E_P f0|]");
  if (var == 0.0) {
    return FullInfoFrontierPoint{reach, 0.0, WeightVector::Uniform(pop), 0.0, reach * reach, true};
  }
  const double slope = (reach - delta) / var;
  const double mean = MeanP(f0.on_source, pop);
  Eigen::VectorXd w = (1.0 + SignPlus(gap) * slope * (f0.on_source.array() - mean)).matrix();
  const double d2 = slope * slope * var;
  return FullInfoFrontierPoint{
      delta, 2.0 * slope, WeightVector(std::move(w), pop), d2, delta * delta + sigma2 * d2, false};
}

FullInfoFrontierPoint FullInfoClosedForm(const FunctionValues& f0, const Population& pop,
                                         double sigma2) {
  if (!(sigma2 >= 0.0)) throw ContractError("sigma2 must be non-negative");
  const double reach = std::abs(MeanQ(f0, pop) - MeanP(f0, pop));
  const double var = VarP(f0, pop);
  if (var == 0.0) return FullInfoFrontierAt(f0, pop, sigma2, reach);
  return FullInfoFrontierAt(f0, pop, sigma2, std::min(reach, sigma2 * reach / (var + sigma2)));
}

RidgeEquivalence RidgeEquivalenceEstimate(const FunctionClassSpec& linear_spec,
                                          const Population& pop, double mu) {
  if (linear_spec.kind() != ClassKind::Linear || linear_spec.linear_norm() != LinearNorm::L2)
    throw ContractError("ridge equivalence needs the L2 linear class");
  if (!pop.source_outcomes()) throw ContractError("ridge equivalence needs source outcomes");
  const Eigen::VectorXd& y = *pop.source_outcomes();
  const Eigen::VectorXd& p = pop.source_masses();

  const DualProblem problem(linear_spec, pop);
  const DualSolution sol = problem.Solve(mu);
  RidgeEquivalence out;
  out.dual_estimate = p.dot(sol.weights.values().cwiseProduct(y));
  out.ridge_penalty = *sol.ridge_penalty;
  out.interior = out.ridge_penalty == 0.0;
  if (!std::isfinite(out.ridge_penalty)) {
    out.ridge_estimate = p.dot(y);
    return out;
  }

  // Normal equations of sum_i p_i (y_i - a - g_i'beta)^2 + lambda ||beta||^2.
  const Eigen::MatrixXd& gp = problem.bound_class().source_features();
  const Eigen::MatrixXd& gq = problem.bound_class().target_features();
  const Eigen::Index k = gp.cols();
  Eigen::MatrixXd design(gp.rows(), k + 1);
  design.col(0).setOnes();
  design.rightCols(k) = gp;
  Eigen::MatrixXd normal = design.transpose() * p.asDiagonal() * design;
  normal.bottomRightCorner(k, k).diagonal().array() += out.ridge_penalty;
  const Eigen::VectorXd theta = normal.ldlt().solve(design.transpose() * p.cwiseProduct(y));
  const Eigen::VectorXd target_mean = gq.transpose() * pop.target_masses();
  out.ridge_estimate = theta[0] + target_mean.dot(theta.tail(k));
  return out;
}

}  // namespace balw
