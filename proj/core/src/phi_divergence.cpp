#include "balw/phi_divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "balw/errors.hpp"

namespace balw {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void CheckEnvelopeInputs(const Eigen::VectorXd& f, const Population& pop, double mu) {
  if (f.size() != pop.n_source()) throw DimensionError("f must cover the source rows");
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ContractError("mu must be positive and finite");
}

double EnvelopeValue(const Eigen::VectorXd& f, const Population& pop, const PhiSpec& phi, double mu,
                     double lambda) {
  const Eigen::VectorXd& p = pop.source_masses();
  double s = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) s += p[i] * phi.ScaledConjugate(f[i] - lambda, mu);
  return lambda + s;
}

Eigen::VectorXd EnvelopeWeights(const Eigen::VectorXd& f, const PhiSpec& phi, double mu,
                                double lambda) {
  return f.unaryExpr([&](double v) { return phi.ScaledConjugateDerivative(v - lambda, mu); });
}

}  // namespace

std::string ToString(PhiFamily family) {
  switch (family) {
    case PhiFamily::Chi2: return "chi2";
    case PhiFamily::Kl: return "kl";
    case PhiFamily::NonNegChi2: return "chi2_nonneg";
  }
  return "unknown";
}

PhiFamily ParsePhiFamily(const std::string& name) {
  if (name == "chi2") return PhiFamily::Chi2;
  if (name == "kl") return PhiFamily::Kl;
  if (name == "chi2_nonneg" || name == "nonneg_chi2") return PhiFamily::NonNegChi2;
  throw ContractError("unknown phi family '" + name + "' (expected chi2, kl or chi2_nonneg)");
}

double PhiSpec::Phi(double x) const {
  switch (family) {
    case PhiFamily::Chi2: return x * x - 1.0;
    case PhiFamily::Kl:
      if (x < 0.0) return kInf;
      return x == 0.0 ? 1.0 : x * std::log(x) - x + 1.0;
    case PhiFamily::NonNegChi2: return x < 0.0 ? kInf : x * x - 1.0;
  }
  return kInf;
}

double PhiSpec::Conjugate(double y) const {
  switch (family) {
    case PhiFamily::Chi2: return 0.25 * y * y + 1.0;
    case PhiFamily::Kl: return std::expm1(y);
    case PhiFamily::NonNegChi2: {
      const double pos = std::max(y, 0.0);
      return 0.25 * pos * pos + 1.0;
    }
  }
  return kInf;
}

double PhiSpec::ConjugateDerivative(double y) const {
  switch (family) {
    case PhiFamily::Chi2: return 0.5 * y;
    case PhiFamily::Kl: return std::exp(y);
    case PhiFamily::NonNegChi2: return 0.5 * std::max(y, 0.0);
  }
  return kInf;
}

double PhiSpec::ScaledConjugate(double y, double mu) const { return Conjugate(mu * y) / mu; }

double PhiSpec::ScaledConjugateDerivative(double y, double mu) const {
  return ConjugateDerivative(mu * y);
}

double PhiDivergence(const WeightVector& w, const Population& pop, const PhiSpec& phi) {
  if (w.size() != pop.n_source()) throw DimensionError("weight length != n_P");
  const Eigen::VectorXd& p = pop.source_masses();
  double s = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double v = phi.Phi(w[i]);
    if (std::isinf(v)) return kInf;
    s += p[i] * v;
  }
  return s;
}

LambdaEnvelope ComputeLambdaEnvelope(const Eigen::VectorXd& f, const Population& pop,
                                     const PhiSpec& phi, double mu) {
  CheckEnvelopeInputs(f, pop, mu);
  const Eigen::VectorXd& p = pop.source_masses();
  double lambda = 0.0;
  switch (phi.family) {
    case PhiFamily::Chi2: lambda = p.dot(f) - 2.0 / mu; break;
    case PhiFamily::Kl: {
      // lambda = (1/mu) log E_P exp(mu f), evaluated stably.
      const double top = f.maxCoeff();
      const double s = p.dot((mu * (f.array() - top)).exp().matrix());
      lambda = top + std::log(s) / mu;
      break;
    }
    case PhiFamily::NonNegChi2: {
      // Solve E_P (f - lambda)_+ = 2/mu; the active set is a prefix of f sorted descending.
      std::vector<Eigen::Index> order(static_cast<std::size_t>(f.size()));
      std::iota(order.begin(), order.end(), Eigen::Index{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](Eigen::Index a, Eigen::Index b) { return f[a] > f[b]; });
      const double target = 2.0 / mu;
      double mass = 0.0, moment = 0.0;
      lambda = f[order.back()] - target;
      for (std::size_t k = 0; k < order.size(); ++k) {
        mass += p[order[k]];
        moment += p[order[k]] * f[order[k]];
        const double candidate = (moment - target) / mass;
        const double next = k + 1 < order.size() ? f[order[k + 1]] : -kInf;
        if (candidate >= next && candidate < f[order[k]]) {
          lambda = candidate;
          break;
        }
      }
      break;
    }
  }
  return LambdaEnvelope{lambda, EnvelopeValue(f, pop, phi, mu, lambda),
                        EnvelopeWeights(f, phi, mu, lambda)};
}

LambdaEnvelope ComputeLambdaEnvelopeBisection(const Eigen::VectorXd& f, const Population& pop,
                                              const PhiSpec& phi, double mu) {
  CheckEnvelopeInputs(f, pop, mu);
  const Eigen::VectorXd& p = pop.source_masses();
  auto derivative = [&](double lambda) { return 1.0 - p.dot(EnvelopeWeights(f, phi, mu, lambda)); };
  const double range = f.maxCoeff() - f.minCoeff();
  const double pad = 10.0 * (1.0 + range) / mu + 1.0;
  double lo = f.minCoeff() - pad;
  double hi = f.maxCoeff() + pad;
  while (derivative(lo) > 0.0) lo -= 2.0 * (hi - lo);
  while (derivative(hi) < 0.0) hi += 2.0 * (hi - lo);
  for (int iter = 0; iter < 400; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (derivative(mid) < 0.0 ? lo : hi) = mid;
  }
  const double lambda = 0.5 * (lo + hi);
  return LambdaEnvelope{lambda, EnvelopeValue(f, pop, phi, mu, lambda),
                        EnvelopeWeights(f, phi, mu, lambda)};
}

DualSolution SolveDualPhi(const FunctionClassSpec& spec, const Population& pop, const PhiSpec& phi,
                          double mu, const SolverOptions& options) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ContractError("mu must be positive and finite");
  const BoundClass bound(spec, pop);
  const Eigen::VectorXd& q = pop.target_masses();
  const Eigen::VectorXd& p = pop.source_masses();

  // Every class is parameterized linearly: f_P = A x, f_Q = C x, over a convex set.
  Eigen::MatrixXd a_map, c_map;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> project;
  std::optional<KernelFactor> kernel;
  switch (spec.kind()) {
    case ClassKind::FullInfo:
      a_map = spec.f0().on_source;
      c_map = spec.f0().on_target;
      project = [](const Eigen::VectorXd& v) { return ProjectBox(v, 1.0); };
      break;
    case ClassKind::Linear: {
      a_map = bound.source_features();
      c_map = bound.target_features();
      const double b = spec.bound();
      if (spec.linear_norm() == LinearNorm::L2) {
        project = [b](const Eigen::VectorXd& v) { return ProjectL2Ball(v, b); };
      } else {
        project = [b](const Eigen::VectorXd& v) { return ProjectL1Ball(v, b); };
      }
      break;
    }
    case ClassKind::Rkhs: {
      kernel.emplace(FactorGram(bound.gram()));
      a_map = kernel->features.topRows(pop.n_source());
      c_map = kernel->features.bottomRows(pop.n_target());
      const double r = spec.rkhs_radius();
      project = [r](const Eigen::VectorXd& v) { return ProjectL2Ball(v, r); };
      break;
    }
    case ClassKind::Bounded: {
      const PointIndex& points = bound.points();
      a_map = Eigen::MatrixXd::Zero(pop.n_source(), points.n_unique);
      c_map = Eigen::MatrixXd::Zero(pop.n_target(), points.n_unique);
      for (std::size_t i = 0; i < points.source_ids.size(); ++i)
        a_map(static_cast<Eigen::Index>(i), points.source_ids[i]) = 1.0;
      for (std::size_t j = 0; j < points.target_ids.size(); ++j)
        c_map(static_cast<Eigen::Index>(j), points.target_ids[j]) = 1.0;
      const double b = spec.bound();
      project = [b](const Eigen::VectorXd& v) { return ProjectBox(v, b); };
      break;
    }
  }

  const Eigen::VectorXd target_moment = c_map.transpose() * q;
  auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    const Eigen::VectorXd fp = a_map * x;
    const LambdaEnvelope env = ComputeLambdaEnvelope(fp, pop, phi, mu);
    grad = target_moment - a_map.transpose() * p.cwiseProduct(env.weights);
    return target_moment.dot(x) - env.value;
  };
  const double scale = std::max(a_map.cwiseAbs2().rowwise().sum().maxCoeff(), 1e-12);
  ProjectedGradientOptions pg{options.tolerance, options.max_iterations, 1.0 / (mu * scale)};
  const ProjectedGradientResult res =
      MaximizeProjected(objective, project, Eigen::VectorXd::Zero(a_map.cols()), pg);
  if (!res.converged)
    throw ConvergenceError("phi-divergence dual did not converge", res.residual, res.value);

  FunctionValues f{a_map * res.x, c_map * res.x};
  const LambdaEnvelope env = ComputeLambdaEnvelope(f.on_source, pop, phi, mu);
  ClassParams params{spec.kind() == ClassKind::Rkhs ? kernel->AlphaFromCoordinates(res.x) : res.x};
  WeightVector w(env.weights, pop);
  const double delta = bound.Ipm(w.values());
  return DualSolution{mu,        std::move(params), std::move(f),   env.lambda_star, delta,
                      res.value, std::move(w),      res.iterations, res.residual,    std::nullopt};
}

}  // namespace balw
