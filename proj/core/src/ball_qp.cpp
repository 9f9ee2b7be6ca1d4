#include "balw/ball_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "balw/errors.hpp"

namespace balw {

BallQuadratic::BallQuadratic(const Eigen::MatrixXd& curvature) {
  if (curvature.rows() != curvature.cols()) throw DimensionError("curvature must be square");
  if (curvature.rows() == 0) return;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(curvature);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  eigenvalues_ = eig.eigenvalues().cwiseMax(0.0);
  eigenvectors_ = eig.eigenvectors();
}

BallQuadratic::Solution BallQuadratic::Maximize(const Eigen::VectorXd& c, double scale,
                                                double radius) const {
  if (c.size() != eigenvalues_.size()) throw DimensionError("linear term has wrong length");
  if (!(radius > 0.0)) throw ContractError("ball radius must be positive");
  if (scale < 0.0) throw ContractError("curvature scale must be non-negative");

  Solution out;
  const Eigen::Index n = c.size();
  const double c_norm = c.norm();
  if (n == 0 || c_norm == 0.0) {
    out.z = Eigen::VectorXd::Zero(n);
    return out;
  }

  const Eigen::VectorXd rotated = eigenvectors_.transpose() * c;
  const Eigen::VectorXd h = scale * eigenvalues_;
  const double h_max = h.maxCoeff();
  const double zero_curvature = std::max(h_max, 0.0) * 1e-13;

  // Interior candidate: the min-norm stationary point, if no flat direction carries signal.
  bool unbounded = false;
  Eigen::VectorXd interior = Eigen::VectorXd::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (h[k] <= zero_curvature) {
      if (std::abs(rotated[k]) > 1e-12 * c_norm) unbounded = true;
    } else {
      interior[k] = rotated[k] / h[k];
    }
  }
  if (!unbounded && interior.norm() <= radius) {
    out.z = eigenvectors_ * interior;
    return out;
  }

  // Boundary: find nu > 0 with ||z(nu)|| = radius, z_k(nu) = rotated_k / (h_k + nu).
  double lo = std::max(0.0, c_norm / radius - h_max);
  double hi = c_norm / radius;
  double nu = hi;
  for (int iter = 0; iter < 300; ++iter) {
    const Eigen::ArrayXd denom = h.array() + nu;
    const Eigen::ArrayXd zk = rotated.array() / denom;
    const double norm = zk.matrix().norm();
    const double g = 1.0 / norm - 1.0 / radius;
    if (g > 0.0) {
      hi = std::min(hi, nu);
    } else {
      lo = std::max(lo, nu);
    }
    if (hi - lo <= 1e-15 * std::max(hi, 1e-300) || g == 0.0) break;
    const double dg = (zk.square() / denom).sum() / (norm * norm * norm);
    double next = nu - g / dg;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (next == nu) break;
    nu = next;
  }
  // nu == 0 only arises when the interior point sits on the sphere up to rounding.
  if (nu <= 0.0) nu = std::numeric_limits<double>::min();
  Eigen::VectorXd zr = (rotated.array() / (h.array() + nu)).matrix();
  const double zn = zr.norm();
  if (zn > 0.0) zr *= radius / zn;
  out.z = eigenvectors_ * zr;
  out.multiplier = nu;
  out.on_boundary = true;
  return out;
}

Eigen::VectorXd ProjectL2Ball(const Eigen::VectorXd& v, double radius) {
  const double norm = v.norm();
  if (norm <= radius) return v;
  return v * (radius / norm);
}

Eigen::VectorXd ProjectBox(const Eigen::VectorXd& v, double bound) {
  return v.cwiseMax(-bound).cwiseMin(bound);
}

Eigen::VectorXd ProjectL1Ball(const Eigen::VectorXd& v, double radius) {
  if (v.lpNorm<1>() <= radius) return v;
  std::vector<double> sorted(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) sorted[static_cast<std::size_t>(i)] = std::abs(v[i]);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cumulative += sorted[k];
    const double candidate = (cumulative - radius) / static_cast<double>(k + 1);
    if (sorted[k] > candidate) theta = candidate;
  }
  return v.unaryExpr([theta](double x) {
    const double shrunk = std::max(std::abs(x) - theta, 0.0);
    return x < 0.0 ? -shrunk : shrunk;
  });
}

ProjectedGradientResult MaximizeProjected(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& objective,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& project,
    const Eigen::VectorXd& start, const ProjectedGradientOptions& options) {
  ProjectedGradientResult result;
  Eigen::VectorXd x = project(start);
  Eigen::VectorXd grad(x.size());
  double value = objective(x, grad);
  Eigen::VectorXd y = x;
  Eigen::VectorXd grad_y = grad;
  double value_y = value;
  double momentum = 1.0;
  double step = options.initial_step;

  auto residual_at = [&](const Eigen::VectorXd& point, const Eigen::VectorXd& g, double t) {
    return (point - project(point + t * g)).norm() / t;
  };

  result.residual = residual_at(x, grad, step);
  result.converged = result.residual <= options.tolerance;
  for (int iter = 0; iter < options.max_iterations && !result.converged; ++iter) {
    result.iterations = iter + 1;
    // Backtracking on the quadratic lower model and on the local curvature along the step;
    // the second test stays meaningful when value differences reach round-off.
    Eigen::VectorXd candidate;
    Eigen::VectorXd grad_candidate(x.size());
    double value_candidate = 0.0;
    for (int bt = 0; bt < 80; ++bt) {
      candidate = project(y + step * grad_y);
      value_candidate = objective(candidate, grad_candidate);
      const Eigen::VectorXd diff = candidate - y;
      const double dd = diff.squaredNorm();
      if (dd == 0.0) break;
      const double model = value_y + grad_y.dot(diff) - dd / (2.0 * step);
      const bool value_ok = value_candidate >= model - 1e-13 * (1.0 + std::abs(value_y));
      const bool curvature_ok = (grad_y - grad_candidate).dot(diff) <= dd / step;
      if (value_ok && curvature_ok) break;
      step *= 0.5;
    }

    // Gradient-based restart: drop momentum once the step turns against the ascent direction.
    const bool restart = (y - candidate).dot(candidate - x) > 0.0;
    const Eigen::VectorXd previous = std::move(x);
    x = std::move(candidate);
    grad = grad_candidate;
    value = value_candidate;
    if (restart) {
      momentum = 1.0;
      y = x;
      grad_y = grad;
      value_y = value;
    } else {
      const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
      y = x + ((momentum - 1.0) / next_momentum) * (x - previous);
      momentum = next_momentum;
      value_y = objective(y, grad_y);
    }
    result.residual = residual_at(x, grad, step);
    result.converged = result.residual <= options.tolerance;
    step *= 1.1;
  }
  result.x = std::move(x);
  result.value = value;
  return result;
}

}  // namespace balw
