#pragma once

#include <Eigen/Dense>

#include <functional>

namespace balw {

/// maximize c'z - (scale/2) z' S z  subject to ||z||_2 <= radius, for symmetric PSD S.
///
/// S is given by its eigendecomposition so that a sweep over `scale` reuses one
/// factorization. The boundary case is the secular equation ||(scale S + nu I)^-1 c|| = radius,
/// solved by safeguarded Newton on 1/||z(nu)||.
class BallQuadratic {
 public:
  explicit BallQuadratic(const Eigen::MatrixXd& curvature);

  struct Solution {
    Eigen::VectorXd z;
    /// Multiplier nu of the ball constraint: c - scale*S*z - nu*z = 0.
    double multiplier = 0.0;
    bool on_boundary = false;
  };

  Solution Maximize(const Eigen::VectorXd& c, double scale, double radius) const;

  const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }

 private:
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
};

/// Accelerated projected gradient ascent (FISTA with backtracking and adaptive restart).
struct ProjectedGradientOptions {
  /// Stop when the gradient-mapping norm ||x - P(x + t g)|| / t drops below this.
  double tolerance = 1e-7;
  int max_iterations = 10000;
  double initial_step = 1.0;
};

struct ProjectedGradientResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// `objective(x, grad)` returns F(x) and writes its gradient; `project` maps onto the
/// feasible set. F must be concave with Lipschitz gradient.
ProjectedGradientResult MaximizeProjected(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& objective,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& project,
    const Eigen::VectorXd& start, const ProjectedGradientOptions& options);

/// Euclidean projections used by the solvers.
Eigen::VectorXd ProjectL2Ball(const Eigen::VectorXd& v, double radius);
Eigen::VectorXd ProjectL1Ball(const Eigen::VectorXd& v, double radius);
Eigen::VectorXd ProjectBox(const Eigen::VectorXd& v, double bound);

}  // namespace balw
