#pragma once

#include <Eigen/Dense>

#include <string>

#include "balw/dual_solver.hpp"

namespace balw {

enum class PhiFamily {
  /// phi(x) = x^2 - 1: the variance penalty, weights may be negative.
  Chi2,
  /// phi(x) = x log x - x + 1.
  Kl,
  /// phi(x) = x^2 - 1 on x >= 0, +inf for x < 0.
  NonNegChi2,
};

std::string ToString(PhiFamily family);
PhiFamily ParsePhiFamily(const std::string& name);

/// A divergence generator with its convex conjugate.
struct PhiSpec {
  PhiFamily family = PhiFamily::Chi2;

  /// phi(x); +inf outside the domain.
  double Phi(double x) const;
  /// phi*(y) = sup_x x y - phi(x).
  double Conjugate(double y) const;
  double ConjugateDerivative(double y) const;
  /// phi*_mu(y) = phi*(mu y) / mu.
  double ScaledConjugate(double y, double mu) const;
  /// (phi*_mu)'(y) = (phi*)'(mu y).
  double ScaledConjugateDerivative(double y, double mu) const;
};

/// D_phi(R || P) = E_P[phi(w)]; +inf when some w lies outside the domain of phi.
double PhiDivergence(const WeightVector& w, const Population& pop, const PhiSpec& phi);

/// Lambda(f) = min_lambda lambda + E_P[phi*_mu(f - lambda)].
struct LambdaEnvelope {
  double lambda_star = 0.0;
  double value = 0.0;
  /// (phi*_mu)'(f - lambda*) over the source rows; E_P of it is one.
  Eigen::VectorXd weights;
};

/// Closed form for Chi2 and KL, exact active-set solve for NonNegChi2.
LambdaEnvelope ComputeLambdaEnvelope(const Eigen::VectorXd& f_on_source, const Population& pop,
                                     const PhiSpec& phi, double mu);

/// The same minimization by bisection on the derivative, for any family.
LambdaEnvelope ComputeLambdaEnvelopeBisection(const Eigen::VectorXd& f_on_source,
                                              const Population& pop, const PhiSpec& phi, double mu);

/// Maximizes E_Q f - Lambda(f) over F by projected gradient. Requires mu > 0.
/// The returned delta is the exact IPM of the induced weights.
DualSolution SolveDualPhi(const FunctionClassSpec& spec, const Population& pop, const PhiSpec& phi,
                          double mu, const SolverOptions& options = {});

}  // namespace balw
