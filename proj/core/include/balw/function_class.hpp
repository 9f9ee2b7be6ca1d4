#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>

#include "balw/population.hpp"

namespace balw {

enum class ClassKind { FullInfo, Linear, Rkhs, Bounded };
enum class LinearNorm { L2, L1 };

/// How the RKHS bound B constrains the representer coefficients.
///   Squared:   alpha' K alpha <= B^2, i.e. ||f||_H <= B (bias scales linearly in B).
///   Quadratic: alpha' K alpha <= B, a constraint on the quadratic form itself.
enum class RkhsBoundConvention { Squared, Quadratic };

std::string ToString(ClassKind kind);
ClassKind ParseClassKind(const std::string& name);

/// Gaussian kernel exp(-||x1 - x2||^2 / (2 l^2)).
struct KernelSpec {
  double bandwidth = 1.0;

  double operator()(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                    const Eigen::Ref<const Eigen::RowVectorXd>& b) const;

  /// Bandwidth set to the median pairwise distance of the pooled sample.
  static KernelSpec MedianHeuristic(const Population& pop);
};

/// Declared outcome class F. All kinds are symmetric (f in F implies -f in F).
class FunctionClassSpec {
 public:
  /// Convex hull of {f0, -f0}; parameterized by t in [-1, 1] as f = t * f0.
  static FunctionClassSpec FullInfo(FunctionValues f0);
  /// {beta' g(x) : ||beta|| <= B}, with g the per-coordinate monomials up to `degree`.
  static FunctionClassSpec Linear(double bound, LinearNorm norm = LinearNorm::L2, int degree = 1);
  static FunctionClassSpec Rkhs(double bound, KernelSpec kernel = {},
                                RkhsBoundConvention convention = RkhsBoundConvention::Squared);
  /// {f : ||f||_inf <= B}.
  static FunctionClassSpec Bounded(double bound);

  ClassKind kind() const noexcept { return kind_; }
  double bound() const noexcept { return bound_; }
  const FunctionValues& f0() const;
  LinearNorm linear_norm() const noexcept { return norm_; }
  int degree() const noexcept { return degree_; }
  const KernelSpec& kernel() const noexcept { return kernel_; }
  RkhsBoundConvention convention() const noexcept { return convention_; }

  /// Radius of the RKHS ball in H-norm: B (squared convention) or sqrt(B) (quadratic).
  double rkhs_radius() const;

 private:
  FunctionClassSpec(ClassKind kind, double bound);

  ClassKind kind_;
  double bound_;
  std::optional<FunctionValues> f0_;
  LinearNorm norm_ = LinearNorm::L2;
  int degree_ = 1;
  KernelSpec kernel_;
  RkhsBoundConvention convention_ = RkhsBoundConvention::Squared;
};

/// Kind-specific coordinates of a member of F.
///   FullInfo: [t];  Linear: beta;  Rkhs: alpha over pooled rows;  Bounded: values at the
///   unique pooled points in IndexPoints order.
struct ClassParams {
  Eigen::VectorXd coefficients;
};

/// A linear functional L(f) = sum_i s_i f(x_i) + sum_j t_j f(y_j) over the two samples.
struct SignedMeasure {
  Eigen::VectorXd on_source;
  Eigen::VectorXd on_target;
};

/// The measure Q - R where dR/dP = w.
SignedMeasure TargetMinusReweighted(const Eigen::VectorXd& weights, const Population& pop);

struct SupResult {
  double value = 0.0;
  ClassParams params;
  FunctionValues maximizer;
};

/// Pooled Gram matrix, source rows first.
Eigen::MatrixXd GramMatrix(const KernelSpec& kernel, const Population& pop);

/// Whitened coordinates for an RKHS ball: K = U S U' over the eigenvalues above a relative
/// floor, features Phi = U S^(1/2). A member f = K alpha has f = Phi z with ||f||_H = ||z||
/// and alpha = U S^(-1/2) z. Rows of identical points stay identical.
struct KernelFactor {
  Eigen::MatrixXd features;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;

  Eigen::VectorXd AlphaFromCoordinates(const Eigen::VectorXd& z) const;
};

KernelFactor FactorGram(const Eigen::MatrixXd& gram, double relative_floor = 1e-12);

/// Feature matrix g(X) for the linear class (rows = points).
Eigen::MatrixXd LinearFeatures(const Eigen::MatrixXd& x, int degree);

/// B * sqrt(v' K v) for v = (w * m_P, -m_Q): the RKHS IPM between R and Q.
double MmdBias(const KernelSpec& kernel, double bound, const WeightVector& w,
               const Population& pop);

/// A function class bound to one population, with kernel and feature matrices cached.
class BoundClass {
 public:
  static constexpr double kNormTolerance = 1e-9;

  BoundClass(FunctionClassSpec spec, const Population& pop);

  const FunctionClassSpec& spec() const noexcept { return spec_; }
  const Population& population() const noexcept { return *pop_; }

  /// Pointwise values of the member described by `params`. Throws ContractError when the
  /// params violate the norm bound beyond kNormTolerance (relative).
  FunctionValues Evaluate(const ClassParams& params) const;

  /// Exact sup over F of the functional, with a maximizer.
  SupResult SupOver(const SignedMeasure& measure) const;

  /// IPM_F(Q, R) for dR/dP = w.
  double Ipm(const Eigen::VectorXd& weights) const;

  const Eigen::MatrixXd& gram() const;             // Rkhs only
  const Eigen::MatrixXd& source_features() const;  // Linear only
  const Eigen::MatrixXd& target_features() const;  // Linear only
  const PointIndex& points() const;                // Bounded only

 private:
  FunctionClassSpec spec_;
  const Population* pop_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd source_features_;
  Eigen::MatrixXd target_features_;
  PointIndex points_;
};

FunctionValues Evaluate(const FunctionClassSpec& spec, const ClassParams& params,
                        const Population& pop);
SupResult SupOverClass(const FunctionClassSpec& spec, const Population& pop,
                       const SignedMeasure& measure);

}  // namespace balw
