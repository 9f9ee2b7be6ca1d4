#include "balw/function_class.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "balw/errors.hpp"

namespace balw {
namespace {

double SignOrPlus(double x) { return x < 0.0 ? -1.0 : 1.0; }

void CheckBound(double bound) {
  if (!(bound > 0.0) || !std::isfinite(bound)) {
    throw ContractError("function class bound B must be positive and finite");
  }
}

void CheckMeasure(const SignedMeasure& m, const Population& pop) {
  if (m.on_source.size() != pop.n_source() || m.on_target.size() != pop.n_target()) {
    throw DimensionError("signed measure does not match population sizes");
  }
}

}  // namespace

std::string ToString(ClassKind kind) {
  switch (kind) {
    case ClassKind::FullInfo: return "fullinfo";
    case ClassKind::Linear: return "linear";
    case ClassKind::Rkhs: return "rkhs";
    case ClassKind::Bounded: return "bounded";
  }
  return "unknown";
}

ClassKind ParseClassKind(const std::string& name) {
  if (name == "fullinfo") return ClassKind::FullInfo;
  if (name == "linear") return ClassKind::Linear;
  if (name == "rkhs") return ClassKind::Rkhs;
  if (name == "bounded") return ClassKind::Bounded;
  throw ContractError("unknown function class '" + name + "'");
}

double KernelSpec::operator()(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                              const Eigen::Ref<const Eigen::RowVectorXd>& b) const {
  return std::exp(-(a - b).squaredNorm() / (2.0 * bandwidth * bandwidth));
}

KernelSpec KernelSpec::MedianHeuristic(const Population& pop) {
  const Eigen::MatrixXd x = pop.pooled_covariates();
  std::vector<double> distances;
  distances.reserve(static_cast<std::size_t>(x.rows() * (x.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < x.rows(); ++j) {
      const double d = (x.row(i) - x.row(j)).norm();
      if (d > 0.0) distances.push_back(d);
    }
  }
  if (distances.empty()) return KernelSpec{1.0};
  auto mid = distances.begin() + static_cast<std::ptrdiff_t>(distances.size() / 2);
  std::nth_element(distances.begin(), mid, distances.end());
  return KernelSpec{*mid};
}

FunctionClassSpec::FunctionClassSpec(ClassKind kind, double bound) : kind_(kind), bound_(bound) {
  CheckBound(bound);
}

FunctionClassSpec FunctionClassSpec::FullInfo(FunctionValues f0) {
  if (!f0.on_source.allFinite() || !f0.on_target.allFinite()) {
    throw ContractError("f0 must be finite");
  }
  FunctionClassSpec spec(ClassKind::FullInfo, 1.0);
  spec.f0_ = std::move(f0);
  return spec;
}

FunctionClassSpec FunctionClassSpec::Linear(double bound, LinearNorm norm, int degree) {
  if (degree < 1) throw ContractError("linear feature degree must be >= 1");
  FunctionClassSpec spec(ClassKind::Linear, bound);
  spec.norm_ = norm;
  spec.degree_ = degree;
  return spec;
}

FunctionClassSpec FunctionClassSpec::Rkhs(double bound, KernelSpec kernel,
                                          RkhsBoundConvention convention) {
  if (!(kernel.bandwidth > 0.0) || !std::isfinite(kernel.bandwidth)) {
    throw ContractError("kernel bandwidth must be positive and finite");
  }
  FunctionClassSpec spec(ClassKind::Rkhs, bound);
  spec.kernel_ = kernel;
  spec.convention_ = convention;
  return spec;
}

FunctionClassSpec FunctionClassSpec::Bounded(double bound) {
  return FunctionClassSpec(ClassKind::Bounded, bound);
}

const FunctionValues& FunctionClassSpec::f0() const {
  if (!f0_) throw ContractError("f0 is only defined for the full-information class");
  return *f0_;
}

double FunctionClassSpec::rkhs_radius() const {
  return convention_ == RkhsBoundConvention::Squared ? bound_ : std::sqrt(bound_);
}

SignedMeasure TargetMinusReweighted(const Eigen::VectorXd& weights, const Population& pop) {
  if (weights.size() != pop.n_source()) throw DimensionError("weight length != n_P");
  return SignedMeasure{-pop.source_masses().cwiseProduct(weights), pop.target_masses()};
}

Eigen::MatrixXd GramMatrix(const KernelSpec& kernel, const Population& pop) {
  const Eigen::MatrixXd x = pop.pooled_covariates();
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      k(i, j) = kernel(x.row(i), x.row(j));
      k(j, i) = k(i, j);
    }
  }
  return k;
}

KernelFactor FactorGram(const Eigen::MatrixXd& gram, double relative_floor) {
  const Eigen::Index n = gram.rows();
  KernelFactor factor;
  if (n == 0) return factor;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw NumericError("Gram eigendecomposition failed");
  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  const double top = values[n - 1];
  if (!(top > 0.0)) throw NumericError("Gram matrix has no positive eigenvalue");
  if (values[0] < -1e-8 * top) throw NumericError("Gram matrix is not positive semidefinite");
  Eigen::Index first = 0;
  while (first < n && values[first] <= relative_floor * top) ++first;
  const Eigen::Index k = n - first;
  factor.eigenvalues = values.tail(k);
  factor.eigenvectors = eig.eigenvectors().rightCols(k);
  factor.features = factor.eigenvectors * factor.eigenvalues.cwiseSqrt().asDiagonal();
  return factor;
}

Eigen::VectorXd KernelFactor::AlphaFromCoordinates(const Eigen::VectorXd& z) const {
  return eigenvectors * z.cwiseQuotient(eigenvalues.cwiseSqrt());
}

Eigen::MatrixXd LinearFeatures(const Eigen::MatrixXd& x, int degree) {
  const Eigen::Index d = x.cols();
  Eigen::MatrixXd g(x.rows(), d * degree);
  for (int p = 1; p <= degree; ++p) {
    g.middleCols((p - 1) * d, d) = x.array().pow(static_cast<double>(p)).matrix();
  }
  return g;
}

namespace {

double KernelQuadraticForm(const Eigen::MatrixXd& gram, const Eigen::VectorXd& v) {
  const double q = v.dot(gram * v);
  if (q < -1e-12) throw NumericError("negative kernel quadratic form; Gram matrix is not PSD");
  return std::max(q, 0.0);
}

}  // namespace

double MmdBias(const KernelSpec& kernel, double bound, const WeightVector& w,
               const Population& pop) {
  CheckBound(bound);
  if (w.size() != pop.n_source()) throw DimensionError("weight length != n_P");
  Eigen::VectorXd v(pop.n_pooled());
  v << w.values().cwiseProduct(pop.source_masses()), -pop.target_masses();
  return bound * std::sqrt(KernelQuadraticForm(GramMatrix(kernel, pop), v));
}

BoundClass::BoundClass(FunctionClassSpec spec, const Population& pop)
    : spec_(std::move(spec)), pop_(&pop) {
  switch (spec_.kind()) {
    case ClassKind::FullInfo:
      if (spec_.f0().on_source.size() != pop.n_source() ||
          spec_.f0().on_target.size() != pop.n_target()) {
        throw DimensionError("f0 does not match population sizes");
      }
      break;
    case ClassKind::Linear:
      source_features_ = LinearFeatures(pop.source_covariates(), spec_.degree());
      target_features_ = LinearFeatures(pop.target_covariates(), spec_.degree());
      break;
    case ClassKind::Rkhs: gram_ = GramMatrix(spec_.kernel(), pop); break;
    case ClassKind::Bounded: points_ = IndexPoints(pop); break;
  }
}

const Eigen::MatrixXd& BoundClass::gram() const {
  if (spec_.kind() != ClassKind::Rkhs) throw ContractError("gram() requires the RKHS class");
  return gram_;
}

const Eigen::MatrixXd& BoundClass::source_features() const {
  if (spec_.kind() != ClassKind::Linear) throw ContractError("features require the linear class");
  return source_features_;
}

const Eigen::MatrixXd& BoundClass::target_features() const {
  if (spec_.kind() != ClassKind::Linear) throw ContractError("features require the linear class");
  return target_features_;
}

const PointIndex& BoundClass::points() const {
  if (spec_.kind() != ClassKind::Bounded)
    throw ContractError("points() requires the bounded class");
  return points_;
}

FunctionValues BoundClass::Evaluate(const ClassParams& params) const {
  const Eigen::VectorXd& c = params.coefficients;
  const double slack = 1.0 + kNormTolerance;
  switch (spec_.kind()) {
    case ClassKind::FullInfo: {
      if (c.size() != 1) throw DimensionError("full-information params are a single scalar t");
      if (std::abs(c[0]) > slack)
        throw ContractError("|t| exceeds 1 for the full-information hull");
      return FunctionValues{c[0] * spec_.f0().on_source, c[0] * spec_.f0().on_target};
    }
    case ClassKind::Linear: {
      if (c.size() != source_features_.cols()) throw DimensionError("beta length != feature count");
      const double norm = spec_.linear_norm() == LinearNorm::L2 ? c.norm() : c.lpNorm<1>();
      if (norm > spec_.bound() * slack) throw ContractError("beta violates the norm bound");
      return FunctionValues{source_features_ * c, target_features_ * c};
    }
    case ClassKind::Rkhs: {
      if (c.size() != pop_->n_pooled()) throw DimensionError("alpha length != n_P + n_Q");
      const Eigen::VectorXd f = gram_ * c;
      const double r = spec_.rkhs_radius();
      if (c.dot(f) > r * r * slack + 1e-12) throw ContractError("alpha violates the RKHS bound");
      return FunctionValues{f.head(pop_->n_source()), f.tail(pop_->n_target())};
    }
    case ClassKind::Bounded: {
      if (c.size() != points_.n_unique) throw DimensionError("values length != unique points");
      if (c.lpNorm<Eigen::Infinity>() > spec_.bound() * slack) {
        throw ContractError("values exceed the sup-norm bound");
      }
      FunctionValues out{Eigen::VectorXd(pop_->n_source()), Eigen::VectorXd(pop_->n_target())};
      for (Eigen::Index i = 0; i < pop_->n_source(); ++i) {
        out.on_source[i] = c[points_.source_ids[static_cast<std::size_t>(i)]];
      }
      for (Eigen::Index j = 0; j < pop_->n_target(); ++j) {
        out.on_target[j] = c[points_.target_ids[static_cast<std::size_t>(j)]];
      }
      return out;
    }
  }
  throw ContractError("unknown class kind");
}

SupResult BoundClass::SupOver(const SignedMeasure& measure) const {
  CheckMeasure(measure, *pop_);
  SupResult result;
  switch (spec_.kind()) {
    case ClassKind::FullInfo: {
      const double a =
          measure.on_source.dot(spec_.f0().on_source) + measure.on_target.dot(spec_.f0().on_target);
      result.value = std::abs(a);
      result.params.coefficients = Eigen::VectorXd::Constant(1, SignOrPlus(a));
      break;
    }
    case ClassKind::Linear: {
      const Eigen::VectorXd moment = source_features_.transpose() * measure.on_source +
                                     target_features_.transpose() * measure.on_target;
      Eigen::VectorXd beta = Eigen::VectorXd::Zero(moment.size());
      if (spec_.linear_norm() == LinearNorm::L2) {
        const double norm = moment.norm();
        result.value = spec_.bound() * norm;
        if (norm > 0.0) beta = spec_.bound() * moment / norm;
      } else {
        Eigen::Index j = 0;
        const double top = moment.cwiseAbs().maxCoeff(&j);
        result.value = spec_.bound() * top;
        beta[j] = spec_.bound() * SignOrPlus(moment[j]);
      }
      result.params.coefficients = std::move(beta);
      break;
    }
    case ClassKind::Rkhs: {
      Eigen::VectorXd v(pop_->n_pooled());
      v << measure.on_source, measure.on_target;
      const double q = KernelQuadraticForm(gram_, v);
      const double r = spec_.rkhs_radius();
      result.value = r * std::sqrt(q);
      result.params.coefficients =
          q > 0.0 ? Eigen::VectorXd(r * v / std::sqrt(q)) : Eigen::VectorXd::Zero(v.size());
      break;
    }
    case ClassKind::Bounded: {
      Eigen::VectorXd aggregated = Eigen::VectorXd::Zero(points_.n_unique);
      for (Eigen::Index i = 0; i < pop_->n_source(); ++i) {
        aggregated[points_.source_ids[static_cast<std::size_t>(i)]] += measure.on_source[i];
      }
      for (Eigen::Index j = 0; j < pop_->n_target(); ++j) {
        aggregated[points_.target_ids[static_cast<std::size_t>(j)]] += measure.on_target[j];
      }
      result.value = spec_.bound() * aggregated.lpNorm<1>();
      result.params.coefficients =
          aggregated.unaryExpr([b = spec_.bound()](double a) { return b * SignOrPlus(a); });
      break;
    }
  }
  result.maximizer = Evaluate(result.params);
  return result;
}

double BoundClass::Ipm(const Eigen::VectorXd& weights) const {
  return SupOver(TargetMinusReweighted(weights, *pop_)).value;
}

FunctionValues Evaluate(const FunctionClassSpec& spec, const ClassParams& params,
                        const Population& pop) {
  return BoundClass(spec, pop).Evaluate(params);
}

SupResult SupOverClass(const FunctionClassSpec& spec, const Population& pop,
                       const SignedMeasure& measure) {
  return BoundClass(spec, pop).SupOver(measure);
}

}  // namespace balw
