#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "balw/errors.hpp"
#include "balw/function_class.hpp"
#include "instances.hpp"

namespace balw {
namespace {

Population TwoPoint() {
  Eigen::MatrixXd x(2, 1);
  x << 0.0, 1.0;
  Eigen::VectorXd p(2), q(2);
  p << 0.5, 0.5;
  q << 0.25, 0.75;
  return Population(x, x, p, q);
}

FunctionValues TwoPointF0() {
  Eigen::VectorXd f(2);
  f << 0.0, 1.0;
  return {f, f};
}

Population SinglePoints(double source_x, double target_x) {
  Eigen::MatrixXd xs(1, 1), xt(1, 1);
  xs << source_x;
  xt << target_x;
  return Population::Uniform(xs, xt);
}

double Functional(const SignedMeasure& m, const FunctionValues& f) {
  return m.on_source.dot(f.on_source) + m.on_target.dot(f.on_target);
}

// Independent Gram matrix built from the kernel formula.
Eigen::MatrixXd DirectGram(const Population& pop, double bandwidth) {
  const Eigen::MatrixXd x = pop.pooled_covariates();
  Eigen::MatrixXd k(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.rows(); ++j)
      k(i, j) = std::exp(-(x.row(i) - x.row(j)).squaredNorm() / (2 * bandwidth * bandwidth));
  return k;
}

TEST(ClassSpec, NamesAndValidation) {
  EXPECT_EQ(ParseClassKind("fullinfo"), ClassKind::FullInfo);
  EXPECT_EQ(ParseClassKind("linear"), ClassKind::Linear);
  EXPECT_EQ(ParseClassKind("rkhs"), ClassKind::Rkhs);
  EXPECT_EQ(ParseClassKind("bounded"), ClassKind::Bounded);
  for (ClassKind k : {ClassKind::FullInfo, ClassKind::Linear, ClassKind::Rkhs, ClassKind::Bounded})
    EXPECT_EQ(ParseClassKind(ToString(k)), k);
  EXPECT_THROW(ParseClassKind("lipschitz"), ContractError);
  EXPECT_THROW(FunctionClassSpec::Bounded(0.0), ContractError);
  EXPECT_THROW(FunctionClassSpec::Bounded(-1.0), ContractError);
  EXPECT_THROW(FunctionClassSpec::Linear(INFINITY), ContractError);
  EXPECT_THROW(FunctionClassSpec::Linear(1.0, LinearNorm::L2, 0), ContractError);
  EXPECT_THROW(FunctionClassSpec::Rkhs(1.0, KernelSpec{0.0}), ContractError);
  EXPECT_THROW(FunctionClassSpec::Bounded(1.0).f0(), ContractError);
}

TEST(ClassSpec, RkhsRadiusConventions) {
  EXPECT_DOUBLE_EQ(FunctionClassSpec::Rkhs(4.0).rkhs_radius(), 4.0);
  EXPECT_DOUBLE_EQ(
      FunctionClassSpec::Rkhs(4.0, KernelSpec{}, RkhsBoundConvention::Quadratic).rkhs_radius(),
      2.0);
}

TEST(Kernel, GramHandValues) {
  const double l = 0.7;
  const KernelSpec kernel{l};
  Eigen::RowVectorXd a(2), b(2);
  a << 0.0, 0.0;
  b << l, l;  // distance l * sqrt(2)
  EXPECT_DOUBLE_EQ(kernel(a, a), 1.0);
  EXPECT_NEAR(kernel(a, b), std::exp(-1.0), 1e-15);

  const Eigen::MatrixXd one = GramMatrix(KernelSpec{}, SinglePoints(0.0, 0.0));
  ASSERT_EQ(one.rows(), 2);
  EXPECT_EQ(one(0, 1), 1.0);
}

TEST(Kernel, GramIsSymmetricPsdAndMatchesFormula) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Population pop = testing::RandomShiftedPopulation(rng, 6, 5, 3, 1.0);
    const double l = testing::Uniform(rng, 0.3, 2.0);
    const Eigen::MatrixXd k = GramMatrix(KernelSpec{l}, pop);
    EXPECT_EQ((k - k.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_TRUE((k.diagonal().array() == 1.0).all());
    EXPECT_LT((k - DirectGram(pop, l)).cwiseAbs().maxCoeff(), 1e-15);
    const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k).eigenvalues();
    EXPECT_GT(eig.minCoeff(), -1e-10);
  }
}

TEST(Kernel, MedianHeuristic) {
  Eigen::MatrixXd xs(2, 1), xt(1, 1);
  xs << 0.0, 1.0;
  xt << 3.0;
  // Pairwise distances 1, 2, 3.
  EXPECT_DOUBLE_EQ(KernelSpec::MedianHeuristic(Population::Uniform(xs, xt)).bandwidth, 2.0);
  EXPECT_DOUBLE_EQ(KernelSpec::MedianHeuristic(SinglePoints(1.0, 1.0)).bandwidth, 1.0);
}

TEST(FactorGram, ReconstructsGramAndKeepsDuplicatesIdentical) {
  Eigen::MatrixXd xs(3, 1), xt(2, 1);
  xs << 0.0, 0.5, 0.0;
  xt << 0.5, 2.0;
  const Population pop = Population::Uniform(xs, xt);
  const Eigen::MatrixXd k = GramMatrix(KernelSpec{}, pop);
  const KernelFactor factor = FactorGram(k);
  EXPECT_LT((factor.features * factor.features.transpose() - k).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(factor.features.cols(), 3) << "two duplicated points leave rank 3";
  EXPECT_LT((factor.features.row(0) - factor.features.row(2)).norm(), 1e-14);
  EXPECT_LT((factor.features.row(1) - factor.features.row(3)).norm(), 1e-14);

  Eigen::VectorXd z(3);
  z << 0.3, -0.2, 0.1;
  const Eigen::VectorXd alpha = factor.AlphaFromCoordinates(z);
  EXPECT_LT((k * alpha - factor.features * z).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(alpha.dot(k * alpha), z.squaredNorm(), 1e-10);
}

TEST(FactorGram, RejectsIndefiniteMatrices) {
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(FactorGram(bad), NumericError);
  EXPECT_THROW(FactorGram(Eigen::MatrixXd::Zero(2, 2)), NumericError);
}

TEST(LinearFeatures, MonomialsByDegree) {
  Eigen::MatrixXd x(2, 2);
  x << 1.0, 2.0, -3.0, 0.5;
  const Eigen::MatrixXd g = LinearFeatures(x, 2);
  ASSERT_EQ(g.cols(), 4);
  EXPECT_EQ(g(1, 0), -3.0);
  EXPECT_EQ(g(0, 1), 2.0);
  EXPECT_EQ(g(1, 2), 9.0);
  EXPECT_EQ(g(1, 3), 0.25);
}

TEST(Evaluate, RepresenterExamples) {
  Eigen::MatrixXd xs(3, 1), xt(1, 1);
  xs << 0.0, 1.0, 2.0;
  xt << 1.0;
  const Population pop = Population::Uniform(xs, xt);

  const FunctionValues zero =
      Evaluate(FunctionClassSpec::Linear(1.0), ClassParams{Eigen::VectorXd::Zero(1)}, pop);
  EXPECT_EQ(zero.on_source.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(zero.on_target[0], 0.0);

  const FunctionValues identity =
      Evaluate(FunctionClassSpec::Linear(1.0), ClassParams{Eigen::VectorXd::Ones(1)}, pop);
  EXPECT_EQ(identity.on_source, xs.col(0));

  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(4);
  e1[0] = 1.0;
  const FunctionValues rk = Evaluate(FunctionClassSpec::Rkhs(1.0), ClassParams{e1}, pop);
  const Eigen::MatrixXd k = DirectGram(pop, 1.0);
  for (Eigen::Index j = 0; j < 3; ++j) EXPECT_NEAR(rk.on_source[j], k(0, j), 1e-15);
  EXPECT_NEAR(rk.on_target[0], k(0, 3), 1e-15);

  Eigen::VectorXd t(1);
  t << -0.5;
  const FunctionValues half =
      Evaluate(FunctionClassSpec::FullInfo(TwoPointF0()), ClassParams{t}, TwoPoint());
  EXPECT_EQ(half.on_source[1], -0.5);
}

TEST(Evaluate, BoundedUsesUniquePoints) {
  const Population pop = TwoPoint();
  Eigen::VectorXd v(2);
  v << 0.4, -1.0;
  const FunctionValues f = Evaluate(FunctionClassSpec::Bounded(1.0), ClassParams{v}, pop);
  EXPECT_EQ(f.on_source, v);
  EXPECT_EQ(f.on_target, v);
}

TEST(Evaluate, RejectsNormViolations) {
  const Population pop = TwoPoint();
  Eigen::VectorXd beta(1);
  beta << 1.5;
  EXPECT_THROW(Evaluate(FunctionClassSpec::Linear(1.0), ClassParams{beta}, pop), ContractError);
  beta << 1.0 + 1e-12;
  EXPECT_NO_THROW(Evaluate(FunctionClassSpec::Linear(1.0), ClassParams{beta}, pop));
  EXPECT_THROW(Evaluate(FunctionClassSpec::Linear(1.0, LinearNorm::L1),
                        ClassParams{Eigen::VectorXd::Constant(1, -1.1)}, pop),
               ContractError);
  EXPECT_THROW(
      Evaluate(FunctionClassSpec::Bounded(0.5), ClassParams{Eigen::VectorXd::Ones(2)}, pop),
      ContractError);
  EXPECT_THROW(Evaluate(FunctionClassSpec::FullInfo(TwoPointF0()),
                        ClassParams{Eigen::VectorXd::Constant(1, 2.0)}, pop),
               ContractError);
  EXPECT_THROW(Evaluate(FunctionClassSpec::Rkhs(0.1), ClassParams{Eigen::VectorXd::Ones(4)}, pop),
               ContractError);
  EXPECT_THROW(Evaluate(FunctionClassSpec::Linear(1.0), ClassParams{Eigen::VectorXd::Zero(2)}, pop),
               DimensionError);
}

TEST(SupOver, HandExamples) {
  const Population pop = TwoPoint();
  const SignedMeasure zero{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)};
  for (const FunctionClassSpec& spec :
       {FunctionClassSpec::FullInfo(TwoPointF0()), FunctionClassSpec::Linear(2.0),
        FunctionClassSpec::Linear(2.0, LinearNorm::L1), FunctionClassSpec::Rkhs(2.0),
        FunctionClassSpec::Bounded(2.0)}) {
    EXPECT_EQ(SupOverClass(spec, pop, zero).value, 0.0);
  }

  const SignedMeasure q_minus_p = TargetMinusReweighted(Eigen::VectorXd::Ones(2), pop);
  EXPECT_DOUBLE_EQ(SupOverClass(FunctionClassSpec::FullInfo(TwoPointF0()), pop, q_minus_p).value,
                   0.25);

  Eigen::MatrixXd xs(1, 1), xt(1, 1);
  xs << 0.0;
  xt << 1.0;
  const Population distinct = Population::Uniform(xs, xt);
  const SignedMeasure split{Eigen::VectorXd::Constant(1, 0.5), Eigen::VectorXd::Constant(1, -0.5)};
  EXPECT_DOUBLE_EQ(SupOverClass(FunctionClassSpec::Bounded(1.0), distinct, split).value, 1.0);
}

TEST(SupOver, ValueIsAttainedAndNotExceededByFeasibleMembers) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const Population pop = trial % 2 == 0 ? testing::RandomShiftedPopulation(rng, 5, 4, 2, 0.8)
                                          : testing::RandomPooledPopulation(rng, 5, 4, 4, 2);
    const SignedMeasure m{testing::RandomNormal(rng, 5, 1).col(0),
                          testing::RandomNormal(rng, 4, 1).col(0)};
    const FunctionClassSpec specs[] = {
        FunctionClassSpec::FullInfo(testing::RandomValues(rng, pop)),
        FunctionClassSpec::Linear(1.5, LinearNorm::L2, 2),
        FunctionClassSpec::Linear(1.5, LinearNorm::L1, 2),
        FunctionClassSpec::Rkhs(1.5, KernelSpec{0.8}),
        FunctionClassSpec::Bounded(1.5),
    };
    for (const FunctionClassSpec& spec : specs) {
      const BoundClass bound(spec, pop);
      const SupResult sup = bound.SupOver(m);
      EXPECT_NEAR(Functional(m, bound.Evaluate(sup.params)), sup.value, 1e-9)
          << ToString(spec.kind());
      EXPECT_NEAR(Functional(m, sup.maximizer), sup.value, 1e-9);

      // Random feasible members never beat the reported supremum.
      for (int draw = 0; draw < 30; ++draw) {
        ClassParams params{testing::RandomNormal(rng, sup.params.coefficients.size(), 1).col(0)};
        Eigen::VectorXd& c = params.coefficients;
        switch (spec.kind()) {
          case ClassKind::FullInfo: c[0] = std::tanh(c[0]); break;
          case ClassKind::Linear:
            c *= 1.5 / (spec.linear_norm() == LinearNorm::L2 ? c.norm() : c.lpNorm<1>());
            break;
          case ClassKind::Rkhs: c *= 1.5 / std::sqrt(c.dot(bound.gram() * c)); break;
          case ClassKind::Bounded: c = c.cwiseMax(-1.5).cwiseMin(1.5); break;
        }
        EXPECT_LE(Functional(m, bound.Evaluate(params)), sup.value + 1e-9);
      }
    }
  }
}

TEST(SupOver, ClosedFormsAgainstDirectFormulas) {
  std::mt19937_64 rng(99);
  const Population pop = testing::RandomPooledPopulation(rng, 6, 5, 4, 1);
  const SignedMeasure m{testing::RandomNormal(rng, 6, 1).col(0),
                        testing::RandomNormal(rng, 5, 1).col(0)};
  const double b = 2.0;

  // Linear: B times the dual norm of the feature moment.
  const Eigen::VectorXd moment =
      LinearFeatures(pop.source_covariates(), 1).transpose() * m.on_source +
      LinearFeatures(pop.target_covariates(), 1).transpose() * m.on_target;
  EXPECT_NEAR(SupOverClass(FunctionClassSpec::Linear(b), pop, m).value, b * moment.norm(), 1e-12);
  EXPECT_NEAR(SupOverClass(FunctionClassSpec::Linear(b, LinearNorm::L1), pop, m).value,
              b * moment.cwiseAbs().maxCoeff(), 1e-12);

  // RKHS: B sqrt(v'Kv).
  Eigen::VectorXd v(11);
  v << m.on_source, m.on_target;
  EXPECT_NEAR(SupOverClass(FunctionClassSpec::Rkhs(b), pop, m).value,
              b * std::sqrt(v.dot(DirectGram(pop, 1.0) * v)), 1e-12);

  // Bounded: B times total variation after merging coincident points.
  const Eigen::MatrixXd x = pop.pooled_covariates();
  double tv = 0.0;
  std::vector<bool> used(11, false);
  for (Eigen::Index i = 0; i < 11; ++i) {
    if (used[static_cast<std::size_t>(i)]) continue;
    double mass = 0.0;
    for (Eigen::Index j = i; j < 11; ++j) {
      if (x.row(j) == x.row(i)) {
        mass += v[j];
        used[static_cast<std::size_t>(j)] = true;
      }
    }
    tv += std::abs(mass);
  }
  EXPECT_NEAR(SupOverClass(FunctionClassSpec::Bounded(b), pop, m).value, b * tv, 1e-12);
}

TEST(MmdBias, HandValuesAndScaling) {
  const WeightVector one = WeightVector::Uniform(SinglePoints(0.0, 0.0));
  EXPECT_EQ(MmdBias(KernelSpec{}, 1.0, one, SinglePoints(0.0, 0.0)), 0.0);

  const double l = 1.3;
  const Population apart = SinglePoints(0.0, std::sqrt(2.0) * l);
  const double expected = std::sqrt(2.0 - 2.0 * std::exp(-1.0));
  EXPECT_NEAR(MmdBias(KernelSpec{l}, 1.0, WeightVector::Uniform(apart), apart), expected, 1e-14);
  EXPECT_NEAR(expected, 1.1243, 1e-4);

  std::mt19937_64 rng(4);
  const Population pop = testing::RandomShiftedPopulation(rng, 8, 6, 2, 1.0);
  const WeightVector w = WeightVector::Uniform(pop);
  EXPECT_NEAR(MmdBias(KernelSpec{}, 2.0, w, pop), 2.0 * MmdBias(KernelSpec{}, 1.0, w, pop), 1e-14);
  EXPECT_NEAR(MmdBias(KernelSpec{}, 1.0, w, pop),
              BoundClass(FunctionClassSpec::Rkhs(1.0), pop).Ipm(w.values()), 1e-14);
}

TEST(BoundClass, AccessorsMatchKind) {
  const Population pop = TwoPoint();
  EXPECT_THROW(BoundClass(FunctionClassSpec::Bounded(1.0), pop).gram(), ContractError);
  EXPECT_THROW(BoundClass(FunctionClassSpec::Rkhs(1.0), pop).source_features(), ContractError);
  EXPECT_THROW(BoundClass(FunctionClassSpec::Linear(1.0), pop).points(), ContractError);
  Eigen::VectorXd wrong(3);
  wrong << 1, 2, 3;
  EXPECT_THROW(BoundClass(FunctionClassSpec::FullInfo(FunctionValues{wrong, wrong}), pop),
               DimensionError);
}

TEST(BoundClass, IpmOfDensityRatioIsZeroOnCommonSupport) {
  const Population pop = TwoPoint();
  Eigen::VectorXd ratio(2);
  ratio << 0.5, 1.5;
  for (const FunctionClassSpec& spec :
       {FunctionClassSpec::Linear(1.0), FunctionClassSpec::Rkhs(1.0),
        FunctionClassSpec::Bounded(1.0), FunctionClassSpec::Linear(1.0, LinearNorm::L1)}) {
    EXPECT_NEAR(BoundClass(spec, pop).Ipm(ratio), 0.0, 1e-15) << ToString(spec.kind());
  }
}

}  // namespace
}  // namespace balw
