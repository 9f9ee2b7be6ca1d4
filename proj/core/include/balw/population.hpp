#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace balw {

/// Values of one function at every source row and every target row.
struct FunctionValues {
  Eigen::VectorXd on_source;
  Eigen::VectorXd on_target;
};

/// Source (P) and target (Q) empirical distributions.
///
/// Rows are points, columns are covariates. Masses are probability vectors over the rows of
/// each sample; they are validated on construction and the object is immutable afterwards.
class Population {
 public:
  static constexpr double kMassTolerance = 1e-12;

  Population(Eigen::MatrixXd source_covariates, Eigen::MatrixXd target_covariates,
             Eigen::VectorXd source_masses, Eigen::VectorXd target_masses,
             std::optional<Eigen::VectorXd> source_outcomes = std::nullopt);

  /// Uniform masses 1/n on both samples.
  static Population Uniform(Eigen::MatrixXd source_covariates, Eigen::MatrixXd target_covariates,
                            std::optional<Eigen::VectorXd> source_outcomes = std::nullopt);

  const Eigen::MatrixXd& source_covariates() const noexcept { return source_; }
  const Eigen::MatrixXd& target_covariates() const noexcept { return target_; }
  const Eigen::VectorXd& source_masses() const noexcept { return source_masses_; }
  const Eigen::VectorXd& target_masses() const noexcept { return target_masses_; }
  const std::optional<Eigen::VectorXd>& source_outcomes() const noexcept { return outcomes_; }

  Eigen::Index n_source() const noexcept { return source_.rows(); }
  Eigen::Index n_target() const noexcept { return target_.rows(); }
  Eigen::Index n_pooled() const noexcept { return source_.rows() + target_.rows(); }
  Eigen::Index dim() const noexcept { return source_.cols(); }

  /// Source rows followed by target rows.
  Eigen::MatrixXd pooled_covariates() const;

 private:
  Eigen::MatrixXd source_;
  Eigen::MatrixXd target_;
  Eigen::VectorXd source_masses_;
  Eigen::VectorXd target_masses_;
  std::optional<Eigen::VectorXd> outcomes_;
};

/// Weights over source rows with E_P[w] = 1. Entries may be negative.
class WeightVector {
 public:
  static constexpr double kNormalizationTolerance = 1e-9;

  /// Throws ContractError when the weights are not normalized under `pop`.
  WeightVector(Eigen::VectorXd weights, const Population& pop);

  static WeightVector Uniform(const Population& pop);

  const Eigen::VectorXd& values() const noexcept { return weights_; }
  Eigen::Index size() const noexcept { return weights_.size(); }
  double operator[](Eigen::Index i) const { return weights_[i]; }

 private:
  Eigen::VectorXd weights_;
};

double MeanP(const Eigen::VectorXd& on_source, const Population& pop);
double MeanQ(const Eigen::VectorXd& on_target, const Population& pop);
double MeanP(const FunctionValues& f, const Population& pop);
double MeanQ(const FunctionValues& f, const Population& pop);

/// E_P[(f - E_P f)^2]; zero when below (1e-14 max|f|)^2, the round-off floor.
double VarP(const Eigen::VectorXd& on_source, const Population& pop);
double VarP(const FunctionValues& f, const Population& pop);

/// Chi-square divergence D_2(R||P) = E_P[w^2] - 1.
double WeightVariance(const WeightVector& w, const Population& pop);

/// Grouping of pooled rows by exact coordinate equality.
struct PointIndex {
  std::vector<Eigen::Index> source_ids;
  std::vector<Eigen::Index> target_ids;
  Eigen::Index n_unique = 0;
  Eigen::VectorXd source_mass;  // aggregated P mass per unique point
  Eigen::VectorXd target_mass;  // aggregated Q mass per unique point
};

PointIndex IndexPoints(const Population& pop);

/// True when every target point coincides with some source point.
bool TargetSupportCovered(const Population& pop);

// --- CSV ingestion -----------------------------------------------------------------------------

struct ColumnSchema {
  std::vector<std::string> covariates;
  std::optional<std::string> outcome;
  std::optional<std::string> mass;
  /// Column holding a known outcome function (used by the full-information class).
  std::optional<std::string> f0;
  /// Z-score covariates with source means and standard deviations.
  bool standardize = false;
};

struct LoadedPopulation {
  Population population;
  std::optional<FunctionValues> f0;
  std::vector<std::string> warnings;
};

LoadedPopulation LoadPopulation(const std::string& source_file, const std::string& target_file,
                                const ColumnSchema& schema);

}  // namespace balw
