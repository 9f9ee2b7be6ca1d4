#include "balw/population.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "balw/csv.hpp"
#include "balw/errors.hpp"

namespace balw {
namespace {

// Relative round-off floor, in units of max |f|.
constexpr double kVarianceClamp = 1e-14;

void CheckMasses(const Eigen::VectorXd& masses, const char* which) {
  if (!masses.allFinite() || (masses.array() <= 0.0).any()) {
    throw ContractError(std::string(which) + " masses must be finite and strictly positive");
  }
  if (std::abs(masses.sum() - 1.0) > Population::kMassTolerance) {
    throw ContractError(std::string(which) + " masses must sum to 1");
  }
}

Eigen::VectorXd UniformMasses(Eigen::Index n) {
  return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
}

// Lexicographic order on rows; exact comparison is the point identity we want.
struct RowLess {
  const Eigen::MatrixXd* pooled;
  bool operator()(Eigen::Index a, Eigen::Index b) const {
    for (Eigen::Index j = 0; j < pooled->cols(); ++j) {
      const double x = (*pooled)(a, j);
      const double y = (*pooled)(b, j);
      if (x < y) return true;
      if (y < x) return false;
    }
    return false;
  }
};

}  // namespace

Population::Population(Eigen::MatrixXd source_covariates, Eigen::MatrixXd target_covariates,
                       Eigen::VectorXd source_masses, Eigen::VectorXd target_masses,
                       std::optional<Eigen::VectorXd> source_outcomes)
    : source_(std::move(source_covariates)),
      target_(std::move(target_covariates)),
      source_masses_(std::move(source_masses)),
      target_masses_(std::move(target_masses)),
      outcomes_(std::move(source_outcomes)) {
  if (source_.rows() < 1 || target_.rows() < 1 || source_.cols() < 1) {
    throw DimensionError("population needs n_P >= 1, n_Q >= 1 and d >= 1");
  }
  if (source_.cols() != target_.cols()) {
    throw DimensionError("source and target covariates have different column counts");
  }
  if (!source_.allFinite() || !target_.allFinite()) {
    throw ContractError("covariates must be finite");
  }
  if (source_masses_.size() != source_.rows() || target_masses_.size() != target_.rows()) {
    throw DimensionError("mass vector length does not match sample size");
  }
  CheckMasses(source_masses_, "source");
  CheckMasses(target_masses_, "target");
  if (outcomes_) {
    if (outcomes_->size() != source_.rows()) throw DimensionError("outcome length != n_P");
    if (!outcomes_->allFinite()) throw ContractError("outcomes must be finite");
  }
}

Population Population::Uniform(Eigen::MatrixXd source_covariates, Eigen::MatrixXd target_covariates,
                               std::optional<Eigen::VectorXd> source_outcomes) {
  const Eigen::Index n_p = source_covariates.rows();
  const Eigen::Index n_q = target_covariates.rows();
  if (n_p < 1 || n_q < 1) throw DimensionError("population needs n_P >= 1 and n_Q >= 1");
  return Population(std::move(source_covariates), std::move(target_covariates), UniformMasses(n_p),
                    UniformMasses(n_q), std::move(source_outcomes));
}

Eigen::MatrixXd Population::pooled_covariates() const {
  Eigen::MatrixXd pooled(n_pooled(), dim());
  pooled << source_, target_;
  return pooled;
}

WeightVector::WeightVector(Eigen::VectorXd weights, const Population& pop)
    : weights_(std::move(weights)) {
  if (weights_.size() != pop.n_source()) throw DimensionError("weight length != n_P");
  if (!weights_.allFinite()) throw ContractError("weights must be finite");
  const double mean = pop.source_masses().dot(weights_);
  const double scale = std::max(1.0, pop.source_masses().dot(weights_.cwiseAbs()));
  if (std::abs(mean - 1.0) > kNormalizationTolerance * scale) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", mean);
    throw ContractError(std::string("weights are not normalized: E_P[w] = ") + buf);
  }
}

WeightVector WeightVector::Uniform(const Population& pop) {
  return WeightVector(Eigen::VectorXd::Ones(pop.n_source()), pop);
}

double MeanP(const Eigen::VectorXd& on_source, const Population& pop) {
  if (on_source.size() != pop.n_source()) throw DimensionError("MeanP: length != n_P");
  return pop.source_masses().dot(on_source);
}

double MeanQ(const Eigen::VectorXd& on_target, const Population& pop) {
  if (on_target.size() != pop.n_target()) throw DimensionError("MeanQ: length != n_Q");
  return pop.target_masses().dot(on_target);
}

double MeanP(const FunctionValues& f, const Population& pop) { return MeanP(f.on_source, pop); }
double MeanQ(const FunctionValues& f, const Population& pop) { return MeanQ(f.on_target, pop); }

double VarP(const Eigen::VectorXd& on_source, const Population& pop) {
  const double mean = MeanP(on_source, pop);
  const Eigen::VectorXd centered = (on_source.array() - mean).matrix();
  const double var = pop.source_masses().dot(centered.cwiseAbs2());
  const double floor =
      kVarianceClamp * (on_source.size() > 0 ? on_source.cwiseAbs().maxCoeff() : 0.0);
  return var <= floor * floor ? 0.0 : var;
}

double VarP(const FunctionValues& f, const Population& pop) { return VarP(f.on_source, pop); }

double WeightVariance(const WeightVector& w, const Population& pop) {
  if (w.size() != pop.n_source()) throw DimensionError("WeightVariance: length != n_P");
  const double mean = pop.source_masses().dot(w.values());
  const double scale = std::max(1.0, pop.source_masses().dot(w.values().cwiseAbs()));
  if (std::abs(mean - 1.0) > WeightVector::kNormalizationTolerance * scale) {
    throw ContractError("WeightVariance: weights are not normalized");
  }
  // Centred at 1 so that uniform weights give exactly zero.
  const Eigen::VectorXd dev = (w.values().array() - 1.0).matrix();
  const double shift = pop.source_masses().dot(dev);
  return std::max(pop.source_masses().dot(dev.cwiseAbs2()) - shift * shift, 0.0);
}

PointIndex IndexPoints(const Population& pop) {
  const Eigen::MatrixXd pooled = pop.pooled_covariates();
  const Eigen::Index n = pooled.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const RowLess less{&pooled};
  std::stable_sort(order.begin(), order.end(), less);

  std::vector<Eigen::Index> ids(static_cast<std::size_t>(n));
  Eigen::Index next = -1;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k == 0 || less(order[k - 1], order[k])) ++next;
    ids[static_cast<std::size_t>(order[k])] = next;
  }

  PointIndex index;
  index.n_unique = next + 1;
  index.source_ids.assign(ids.begin(), ids.begin() + pop.n_source());
  index.target_ids.assign(ids.begin() + pop.n_source(), ids.end());
  index.source_mass = Eigen::VectorXd::Zero(index.n_unique);
  index.target_mass = Eigen::VectorXd::Zero(index.n_unique);
  for (Eigen::Index i = 0; i < pop.n_source(); ++i) {
    index.source_mass[index.source_ids[static_cast<std::size_t>(i)]] += pop.source_masses()[i];
  }
  for (Eigen::Index j = 0; j < pop.n_target(); ++j) {
    index.target_mass[index.target_ids[static_cast<std::size_t>(j)]] += pop.target_masses()[j];
  }
  return index;
}

bool TargetSupportCovered(const Population& pop) {
  const PointIndex index = IndexPoints(pop);
  for (Eigen::Index u = 0; u < index.n_unique; ++u) {
    if (index.target_mass[u] > 0.0 && index.source_mass[u] == 0.0) return false;
  }
  return true;
}

// --- CSV ingestion -----------------------------------------------------------------------------

namespace {

Eigen::MatrixXd Extract(const csv::Table& table, const std::vector<std::string>& names) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(table.rows.size()),
                      static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    const std::size_t col = table.Column(names[j]);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = table.rows[i][col];
    }
  }
  return out;
}

Eigen::VectorXd ExtractColumn(const csv::Table& table, const std::string& name) {
  return Extract(table, {name}).col(0);
}

Eigen::VectorXd ReadMasses(const csv::Table& table, const std::optional<std::string>& column,
                           std::vector<std::string>& warnings) {
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  if (!column) return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  Eigen::VectorXd masses = ExtractColumn(table, *column);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (masses[i] <= 0.0) {
      throw IngestionError("mass must be strictly positive", table.path,
                           static_cast<std::size_t>(i) + 2, *column);
    }
  }
  const double total = masses.sum();
  if (std::abs(total - 1.0) > Population::kMassTolerance) {
    warnings.push_back(table.path + ": mass column '" + *column + "' sums to " +
                       csv::FormatDouble(total) + "; renormalized to 1");
  }
  // Renormalize unconditionally so the sum is 1 to the last bit the division allows.
  masses /= total;
  return masses;
}

}  // namespace

LoadedPopulation LoadPopulation(const std::string& source_file, const std::string& target_file,
                                const ColumnSchema& schema) {
  if (schema.covariates.empty()) throw ContractError("schema names no covariate columns");
  const csv::Table source = csv::ReadNumeric(source_file);
  const csv::Table target = csv::ReadNumeric(target_file);

  std::vector<std::string> warnings;
  Eigen::MatrixXd xs = Extract(source, schema.covariates);
  Eigen::MatrixXd xt = Extract(target, schema.covariates);
  Eigen::VectorXd ms = ReadMasses(source, schema.mass, warnings);
  Eigen::VectorXd mt = ReadMasses(target, schema.mass, warnings);

  std::optional<Eigen::VectorXd> outcomes;
  if (schema.outcome) outcomes = ExtractColumn(source, *schema.outcome);

  std::optional<FunctionValues> f0;
  if (schema.f0)
    f0 = FunctionValues{ExtractColumn(source, *schema.f0), ExtractColumn(target, *schema.f0)};

  if (schema.standardize) {
    for (Eigen::Index j = 0; j < xs.cols(); ++j) {
      const double mean = ms.dot(xs.col(j));
      const double var = ms.dot((xs.col(j).array() - mean).square().matrix());
      if (!(var > 0.0)) {
        warnings.push_back("covariate '" + schema.covariates[static_cast<std::size_t>(j)] +
                           "' is constant on the source sample; centered but not scaled");
      }
      const double scale = var > 0.0 ? std::sqrt(var) : 1.0;
      xs.col(j) = (xs.col(j).array() - mean) / scale;
      xt.col(j) = (xt.col(j).array() - mean) / scale;
    }
  }

  return LoadedPopulation{
      Population(std::move(xs), std::move(xt), std::move(ms), std::move(mt), std::move(outcomes)),
      std::move(f0), std::move(warnings)};
}

}  // namespace balw
