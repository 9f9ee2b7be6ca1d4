#include "balw/fixtures.hpp"

#include <cmath>
#include <filesystem>
#include <random>

#include "balw/csv.hpp"
#include "balw/errors.hpp"

namespace balw::fixtures {
namespace {

Eigen::VectorXd NormalDensityMasses(const Eigen::VectorXd& x, double mean) {
  Eigen::VectorXd m = (-0.5 * (x.array() - mean).square()).exp().matrix();
  return m / m.sum();
}

std::vector<double> ToStd(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

Fixture TwoPoint() {
  Eigen::MatrixXd x(2, 1);
  x << 0.0, 1.0;
  Eigen::VectorXd p(2), q(2), y(2);
  p << 0.5, 0.5;
  q << 0.25, 0.75;
  y << 0.0, 1.0;
  Population pop(x, x, p, q, y);
  return Fixture{"two_point", std::move(pop), FunctionValues{y, y}};
}

Fixture GaussianShiftGrid(int points) {
  if (points < 2) throw ContractError("the Gaussian grid needs at least two nodes");
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(points, -3.0, 6.0);
  Population pop(x, x, NormalDensityMasses(x, 1.0), NormalDensityMasses(x, 2.0), x);
  return Fixture{"gaussian_shift", std::move(pop), FunctionValues{x, x}};
}

Fixture GaussianShiftSampled(int n_p, int n_q, std::uint64_t seed) {
  if (n_p < 1 || n_q < 1) throw ContractError("sample sizes must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd xs(n_p), xt(n_q);
  for (int i = 0; i < n_p; ++i) xs[i] = 1.0 + normal(rng);
  for (int j = 0; j < n_q; ++j) xt[j] = 2.0 + normal(rng);
  Population pop = Population::Uniform(xs, xt, xs);
  return Fixture{"gaussian_shift_sampled", std::move(pop), FunctionValues{xs, xt}};
}

Fixture DisjointUniformGrid(int points) {
  if (points < 4) throw ContractError("the uniform grid needs at least four cells");
  const double h = 1.0 / points;
  // Q is P shifted by two cells; shared nodes come from the same expression, so they match
  // bit for bit.
  Eigen::VectorXd xs(points), xt(points);
  for (int k = 0; k < points; ++k) {
    xs[k] = 1.0 + (k + 0.5) * h;
    xt[k] = 1.0 + (k + 2 + 0.5) * h;
  }
  Population pop = Population::Uniform(xs, xt, xs);
  return Fixture{"disjoint_uniform", std::move(pop), FunctionValues{xs, xt}};
}

Fixture ByName(const std::string& name, std::uint64_t seed) {
  if (name == "two_point") return TwoPoint();
  if (name == "gaussian_shift") return GaussianShiftGrid();
  if (name == "gaussian_shift_sampled") return GaussianShiftSampled(500, 500, seed);
  if (name == "disjoint_uniform") return DisjointUniformGrid();
  throw ContractError("unknown fixture '" + name +
                      "' (expected two_point, gaussian_shift, gaussian_shift_sampled or "
                      "disjoint_uniform)");
}

void WriteFixture(const Fixture& fixture, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const Population& pop = fixture.population;
  if (pop.dim() != 1) throw ContractError("fixture files support one covariate");

  std::vector<std::string> names{"x", "mass"};
  std::vector<std::vector<double>> source{ToStd(pop.source_covariates().col(0)),
                                          ToStd(pop.source_masses())};
  std::vector<std::vector<double>> target{ToStd(pop.target_covariates().col(0)),
                                          ToStd(pop.target_masses())};
  std::vector<std::string> target_names = names;
  if (fixture.f0) {
    names.push_back("f0");
    target_names.push_back("f0");
    source.push_back(ToStd(fixture.f0->on_source));
    target.push_back(ToStd(fixture.f0->on_target));
  }
  if (pop.source_outcomes()) {
    names.push_back("y");
    source.push_back(ToStd(*pop.source_outcomes()));
  }
  const std::filesystem::path base(dir);
  csv::Write((base / "source.csv").string(), names, source);
  csv::Write((base / "target.csv").string(), target_names, target);
}

}  // namespace balw::fixtures
