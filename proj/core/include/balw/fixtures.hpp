#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "balw/population.hpp"

namespace balw::fixtures {

struct Fixture {
  std::string name;
  Population population;
  /// Known outcome function, when the fixture defines one.
  std::optional<FunctionValues> f0;
};

/// X = {0, 1}; P masses (1/2, 1/2), Q masses (1/4, 3/4); f0(x) = x and Y = x on the source.
Fixture TwoPoint();

/// P = N(1, 1) and Q = N(2, 1) discretized on a shared grid of `points` nodes over [-3, 6].
/// f0(x) = x.
Fixture GaussianShiftGrid(int points = 512);

/// The same shift as independent samples of sizes n_p and n_q with uniform masses.
Fixture GaussianShiftSampled(int n_p, int n_q, std::uint64_t seed);

/// P = U(1, 2) and Q = U(1.01, 2.01) as cell-centred grids with spacing 1/points on one lattice.
Fixture DisjointUniformGrid(int points = 200);

/// Looks a fixture up by name: two_point, gaussian_shift, gaussian_shift_sampled, disjoint_uniform.
Fixture ByName(const std::string& name, std::uint64_t seed = 0);

/// Writes source.csv and target.csv (columns x, mass, f0 and y when present) into `dir`.
void WriteFixture(const Fixture& fixture, const std::string& dir);

}  // namespace balw::fixtures
