#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace balw::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kInfeasibleDelta = 2,
  kNotConverged = 3,
};

enum class Mode { SingleMu, SingleDelta, Sweep, OverlapOnly };

std::string ToString(Mode mode);
Mode ParseMode(const std::string& name);

struct RunConfig {
  // Input: either a bundled fixture or a source/target CSV pair.
  std::string source;
  std::string target;
  std::string fixture;
  bool write_fixture = false;
  std::vector<std::string> covariates;
  std::string outcome;
  std::string mass;
  std::string f0;
  bool standardize = false;

  std::string function_class = "bounded";
  double bound = 1.0;
  std::string norm = "l2";
  int degree = 1;
  /// Gaussian kernel bandwidth; 0 selects the median heuristic.
  double bandwidth = 0.0;
  std::string rkhs_convention = "squared";
  std::string phi = "chi2";

  /// Empty: inferred from which of mu, delta and mu_grid is set.
  std::string mode;
  std::optional<double> mu;
  std::optional<double> delta;
  std::vector<double> mu_grid;
  std::optional<double> sigma2;

  double tolerance = 1e-7;
  int max_iterations = 10000;
  double delta_min_tolerance = 1e-4;
  std::string rkhs_method = "exact";
  std::string bounded_method = "exact";
  int threads = 1;

  std::uint64_t seed = 0;
  std::string out = ".";

  /// Audit the solution against the primal oracle and a Monte-Carlo MSE estimate.
  bool oracle = false;
  std::int64_t oracle_trials = 100000;
};

/// The effective mode; throws ContractError when the mode and the mu/delta/mu_grid settings
/// disagree or any tolerance is not positive.
Mode Validate(const RunConfig& config);

struct ParseOutcome {
  std::optional<RunConfig> config;
  /// Set when parsing already decided the exit code (help text or a bad command line).
  std::optional<int> exit_code;
};

/// Flags override values from an optional `--config` file of key=value lines.
ParseOutcome ParseArgs(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Solves, writes weights.csv, report.json and frontier.csv (sweep) into config.out.
int Run(const RunConfig& config, std::ostream& err);

int Main(int argc, const char* const* argv);

}  // namespace balw::cli
