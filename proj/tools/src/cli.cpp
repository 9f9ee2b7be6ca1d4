#include "balw_cli/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"

#include "balw/csv.hpp"
#include "balw/diagnostics.hpp"
#include "balw/dual_solver.hpp"
#include "balw/errors.hpp"
#include "balw/fixtures.hpp"
#include "balw/oracle.hpp"
#include "balw/phi_divergence.hpp"

namespace balw::cli {
namespace {

namespace fs = std::filesystem;

struct Input {
  Population population;
  std::optional<FunctionValues> f0;
  std::vector<std::string> warnings;
};

Input LoadInput(const RunConfig& config) {
  const bool files = !config.source.empty() || !config.target.empty();
  if (files == !config.fixture.empty())
    throw ContractError("give either --fixture or both --source and --target");
  if (!files) {
    fixtures::Fixture fx = fixtures::ByName(config.fixture, config.seed);
    if (config.write_fixture) {
      fs::create_directories(config.out);
      fixtures::WriteFixture(fx, config.out);
    }
    return Input{std::move(fx.population), std::move(fx.f0), {}};
  }
  if (config.source.empty() || config.target.empty())
    throw ContractError("--source and --target must be given together");
  if (config.covariates.empty()) throw ContractError("--covariates is required with CSV input");
  if (config.write_fixture) throw ContractError("--write-fixture needs --fixture");
  ColumnSchema schema;
  schema.covariates = config.covariates;
  if (!config.outcome.empty()) schema.outcome = config.outcome;
  if (!config.mass.empty()) schema.mass = config.mass;
  if (!config.f0.empty()) schema.f0 = config.f0;
  schema.standardize = config.standardize;
  LoadedPopulation loaded = LoadPopulation(config.source, config.target, schema);
  return Input{std::move(loaded.population), std::move(loaded.f0), std::move(loaded.warnings)};
}

FunctionClassSpec BuildSpec(const RunConfig& config, const Population& pop,
                            const std::optional<FunctionValues>& f0) {
  switch (ParseClassKind(config.function_class)) {
    case ClassKind::FullInfo:
      if (!f0) throw ContractError("class fullinfo needs an f0 column or a fixture with f0");
      return FunctionClassSpec::FullInfo(*f0);
    case ClassKind::Linear: {
      LinearNorm norm;
      if (config.norm == "l2") {
        norm = LinearNorm::L2;
      } else if (config.norm == "l1") {
        norm = LinearNorm::L1;
      } else {
        throw ContractError("unknown norm '" + config.norm + "' (expected l2 or l1)");
      }
      return FunctionClassSpec::Linear(config.bound, norm, config.degree);
    }
    case ClassKind::Rkhs: {
      const KernelSpec kernel =
          config.bandwidth > 0.0 ? KernelSpec{config.bandwidth} : KernelSpec::MedianHeuristic(pop);
      RkhsBoundConvention convention;
      if (config.rkhs_convention == "squared") {
        convention = RkhsBoundConvention::Squared;
      } else if (config.rkhs_convention == "quadratic") {
        convention = RkhsBoundConvention::Quadratic;
      } else {
        throw ContractError("unknown RKHS convention '" + config.rkhs_convention +
                            "' (expected squared or quadratic)");
      }
      return FunctionClassSpec::Rkhs(config.bound, kernel, convention);
    }
    case ClassKind::Bounded: return FunctionClassSpec::Bounded(config.bound);
  }
  throw ContractError("unknown function class");
}

SolverOptions BuildOptions(const RunConfig& config) {
  SolverOptions options;
  options.tolerance = config.tolerance;
  options.max_iterations = config.max_iterations;
  if (config.rkhs_method == "exact") {
    options.rkhs_method = RkhsMethod::Exact;
  } else if (config.rkhs_method == "pg") {
    options.rkhs_method = RkhsMethod::ProjectedGradient;
  } else {
    throw ContractError("unknown rkhs method '" + config.rkhs_method + "' (expected exact or pg)");
  }
  if (config.bounded_method == "exact") {
    options.bounded_method = BoundedMethod::Exact;
  } else if (config.bounded_method == "cd") {
    options.bounded_method = BoundedMethod::CoordinateAscent;
  } else {
    throw ContractError("unknown bounded method '" + config.bounded_method +
                        "' (expected exact or cd)");
  }
  return options;
}

std::string Join(const std::vector<std::string>& items) {
  std::string s;
  for (const std::string& item : items) s += (s.empty() ? "" : ",") + item;
  return s;
}

std::string JoinNumbers(const std::vector<double>& values) {
  std::vector<std::string> items;
  for (double v : values) items.push_back(csv::FormatDouble(v));
  return Join(items);
}

std::map<std::string, std::string> Describe(const RunConfig& c, Mode mode, double sigma2) {
  std::map<std::string, std::string> m{
      {"mode", ToString(mode)},
      {"class", c.function_class},
      {"B", csv::FormatDouble(c.bound)},
      {"phi", c.phi},
      {"sigma2", csv::FormatDouble(sigma2)},
      {"tolerance", csv::FormatDouble(c.tolerance)},
      {"max_iterations", std::to_string(c.max_iterations)},
      {"delta_min_tolerance", csv::FormatDouble(c.delta_min_tolerance)},
      {"seed", std::to_string(c.seed)},
  };
  if (!c.fixture.empty()) {
    m["fixture"] = c.fixture;
  } else {
    m["source"] = c.source;
    m["target"] = c.target;
    m["covariates"] = Join(c.covariates);
    if (!c.outcome.empty()) m["outcome"] = c.outcome;
    if (!c.mass.empty()) m["mass"] = c.mass;
    if (!c.f0.empty()) m["f0"] = c.f0;
    m["standardize"] = c.standardize ? "true" : "false";
  }
  if (c.function_class == "linear") {
    m["norm"] = c.norm;
    m["degree"] = std::to_string(c.degree);
  }
  if (c.function_class == "rkhs") {
    m["bandwidth"] = c.bandwidth > 0.0 ? csv::FormatDouble(c.bandwidth) : "median";
    m["rkhs_convention"] = c.rkhs_convention;
    m["rkhs_method"] = c.rkhs_method;
  }
  if (c.function_class == "bounded") m["bounded_method"] = c.bounded_method;
  if (c.mu) m["mu"] = csv::FormatDouble(*c.mu);
  if (c.delta) m["delta"] = csv::FormatDouble(*c.delta);
  if (!c.mu_grid.empty()) m["mu_grid"] = JoinNumbers(c.mu_grid);
  if (c.oracle) m["oracle_trials"] = std::to_string(c.oracle_trials);
  return m;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

FrontierRecord Record(const DualSolution& sol, const Population& pop, double sigma2) {
  const SolutionSummary s = Summarize(sol, pop, sigma2);
  return FrontierRecord{s.mu,        s.delta,      s.weight_variance, s.mse_bound,
                        s.mse_total, s.weight_min, s.weight_max};
}

class Runner {
 public:
  Runner(const RunConfig& config, std::ostream& err) : config_(config), err_(err) {}

  int Execute() {
    mode_ = Validate(config_);
    phi_ = PhiSpec{ParsePhiFamily(config_.phi)};
    Input input = LoadInput(config_);
    for (std::string& w : input.warnings) Warn(std::move(w));
    pop_.emplace(std::move(input.population));
    f0_ = std::move(input.f0);
    spec_.emplace(BuildSpec(config_, *pop_, f0_));
    problem_.emplace(*spec_, *pop_, BuildOptions(config_));

    if (config_.sigma2) {
      sigma2_ = *config_.sigma2;
    } else {
      Warn("sigma2 not given; using 1.0 (MSE bounds scale with the assumed noise variance)");
    }
    if (!TargetSupportCovered(*pop_) && spec_->kind() == ClassKind::Bounded)
      Warn("some target points lie outside the source sample; that bias cannot be removed");
    if (phi_.family != PhiFamily::Chi2 &&
        (mode_ == Mode::SingleDelta || mode_ == Mode::OverlapOnly))
      throw ContractError("phi " + config_.phi + " is only supported in single_mu and sweep modes");

    fs::create_directories(config_.out);
    report_.config = Describe(config_, mode_, sigma2_);
    report_.metrics["delta_max"] = problem_->DeltaMax();

    int code = kOk;
    switch (mode_) {
      case Mode::SingleMu: SingleMu(); break;
      case Mode::SingleDelta: code = SingleDelta(); break;
      case Mode::Sweep: SweepGrid(); break;
      case Mode::OverlapOnly:
        report_.overlap = AssessOverlap(*problem_, config_.delta_min_tolerance);
        break;
    }
    report_.warnings = warnings_;
    WriteText(fs::path(config_.out) / "report.json", ReportJson(report_));
    return code;
  }

 private:
  void Warn(std::string message) {
    err_ << "balw: warning: " << message << "\n";
    warnings_.push_back(std::move(message));
  }

  DualSolution SolveAt(double mu) const {
    if (phi_.family == PhiFamily::Chi2) return problem_->Solve(mu);
    if (!(mu > 0.0)) throw ContractError("phi " + config_.phi + " needs mu > 0");
    return SolveDualPhi(*spec_, *pop_, phi_, mu, problem_->options());
  }

  void Choose(const DualSolution& sol) {
    report_.chosen = Summarize(sol, *pop_, sigma2_);
    if (phi_.family != PhiFamily::Chi2)
      report_.metrics["phi_divergence"] = PhiDivergence(sol.weights, *pop_, phi_);
    if (sol.ridge_penalty) report_.metrics["ridge_penalty"] = *sol.ridge_penalty;
    WriteWeightsCsv((fs::path(config_.out) / "weights.csv").string(), sol.weights);
    if (config_.oracle) Audit(sol);
  }

  void SingleMu() { Choose(SolveAt(*config_.mu)); }

  int SingleDelta() {
    try {
      const MuForDeltaResult r = MuForDelta(*problem_, *config_.delta, config_.delta_min_tolerance);
      if (r.slack) Warn("the bias budget is at or above delta_max; uniform weights meet it");
      report_.metrics["mu"] = r.mu;
      Choose(r.solution);
      return kOk;
    } catch (const InfeasibleBiasError& e) {
      err_ << "balw: error: " << e.what() << "\n";
      report_.metrics["delta_min"] = e.delta_min();
      report_.metrics["delta_requested"] = e.requested();
      return kInfeasibleDelta;
    }
  }

  void SweepGrid() {
    FrontierProfile profile;
    if (phi_.family == PhiFamily::Chi2) {
      profile = Sweep(*problem_, config_.mu_grid, sigma2_, config_.threads, false);
    } else {
      profile.sigma2 = sigma2_;
      profile.delta_max = problem_->DeltaMax();
      for (double mu : config_.mu_grid)
        profile.records.push_back(Record(SolveAt(mu), *pop_, sigma2_));
    }
    if (!FrontierIsMonotone(profile)) Warn("the frontier is not monotone within 1e-7");
    try {
      report_.overlap = AssessOverlap(*problem_, config_.delta_min_tolerance);
    } catch (const ConvergenceError& e) {
      Warn(std::string("overlap report skipped: ") + e.what());
    }
    WriteFrontierCsv((fs::path(config_.out) / "frontier.csv").string(), profile);
    report_.frontier = profile.records;
    const double best_mu = profile.records[profile.BestIndex()].mu;
    report_.metrics["best_mu"] = best_mu;
    Choose(SolveAt(best_mu));
  }

  void Audit(const DualSolution& sol) {
    if (pop_->n_pooled() > 30) {
      Warn("oracle audit skipped: it is limited to n_P + n_Q <= 30");
    } else {
      try {
        const PrimalSolution primal = PrimalSolve(*spec_, *pop_, sol.delta);
        report_.metrics["oracle_max_weight_difference"] =
            (primal.weights.values() - sol.weights.values()).cwiseAbs().maxCoeff();
        report_.metrics["oracle_objective"] = primal.objective;
        report_.metrics["oracle_achieved_bias"] = primal.achieved_bias;
        report_.metrics["dual_second_moment"] =
            pop_->source_masses().dot(sol.weights.values().cwiseAbs2());
      } catch (const Error& e) {
        Warn(std::string("oracle primal solve failed: ") + e.what());
      }
    }
    if (!f0_) {
      Warn("Monte-Carlo audit skipped: no f0 available");
      return;
    }
    const MonteCarloResult mc = MseMonteCarlo(*pop_, *f0_, std::sqrt(sigma2_), sol.weights,
                                              config_.oracle_trials, config_.seed);
    report_.metrics["mc_mse"] = mc.mse;
    report_.metrics["mc_standard_error"] = mc.standard_error;
    report_.metrics["mc_bias_squared"] = mc.bias_squared;
  }

  const RunConfig& config_;
  std::ostream& err_;
  Mode mode_ = Mode::SingleMu;
  PhiSpec phi_;
  std::optional<Population> pop_;
  std::optional<FunctionValues> f0_;
  std::optional<FunctionClassSpec> spec_;
  std::optional<DualProblem> problem_;
  double sigma2_ = 1.0;
  Report report_;
  std::vector<std::string> warnings_;
};

}  // namespace

std::string ToString(Mode mode) {
  switch (mode) {
    case Mode::SingleMu: return "single_mu";
    case Mode::SingleDelta: return "single_delta";
    case Mode::Sweep: return "sweep";
    case Mode::OverlapOnly: return "overlap_only";
  }
  return "unknown";
}

Mode ParseMode(const std::string& name) {
  if (name == "single_mu") return Mode::SingleMu;
  if (name == "single_delta") return Mode::SingleDelta;
  if (name == "sweep") return Mode::Sweep;
  if (name == "overlap_only") return Mode::OverlapOnly;
  throw ContractError("unknown mode '" + name +
                      "' (expected single_mu, single_delta, sweep or overlap_only)");
}

Mode Validate(const RunConfig& c) {
  const int set = int{c.mu.has_value()} + int{c.delta.has_value()} + int{!c.mu_grid.empty()};
  if (set > 1) throw ContractError("set at most one of --mu, --delta and --mu-grid");
  Mode mode = Mode::OverlapOnly;
  if (!c.mode.empty()) {
    mode = ParseMode(c.mode);
  } else if (c.mu) {
    mode = Mode::SingleMu;
  } else if (c.delta) {
    mode = Mode::SingleDelta;
  } else if (!c.mu_grid.empty()) {
    mode = Mode::Sweep;
  }
  switch (mode) {
    case Mode::SingleMu:
      if (!c.mu) throw ContractError("mode single_mu needs --mu");
      if (!(*c.mu >= 0.0) || !std::isfinite(*c.mu))
        throw ContractError("--mu must be finite, >= 0");
      break;
    case Mode::SingleDelta:
      if (!c.delta) throw ContractError("mode single_delta needs --delta");
      if (!(*c.delta >= 0.0) || !std::isfinite(*c.delta))
        throw ContractError("--delta must be finite, >= 0");
      break;
    case Mode::Sweep:
      if (c.mu_grid.empty()) throw ContractError("mode sweep needs --mu-grid");
      for (std::size_t i = 0; i < c.mu_grid.size(); ++i) {
        if (!(c.mu_grid[i] >= 0.0) || !std::isfinite(c.mu_grid[i]))
          throw ContractError("--mu-grid values must be finite, >= 0");
        if (i > 0 && !(c.mu_grid[i] > c.mu_grid[i - 1]))
          throw ContractError("--mu-grid must be strictly ascending");
      }
      break;
    case Mode::OverlapOnly:
      if (set > 0) throw ContractError("mode overlap_only takes none of --mu, --delta, --mu-grid");
      break;
  }
  if (!(c.tolerance > 0.0)) throw ContractError("--tolerance must be positive");
  if (!(c.delta_min_tolerance > 0.0)) throw ContractError("--delta-min-tolerance must be positive");
  if (c.max_iterations < 1) throw ContractError("--max-iterations must be positive");
  if (c.threads < 1) throw ContractError("--threads must be positive");
  if (c.sigma2 && !(*c.sigma2 > 0.0)) throw ContractError("--sigma2 must be positive");
  if (!(c.bound > 0.0) || !std::isfinite(c.bound)) throw ContractError("--B must be positive");
  if (c.oracle && c.oracle_trials < 2) throw ContractError("--oracle-trials must be at least 2");
  return mode;
}

ParseOutcome ParseArgs(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Minimax balancing weights for reweighting a source sample to a target", "balw"};
  app.set_config("--config", "", "Flat key=value file; command-line flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);

  RunConfig c;
  double mu = 0.0, delta = 0.0, sigma2 = 0.0;
  app.add_option("--source", c.source, "Source sample CSV");
  app.add_option("--target", c.target, "Target sample CSV");
  app.add_option(
      "--fixture", c.fixture,
      "Bundled input: two_point, gaussian_shift, gaussian_shift_sampled, disjoint_uniform");
  app.add_flag("--write-fixture", c.write_fixture, "Also write the fixture as source/target CSV");
  app.add_option("--covariates", c.covariates, "Comma-separated covariate columns")->delimiter(',');
  app.add_option("--outcome", c.outcome, "Outcome column of the source file");
  app.add_option("--mass", c.mass, "Mass column (uniform masses when absent)");
  app.add_option("--f0", c.f0, "Known outcome function column, for class fullinfo");
  app.add_flag("--standardize", c.standardize, "Z-score covariates with source moments");
  app.add_option("--class", c.function_class, "fullinfo, linear, rkhs or bounded")
      ->capture_default_str();
  app.add_option("--B", c.bound, "Size of the function class")->capture_default_str();
  app.add_option("--norm", c.norm, "Linear class coefficient norm: l2 or l1")
      ->capture_default_str();
  app.add_option("--degree", c.degree, "Linear class monomial degree")->capture_default_str();
  app.add_option("--bandwidth", c.bandwidth,
                 "Gaussian kernel bandwidth; 0 for the median heuristic")
      ->capture_default_str();
  app.add_option("--rkhs-convention", c.rkhs_convention,
                 "squared (||f|| <= B) or quadratic (a'Ka <= B)")
      ->capture_default_str();
  app.add_option("--phi", c.phi, "Divergence: chi2, kl or chi2_nonneg")->capture_default_str();
  app.add_option("--mode", c.mode, "single_mu, single_delta, sweep or overlap_only");
  CLI::Option* mu_opt = app.add_option("--mu", mu, "Variance penalty for single_mu");
  CLI::Option* delta_opt = app.add_option("--delta", delta, "Bias budget for single_delta");
  app.add_option("--mu-grid", c.mu_grid, "Comma-separated ascending mu values for sweep")
      ->delimiter(',');
  CLI::Option* sigma2_opt =
      app.add_option("--sigma2", sigma2, "Assumed noise variance (default 1)");
  app.add_option("--tolerance", c.tolerance, "Solver stationarity tolerance")
      ->capture_default_str();
  app.add_option("--max-iterations", c.max_iterations, "Iterative solver limit")
      ->capture_default_str();
  app.add_option("--delta-min-tolerance", c.delta_min_tolerance, "Stopping rule of the mu doubling")
      ->capture_default_str();
  app.add_option("--rkhs-method", c.rkhs_method, "exact or pg")->capture_default_str();
  app.add_option("--bounded-method", c.bounded_method, "exact or cd")->capture_default_str();
  app.add_option("--threads", c.threads, "Sweep worker threads")->capture_default_str();
  app.add_option("--seed", c.seed, "Seed for sampled fixtures and Monte-Carlo audits")
      ->capture_default_str();
  app.add_option("--out", c.out, "Output directory")->capture_default_str();
  app.add_flag("--oracle", c.oracle)->group("");
  app.add_option("--oracle-trials", c.oracle_trials)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return ParseOutcome{std::nullopt, app.exit(e, out, err)};
  } catch (const CLI::CallForAllHelp& e) {
    return ParseOutcome{std::nullopt, app.exit(e, out, err)};
  } catch (const CLI::ParseError& e) {
    err << "balw: error: " << e.what() << "\n";
    return ParseOutcome{std::nullopt, kConfigError};
  }
  if (mu_opt->count() > 0) c.mu = mu;
  if (delta_opt->count() > 0) c.delta = delta;
  if (sigma2_opt->count() > 0) c.sigma2 = sigma2;
  return ParseOutcome{std::move(c), std::nullopt};
}

int Run(const RunConfig& config, std::ostream& err) {
  try {
    return Runner(config, err).Execute();
  } catch (const ConvergenceError& e) {
    err << "balw: error: " << e.what() << "\n";
    return kNotConverged;
  } catch (const NumericError& e) {
    err << "balw: error: " << e.what() << "\n";
    return kNotConverged;
  } catch (const InfeasibleBiasError& e) {
    err << "balw: error: " << e.what() << "\n";
    return kInfeasibleDelta;
  } catch (const std::exception& e) {
    err << "balw: error: " << e.what() << "\n";
    return kConfigError;
  }
}

int Main(int argc, const char* const* argv) {
  const ParseOutcome parsed = ParseArgs(argc, argv, std::cout, std::cerr);
  if (parsed.exit_code) return *parsed.exit_code;
  return Run(*parsed.config, std::cerr);
}

}  // namespace balw::cli
