#include "balw/diagnostics.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"

#include "balw/csv.hpp"
#include "balw/errors.hpp"

namespace balw {
namespace {

using nlohmann::json;

json Number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json ToJson(const OverlapReport& o) {
  return json{{"class", ToString(o.kind)},
              {"delta_max", Number(o.delta_max)},
              {"delta_min", Number(o.delta_min)},
              {"ratio", Number(o.ratio)},
              {"mu_max", Number(o.mu_max)},
              {"bound", o.bound ? Number(*o.bound) : json(nullptr)},
              {"delta_min_over_bound",
               o.delta_min_over_bound ? Number(*o.delta_min_over_bound) : json(nullptr)},
              {"delta_max_over_bound",
               o.delta_max_over_bound ? Number(*o.delta_max_over_bound) : json(nullptr)},
              {"tolerance", Number(o.tolerance)},
              {"target_support_covered", o.target_support_covered},
              {"narrative", o.narrative}};
}

json ToJson(const FrontierRecord& r) {
  return json{{"mu", Number(r.mu)},
              {"delta", Number(r.delta)},
              {"variance", Number(r.weight_variance)},
              {"mse_bound", Number(r.mse_bound)},
              {"mse_total", Number(r.mse_total)},
              {"weight_min", Number(r.weight_min)},
              {"weight_max", Number(r.weight_max)}};
}

json ToJson(const SolutionSummary& s) {
  return json{{"mu", Number(s.mu)},
              {"delta", Number(s.delta)},
              {"variance", Number(s.weight_variance)},
              {"mse_bound", Number(s.mse_bound)},
              {"mse_total", Number(s.mse_total)},
              {"weight_min", Number(s.weight_min)},
              {"weight_max", Number(s.weight_max)},
              {"ess_fraction", Number(s.ess_fraction)},
              {"lambda_star", s.lambda_star ? Number(*s.lambda_star) : json(nullptr)},
              {"dual_objective", Number(s.dual_objective)},
              {"iterations", s.iterations},
              {"residual", Number(s.residual)}};
}

std::string Narrative(double ratio, bool covered) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "delta_min/delta_max = %.3g: ", ratio);
  std::string text = buf;
  if (ratio < 0.1) {
    text += "good overlap; reweighting removes nearly all worst-case bias";
  } else if (ratio < 0.5) {
    text += "partial overlap; a visible share of worst-case bias survives any reweighting";
  } else {
    text += "poor overlap; most worst-case bias cannot be removed by reweighting";
  }
  if (!covered) text += " (some target points lie outside the source sample)";
  return text;
}

}  // namespace

double MseBound(const DualSolution& solution, const Population& pop, double sigma2) {
  if (!(sigma2 > 0.0)) throw ContractError("sigma2 must be positive");
  return solution.delta * solution.delta + sigma2 * WeightVariance(solution.weights, pop);
}

double MseBoundMuForm(double delta, double mu, double var_f_star, double sigma2) {
  if (!(sigma2 > 0.0)) throw ContractError("sigma2 must be positive");
  const double half = 0.5 * mu;
  return delta * delta + sigma2 * half * half * var_f_star;
}

double MseBoundDeltaForm(double delta, double delta_star, double var_f_star, double sigma2) {
  if (!(sigma2 > 0.0)) throw ContractError("sigma2 must be positive");
  if (!(var_f_star > 0.0)) throw ContractError("the delta form needs Var_P f* > 0");
  const double gap = delta_star - delta;
  return delta * delta + sigma2 * gap * gap / var_f_star;
}

double MseTotal(const DualSolution& solution, const Population& pop, double sigma2) {
  return MseBound(solution, pop, sigma2) + sigma2;
}

OverlapReport AssessOverlap(const DualProblem& problem, double tolerance) {
  OverlapReport out;
  out.kind = problem.bound_class().spec().kind();
  out.tolerance = tolerance;
  out.delta_max = problem.DeltaMax();
  const DeltaMinResult floor = FindDeltaMin(problem, tolerance);
  out.delta_min = floor.delta_min;
  out.mu_max = floor.mu_max;
  out.ratio = out.delta_max > 0.0 ? out.delta_min / out.delta_max : 0.0;
  const FunctionClassSpec& spec = problem.bound_class().spec();
  if (spec.kind() != ClassKind::FullInfo) {
    out.bound = spec.bound();
    out.delta_min_over_bound = out.delta_min / spec.bound();
    out.delta_max_over_bound = out.delta_max / spec.bound();
  }
  out.target_support_covered = TargetSupportCovered(problem.population());
  out.narrative = Narrative(out.ratio, out.target_support_covered);
  return out;
}

SolutionSummary Summarize(const DualSolution& solution, const Population& pop, double sigma2) {
  SolutionSummary s;
  s.mu = solution.mu;
  s.delta = solution.delta;
  s.weight_variance = WeightVariance(solution.weights, pop);
  s.mse_bound = solution.delta * solution.delta + sigma2 * s.weight_variance;
  s.mse_total = s.mse_bound + sigma2;
  s.weight_min = solution.weights.values().minCoeff();
  s.weight_max = solution.weights.values().maxCoeff();
  s.ess_fraction = 1.0 / (1.0 + s.weight_variance);
  s.lambda_star = solution.lambda_star;
  s.dual_objective = solution.dual_objective;
  s.iterations = solution.iterations;
  s.residual = solution.residual;
  return s;
}

std::string ReportJson(const Report& report) {
  json root;
  root["config"] = report.config;
  root["overlap"] = report.overlap ? ToJson(*report.overlap) : json(nullptr);
  json frontier = json::array();
  for (const FrontierRecord& r : report.frontier) frontier.push_back(ToJson(r));
  root["frontier"] = std::move(frontier);
  root["chosen"] = report.chosen ? ToJson(*report.chosen) : json(nullptr);
  json metrics = json::object();
  for (const auto& [k, v] : report.metrics) metrics[k] = Number(v);
  root["metrics"] = std::move(metrics);
  root["warnings"] = report.warnings;
  return root.dump(2) + "\n";
}

void WriteFrontierCsv(const std::string& path, const FrontierProfile& profile) {
  std::vector<std::vector<double>> cols(4);
  for (const FrontierRecord& r : profile.records) {
    cols[0].push_back(r.mu);
    cols[1].push_back(r.delta);
    cols[2].push_back(r.weight_variance);
    cols[3].push_back(r.mse_bound);
  }
  csv::Write(path, {"mu", "delta", "variance", "mse_bound"}, cols);
}

void WriteWeightsCsv(const std::string& path, const WeightVector& weights) {
  std::vector<std::vector<double>> cols(2);
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    cols[0].push_back(static_cast<double>(i));
    cols[1].push_back(weights[i]);
  }
  csv::Write(path, {"row_index", "weight"}, cols);
}

}  // namespace balw
