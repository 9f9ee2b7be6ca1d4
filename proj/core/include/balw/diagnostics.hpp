#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "balw/dual_solver.hpp"

namespace balw {

/// delta^2 + sigma^2 D_2(w): bias plus the weight-variance excess over uniform weights.
double MseBound(const DualSolution& solution, const Population& pop, double sigma2);
/// The same bound from mu: delta^2 + sigma^2 (mu/2)^2 Var_P f*.
double MseBoundMuForm(double delta, double mu, double var_f_star, double sigma2);
/// The same bound from delta: delta^2 + sigma^2 (Delta* - delta)^2 / Var_P f*, where
/// Delta* = E_Q f* - E_P f*. Requires Var_P f* > 0.
double MseBoundDeltaForm(double delta, double delta_star, double var_f_star, double sigma2);
/// delta^2 + sigma^2 E_P[w^2]: includes the variance uniform weights already carry.
double MseTotal(const DualSolution& solution, const Population& pop, double sigma2);

struct OverlapReport {
  ClassKind kind = ClassKind::Bounded;
  double delta_max = 0.0;
  double delta_min = 0.0;
  /// delta_min / delta_max, or 0 when delta_max = 0.
  double ratio = 0.0;
  double mu_max = 0.0;
  /// B for the norm-ball classes, with both biases as fractions of it.
  std::optional<double> bound;
  std::optional<double> delta_min_over_bound;
  std::optional<double> delta_max_over_bound;
  double tolerance = 0.0;
  bool target_support_covered = false;
  std::string narrative;
};

OverlapReport AssessOverlap(const DualProblem& problem, double tolerance = 1e-4);

struct SolutionSummary {
  double mu = 0.0;
  double delta = 0.0;
  double weight_variance = 0.0;
  double mse_bound = 0.0;
  double mse_total = 0.0;
  double weight_min = 0.0;
  double weight_max = 0.0;
  /// 1 / E_P[w^2]: effective sample size as a fraction of n_P (P-mass weighted).
  double ess_fraction = 0.0;
  std::optional<double> lambda_star;
  double dual_objective = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

SolutionSummary Summarize(const DualSolution& solution, const Population& pop, double sigma2);

struct Report {
  std::map<std::string, std::string> config;
  std::optional<OverlapReport> overlap;
  std::vector<FrontierRecord> frontier;
  std::optional<SolutionSummary> chosen;
  std::map<std::string, double> metrics;
  std::vector<std::string> warnings;
};

/// Pretty-printed JSON with sorted keys; non-finite numbers become null.
std::string ReportJson(const Report& report);

/// Columns mu, delta, variance, mse_bound.
void WriteFrontierCsv(const std::string& path, const FrontierProfile& profile);

/// Columns row_index, weight.
void WriteWeightsCsv(const std::string& path, const WeightVector& weights);

}  // namespace balw
