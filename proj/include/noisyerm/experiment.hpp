#pragma once

#include "noisyerm/datagen.hpp"
#include "noisyerm/losses.hpp"
#include "noisyerm/solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace noisyerm {

/// 0, 0.01, ..., 0.2.
std::vector<double> default_rho_grid();

struct ExperimentConfig {
  int d = 50;
  std::vector<Index> n_values{400, 2000};
  std::vector<double> rho_grid = default_rho_grid();
  int trials = 100;
  std::string loss = "logistic";
  Index mc_test_samples = 100000;
  Index saa_samples = 100000;
  std::uint64_t master_seed = 20190101;
  SolveConfig solver;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct TrialResult {
  Index n = 0;
  double rho = 0.0;
  int trial_index = 0;
  FitStatus status = FitStatus::iteration_limit;
  /// Test-sample estimate of L at the corrupted-label fit. For a divergent
  /// fit this is evaluated where the norm first crossed divergence_norm.
  double risk_corrupted_fit = 0.0;
  double risk_se = 0.0;
  /// Set on rho = 0 rows only: the same quantity from the clean pipeline.
  std::optional<double> risk_clean_fit_if_rho0;
  double w_norm = 0.0;
  std::uint64_t seed_used = 0;
  bool flagged = false;
};

/// The penalized population minimizer at one rho (rho = 0 gives w*).
struct PopulationPoint {
  double rho = 0.0;
  FitStatus status = FitStatus::iteration_limit;
  double risk = 0.0;
  double risk_se = 0.0;
  double w_norm = 0.0;
};

struct CellSummary {
  Index n = 0;
  double rho = 0.0;
  int trials = 0;
  double mean_risk = 0.0;
  double se = 0.0;  // sd / sqrt(trials); 0 for a single trial
  int diverged_count = 0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<TrialResult> trials;  // ordered by (n, rho, trial)
  std::vector<PopulationPoint> population;  // ordered as config.rho_grid
  std::vector<CellSummary> summary;
};

/// Seed of one (n, rho index, trial) task.
std::uint64_t trial_seed(std::uint64_t master_seed, Index n, std::size_t rho_index, int trial);

/// The simulation on the cubic-logit model of dimension cfg.d.
ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads = 1);

/// The same pipeline on an arbitrary model and loss; cfg.d and cfg.loss
/// are ignored.
ExperimentResult run_experiment(const DataModel& model, const LossSpec& loss, const ExperimentConfig& cfg,
                                int threads = 1);

/// Per-(n, rho) mean, standard error and divergence count, in table order.
/// Throws std::invalid_argument on an empty table.
std::vector<CellSummary> summarize(const std::vector<TrialResult>& table);

}  // namespace noisyerm
