#include "noisyerm/experiment.hpp"

#include "noisyerm/parallel.hpp"
#include "noisyerm/risk.hpp"
#include "noisyerm/stats.hpp"

#include <stdexcept>

namespace noisyerm {

std::vector<double> default_rho_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 20; ++k) grid.push_back(k / 100.0);
  return grid;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  if (d < 2) fail("d: the cubic-logit model needs at least 2 dimensions");
  if (n_values.empty()) fail("n_values: must be nonempty");
  for (Index n : n_values)
    if (n < 1) fail("n_values: sample sizes must be >= 1");
  if (rho_grid.empty()) fail("rho_grid: must be nonempty");
  for (double rho : rho_grid)
    if (!(rho >= 0.0 && rho < 0.5)) fail("rho_grid: rho must lie in [0, 1/2)");
  if (trials < 1) fail("trials: must be >= 1");
  if (mc_test_samples < 1000) fail("mc_test_samples: must be >= 1000");
  if (saa_samples < 10000) fail("saa_samples: must be >= 10000");
  loss_by_name(loss);
  solver.validate();
}

std::uint64_t trial_seed(std::uint64_t master_seed, Index n, std::size_t rho_index, int trial) {
  return derive_seed(master_seed, StreamTag::trial,
                     {static_cast<std::uint64_t>(n), rho_index, static_cast<std::uint64_t>(trial)});
}

namespace {

const VectorXd& reported_weights(const FitResult& fit) {
  return fit.status == FitStatus::diverged && fit.first_crossing ? *fit.first_crossing : fit.w;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads) {
  cfg.validate();
  return run_experiment(cubic_logit_model(cfg.d), loss_by_name(cfg.loss), cfg, threads);
}

ExperimentResult run_experiment(const DataModel& model, const LossSpec& loss, const ExperimentConfig& cfg,
                                int threads) {
  ExperimentConfig resolved = cfg;
  resolved.d = model.dim;
  resolved.loss = loss.name();
  resolved.validate();

  const PopulationSample test =
      draw_population_sample(model, cfg.mc_test_samples, derive_seed(cfg.master_seed, StreamTag::test_sample));
  const PopulationSample saa =
      draw_population_sample(model, cfg.saa_samples, derive_seed(cfg.master_seed, StreamTag::saa_sample));

  ExperimentResult out;
  out.config = resolved;

  const std::size_t n_rho = cfg.rho_grid.size();
  out.population.resize(n_rho);
  parallel_for(n_rho, threads, [&](std::size_t k) {
    const double rho = cfg.rho_grid[k];
    const FitResult fit = fit_population_saa(loss, saa, rho, cfg.solver);
    const RiskEstimate risk = sample_risk(loss, test, reported_weights(fit));
    out.population[k] = PopulationPoint{rho, fit.status, risk.value, risk.std_error, fit.w.norm()};
  });

  const std::size_t per_n = n_rho * static_cast<std::size_t>(cfg.trials);
  out.trials.resize(cfg.n_values.size() * per_n);
  parallel_for(out.trials.size(), threads, [&](std::size_t task) {
    const Index n = cfg.n_values[task / per_n];
    const std::size_t k = (task % per_n) / static_cast<std::size_t>(cfg.trials);
    const int trial = static_cast<int>(task % static_cast<std::size_t>(cfg.trials));
    const double rho = cfg.rho_grid[k];

    TrialResult row;
    row.n = n;
    row.rho = rho;
    row.trial_index = trial;
    row.seed_used = trial_seed(cfg.master_seed, n, k, trial);

    const Dataset clean = sample_clean(model, n, row.seed_used);
    const Dataset noisy = corrupt(clean, rho, derive_seed(row.seed_used, StreamTag::corruption));
    const FitResult fit = fit_erm(loss, noisy, true, cfg.solver);
    const VectorXd& w = reported_weights(fit);
    const RiskEstimate risk = sample_risk(loss, test, w);
    row.status = fit.status;
    row.flagged = fit.status == FitStatus::diverged;
    row.risk_corrupted_fit = risk.value;
    row.risk_se = risk.std_error;
    row.w_norm = w.norm();
    if (rho == 0.0) {
      const FitResult clean_fit = fit_erm(loss, clean, false, cfg.solver);
      row.risk_clean_fit_if_rho0 = sample_risk(loss, test, reported_weights(clean_fit)).value;
    }
    out.trials[task] = row;
  });

  out.summary = summarize(out.trials);
  return out;
}

std::vector<CellSummary> summarize(const std::vector<TrialResult>& table) {
  if (table.empty()) throw std::invalid_argument("summarize: empty result table");
  std::vector<CellSummary> cells;
  std::vector<double> risks;
  auto flush = [&](const TrialResult& head, int diverged) {
    const MeanEstimate est = mean_estimate(std::span<const double>(risks));
    cells.push_back(CellSummary{head.n, head.rho, static_cast<int>(risks.size()), est.mean, est.std_error, diverged});
  };
  std::size_t start = 0;
  int diverged = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].n != table[start].n || table[i].rho != table[start].rho) {
      flush(table[start], diverged);
      risks.clear();
      diverged = 0;
      start = i;
    }
    risks.push_back(table[i].risk_corrupted_fit);
    diverged += table[i].status == FitStatus::diverged;
  }
  flush(table[start], diverged);
  return cells;
}

}  // namespace noisyerm
