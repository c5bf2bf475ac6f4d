#include "noisyerm/theory_checks.hpp"

#include "noisyerm/parallel.hpp"
#include "noisyerm/risk.hpp"
#include "noisyerm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace noisyerm {

namespace {

double max_over_min(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::infinity();
}

std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

bool IdentityReport::all_within() const {
  return std::all_of(rows.begin(), rows.end(), [](const IdentityRow& r) { return r.within_4se; });
}

IdentityReport check_identity(const LossSpec& loss, const DataModel& model, Index n, double w_norm,
                              const std::vector<double>& rhos, int resamples, std::uint64_t seed) {
  if (resamples < 2) throw std::invalid_argument("check_identity: need at least 2 resamples");
  for (double rho : rhos) require_valid_rho(rho);
  const Dataset ds = sample_clean(model, n, derive_seed(seed, StreamTag::population));
  const VectorXd w = w_norm * random_directions(model.dim, 1, derive_seed(seed, StreamTag::directions)).col(0);
  const double risk = empirical_risk(loss, ds, w).value;
  const double reg = empirical_regularizer(loss, ds, w).value;

  IdentityReport report{n, model.dim, resamples, w_norm, risk, reg, {}};
  for (std::size_t k = 0; k < rhos.size(); ++k) {
    const double rho = rhos[k];
    Eigen::ArrayXd draws(resamples);
    for (int m = 0; m < resamples; ++m) {
      const Dataset noisy = corrupt(ds, rho, derive_seed(seed, StreamTag::resample, {k, static_cast<std::uint64_t>(m)}));
      draws(m) = corrupted_empirical_risk(loss, noisy, w).value;
    }
    const MeanEstimate est = mean_estimate(draws);
    IdentityRow row;
    row.rho = rho;
    row.resampled_mean = est.mean;
    row.resampled_se = est.std_error;
    row.predicted = (1.0 - 2.0 * rho) * (risk + lambda_of_rho(rho) * reg);
    const double diff = est.mean - row.predicted;
    row.z_score = est.std_error > 0.0 ? diff / est.std_error : 0.0;
    row.within_4se = std::abs(diff) <= 4.0 * est.std_error + 1e-12 * std::abs(row.predicted);
    report.rows.push_back(row);
  }
  return report;
}

double sandwich_lower_constant(const LossConstants& loss, const FeatureConstants& features) {
  return loss.gamma * std::log(2.0) / (4.0 * features.a2);
}

double sandwich_upper_constant(const LossConstants& loss, const FeatureConstants& features) {
  return 0.5 * loss.lipschitz * std::sqrt(features.a1 / features.a0);
}

SandwichReport check_sandwich(const LossSpec& loss, const DataModel& model, const std::vector<double>& norms,
                              int directions, Index mc_samples, std::uint64_t seed) {
  if (!model.constants) throw std::invalid_argument("check_sandwich: model has no feature certificate");
  if (norms.empty()) throw std::invalid_argument("check_sandwich: empty norm grid");
  for (double s : norms)
    if (!(s >= 0.0 && s <= 1e3)) throw std::invalid_argument("check_sandwich: norms must lie in [0, 1e3]");
  if (directions < 1) throw std::invalid_argument("check_sandwich: need at least one direction");

  SandwichReport report;
  report.c_L = sandwich_lower_constant(loss.constants(), *model.constants);
  report.c_U = sandwich_upper_constant(loss.constants(), *model.constants);
  report.ell0 = loss.at_zero();

  const PopulationSample sample = draw_population_sample(model, mc_samples, derive_seed(seed, StreamTag::population));
  const MatrixXd u = random_directions(model.dim, directions, derive_seed(seed, StreamTag::directions));
  const MatrixXd projections = sample.x * u;
  Eigen::ArrayXd values(sample.size());
  for (int j = 0; j < directions; ++j) {
    for (double s : norms) {
      for (Index i = 0; i < sample.size(); ++i) {
        const double m = s * projections(i, j);
        values(i) = 0.5 * (loss.eval(m) + loss.eval(-m));
      }
      const MeanEstimate est = mean_estimate(values);
      SandwichPoint p;
      p.norm = s;
      p.direction = j;
      p.estimate = est.mean;
      p.std_error = est.std_error;
      p.lower = std::max(report.c_L * s, report.ell0);
      p.upper = report.c_U * s + report.ell0;
      p.violated = est.mean < p.lower - 4.0 * est.std_error || est.mean > p.upper + 4.0 * est.std_error;
      report.violations += p.violated;
      report.samples.push_back(p);
    }
  }
  return report;
}

ShrinkageReport check_shrinkage(const LossSpec& loss, const DataModel& model, std::vector<double> rhos,
                                Index saa_samples, std::uint64_t seed, const SolveConfig& cfg, int threads) {
  rhos = sorted_unique(std::move(rhos));
  if (rhos.size() < 4) throw std::invalid_argument("check_shrinkage: need at least 4 distinct values of rho");
  for (double rho : rhos)
    if (!(rho > 0.0 && rho < 0.5)) throw std::invalid_argument("check_shrinkage: rho must lie in (0, 1/2)");
  if (saa_samples < 10000) throw std::invalid_argument("check_shrinkage: saa_samples must be >= 10000");

  const PopulationSample saa = draw_population_sample(model, saa_samples, derive_seed(seed, StreamTag::saa_sample));
  ShrinkageReport report;
  report.rows.resize(rhos.size());
  report.fits.resize(rhos.size());
  parallel_for(rhos.size(), threads, [&](std::size_t k) {
    report.fits[k] = fit_population_saa(loss, saa, rhos[k], cfg);
    const double norm = report.fits[k].w.norm();
    report.rows[k] = ShrinkageRow{rhos[k], report.fits[k].status, norm, norm * std::sqrt(rhos[k])};
  });

  std::vector<double> log_rho, log_norm, scaled;
  report.all_converged = true;
  report.bound_consistent = true;
  report.strictly_decreasing = true;
  for (std::size_t k = 0; k < report.rows.size(); ++k) {
    const ShrinkageRow& row = report.rows[k];
    report.all_converged &= row.status == FitStatus::converged;
    report.bound_consistent &= row.status != FitStatus::diverged;
    if (k > 0 && !(row.w_norm < report.rows[k - 1].w_norm)) report.strictly_decreasing = false;
    scaled.push_back(row.scaled_norm);
    if (row.w_norm > 0.0) {
      log_rho.push_back(std::log(row.rho));
      log_norm.push_back(std::log(row.w_norm));
    }
  }
  report.log_log_slope = regression_slope(log_rho, log_norm);
  report.scaled_ratio = max_over_min(scaled);
  return report;
}

RiskGapReport check_risk_gap(const LossSpec& loss, const DataModel& model, std::vector<double> rhos,
                             Index saa_samples, Index mc_samples, std::uint64_t seed, const SolveConfig& cfg,
                             int threads) {
  rhos.push_back(0.0);
  rhos = sorted_unique(std::move(rhos));
  for (double rho : rhos) require_valid_rho(rho);
  if (saa_samples < 10000) throw std::invalid_argument("check_risk_gap: saa_samples must be >= 10000");

  const PopulationSample saa = draw_population_sample(model, saa_samples, derive_seed(seed, StreamTag::saa_sample));
  const PopulationSample test = draw_population_sample(model, mc_samples, derive_seed(seed, StreamTag::test_sample));

  // Per-sample test losses are kept for paired standard errors.
  std::vector<Eigen::ArrayXd> losses(rhos.size());
  RiskGapReport report;
  report.rows.resize(rhos.size());
  parallel_for(rhos.size(), threads, [&](std::size_t k) {
    const FitResult fit = fit_population_saa(loss, saa, rhos[k], cfg);
    const VectorXd& w = fit.status == FitStatus::diverged && fit.first_crossing ? *fit.first_crossing : fit.w;
    losses[k] = loss_values(loss, (test.x * w).cwiseProduct(test.y));
    const MeanEstimate est = mean_estimate(losses[k]);
    RiskGapRow row;
    row.rho = rhos[k];
    row.status = fit.status;
    row.risk = est.mean;
    row.risk_se = est.std_error;
    report.rows[k] = row;
  });

  std::size_t best = rhos.size();
  for (std::size_t k = 0; k < rhos.size(); ++k) {
    if (report.rows[k].status != FitStatus::converged) continue;
    if (best == rhos.size() || report.rows[k].risk < report.rows[best].risk) best = k;
  }
  if (best == rhos.size()) throw std::runtime_error("check_risk_gap: no solve converged");
  report.inf_proxy = report.rows[best].risk;
  report.inf_proxy_rho = report.rows[best].rho;

  std::vector<double> ratios;
  report.nonnegative = true;
  report.nondecreasing = true;
  for (std::size_t k = 0; k < rhos.size(); ++k) {
    RiskGapRow& row = report.rows[k];
    row.gap = row.risk - report.inf_proxy;
    row.gap_se = k == best ? 0.0 : mean_estimate(losses[k] - losses[best]).std_error;
    report.nonnegative &= row.gap >= -2.0 * row.gap_se;
    if (row.rho > 0.0) {
      row.gap_over_sqrt_rho = row.gap / std::sqrt(row.rho);
      if (row.gap > 0.0) ratios.push_back(row.gap_over_sqrt_rho);
    }
    if (k > 0) {
      const double step_se = mean_estimate(losses[k] - losses[k - 1]).std_error;
      if (row.gap < report.rows[k - 1].gap - step_se) report.nondecreasing = false;
    }
  }
  report.ratio_spread = max_over_min(ratios);
  return report;
}

SweepReport theorem1_sweep(const LossSpec& loss, const DataModel& model, const std::vector<Index>& n_grid,
                           const std::vector<double>& rho_grid, int trials, std::uint64_t seed,
                           const SweepOptions& options) {
  if (trials < 20) throw std::invalid_argument("theorem1_sweep: trials must be >= 20");
  ExperimentConfig cfg;
  cfg.n_values = n_grid;
  cfg.rho_grid = rho_grid;
  cfg.trials = trials;
  cfg.mc_test_samples = options.mc_test_samples;
  cfg.saa_samples = options.saa_samples;
  cfg.master_seed = seed;
  cfg.solver = options.solver;

  SweepReport report;
  report.experiment = run_experiment(model, loss, cfg, options.threads);
  report.n_grid = n_grid;

  double proxy = std::numeric_limits<double>::infinity();
  for (const PopulationPoint& p : report.experiment.population)
    if (p.status == FitStatus::converged) proxy = std::min(proxy, p.risk);
  if (!std::isfinite(proxy)) throw std::runtime_error("theorem1_sweep: no population solve converged");
  report.inf_proxy = proxy;

  for (const CellSummary& c : report.experiment.summary)
    report.cells.push_back(SweepCell{c.n, c.rho, c.trials, c.mean_risk - proxy, c.se, c.diverged_count});

  for (Index n : n_grid) {
    const SweepCell* best = nullptr;
    const SweepCell* small = nullptr;
    for (const SweepCell& c : report.cells) {
      if (c.n != n) continue;
      if (!best || c.mean_excess < best->mean_excess) best = &c;
      if (c.rho > 0.0 && (!small || c.rho < small->rho)) small = &c;
    }
    report.best_rho.push_back(best->rho);
    const double nd = static_cast<double>(n);
    report.bound_rho.push_back(std::sqrt(model.dim * std::log(nd) / nd));
    report.small_rho_competitive.push_back(
        small && small->mean_excess <= best->mean_excess + 2.0 * pooled_se(small->se, best->se));
  }
  report.best_rho_nonincreasing = true;
  for (std::size_t i = 1; i < n_grid.size(); ++i)
    if (n_grid[i] > n_grid[i - 1] && report.best_rho[i] > report.best_rho[i - 1]) report.best_rho_nonincreasing = false;
  return report;
}

std::string_view to_string(ConcQuantity q) {
  switch (q) {
    case ConcQuantity::margin: return "conc1-margin";
    case ConcQuantity::expsum: return "conc2-expsum";
    case ConcQuantity::sup_gap: return "conc3-sup-gap";
  }
  return "unknown";
}

ConcQuantity conc_quantity_by_name(std::string_view name) {
  for (ConcQuantity q : {ConcQuantity::margin, ConcQuantity::expsum, ConcQuantity::sup_gap})
    if (to_string(q) == name) return q;
  throw std::invalid_argument("unknown concentration quantity '" + std::string(name) +
                              "' (expected conc1-margin, conc2-expsum or conc3-sup-gap)");
}

namespace {

// Penalized population risk at every column of `weights`, on one sample.
VectorXd penalized_reference(const LossSpec& loss, const PopulationSample& ref, const MatrixXd& weights, double rho) {
  constexpr Index kChunk = 16;
  VectorXd out(weights.cols());
  const MatrixXd z = ref.signed_features();
  for (Index c0 = 0; c0 < weights.cols(); c0 += kChunk) {
    const Index width = std::min(kChunk, weights.cols() - c0);
    const MatrixXd m = z * weights.middleCols(c0, width);
    for (Index j = 0; j < width; ++j) {
      double sum = 0.0;
      for (Index i = 0; i < m.rows(); ++i) sum += (1.0 - rho) * loss.eval(m(i, j)) + rho * loss.eval(-m(i, j));
      out(c0 + j) = sum / static_cast<double>(m.rows());
    }
  }
  return out;
}

}  // namespace

ConcentrationReport estimate_conc_quantities(ConcQuantity quantity, const LossSpec* loss, const DataModel& model,
                                             const ConcConfig& cfg, std::uint64_t seed, int threads) {
  require_valid_rho(cfg.rho);
  if (cfg.directions < 500) throw std::invalid_argument("estimate_conc_quantities: directions must be >= 500");
  if (cfg.n_grid.empty() || cfg.trials < 1) throw std::invalid_argument("estimate_conc_quantities: empty grid");
  if (quantity == ConcQuantity::sup_gap && !loss)
    throw std::invalid_argument("estimate_conc_quantities: conc3-sup-gap needs a loss");
  if (!(cfg.r > 0.0) || !(cfg.t > 0.0)) throw std::invalid_argument("estimate_conc_quantities: r and t must be positive");

  const MatrixXd u = random_directions(model.dim, cfg.directions, derive_seed(seed, StreamTag::directions));
  MatrixXd weights;
  VectorXd reference;
  if (quantity == ConcQuantity::sup_gap) {
    weights.resize(model.dim, 3 * u.cols());
    weights << 0.25 * cfg.r * u, 0.5 * cfg.r * u, cfg.r * u;
    const PopulationSample ref =
        draw_population_sample(model, cfg.reference_samples, derive_seed(seed, StreamTag::reference));
    reference = penalized_reference(*loss, ref, weights, cfg.rho);
  }

  ConcentrationReport report;
  report.quantity = quantity;
  report.n_grid = cfg.n_grid;
  report.directions = cfg.directions;
  report.estimates.resize(static_cast<Index>(cfg.n_grid.size()), cfg.trials);

  const std::size_t tasks = cfg.n_grid.size() * static_cast<std::size_t>(cfg.trials);
  parallel_for(tasks, threads, [&](std::size_t task) {
    const std::size_t ni = task / static_cast<std::size_t>(cfg.trials);
    const int trial = static_cast<int>(task % static_cast<std::size_t>(cfg.trials));
    const Index n = cfg.n_grid[ni];
    const std::uint64_t s = derive_seed(seed, StreamTag::trial, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(trial)});
    const Dataset clean = sample_clean(model, n, s);
    const Dataset noisy = corrupt(clean, cfg.rho, derive_seed(s, StreamTag::corruption));
    double value = 0.0;
    switch (quantity) {
      case ConcQuantity::margin: {
        const MatrixXd m = noisy.y_tilde().asDiagonal() * (noisy.x() * u);
        value = (-m).cwiseMax(0.0).colwise().mean().minCoeff();
        break;
      }
      case ConcQuantity::expsum: {
        const MatrixXd p = noisy.x() * u;
        value = (-cfg.t * p.array().abs()).exp().colwise().mean().maxCoeff();
        break;
      }
      case ConcQuantity::sup_gap: {
        const MatrixXd m = noisy.y_tilde().asDiagonal() * (noisy.x() * weights);
        for (Index j = 0; j < m.cols(); ++j) {
          double sum = 0.0;
          for (Index i = 0; i < m.rows(); ++i) sum += loss->eval(m(i, j));
          value = std::max(value, std::abs(sum / static_cast<double>(n) - reference(j)));
        }
        break;
      }
    }
    report.estimates(static_cast<Index>(ni), trial) = value;
  });

  std::vector<double> log_n, log_mean;
  for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
    const MeanEstimate est = mean_estimate(report.estimates.row(static_cast<Index>(ni)));
    report.mean.push_back(est.mean);
    report.se.push_back(est.std_error);
    if (est.mean > 0.0) {
      log_n.push_back(std::log(static_cast<double>(cfg.n_grid[ni])));
      log_mean.push_back(std::log(est.mean));
    }
  }
  report.trend_slope = regression_slope(log_n, log_mean);
  report.nonincreasing_within_2se = true;
  for (std::size_t k = 1; k < report.mean.size(); ++k)
    if (report.mean[k] > report.mean[k - 1] + 2.0 * pooled_se(report.se[k], report.se[k - 1]))
      report.nonincreasing_within_2se = false;
  return report;
}

}  // namespace noisyerm
