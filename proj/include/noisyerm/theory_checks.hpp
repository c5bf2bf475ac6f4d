#pragma once

#include "noisyerm/datagen.hpp"
#include "noisyerm/experiment.hpp"
#include "noisyerm/losses.hpp"
#include "noisyerm/solver.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace noisyerm {

// ---------------------------------------------------------------------------
// Corruption identity: E[corrupted empirical risk | data] against
// (1 - 2 rho)(L_n + lambda R_n).

struct IdentityRow {
  double rho = 0.0;
  double resampled_mean = 0.0;
  double resampled_se = 0.0;
  double predicted = 0.0;
  double z_score = 0.0;  // (mean - predicted) / se; 0 when se is 0
  bool within_4se = false;
};

struct IdentityReport {
  Index n = 0;
  int d = 0;
  int resamples = 0;
  double w_norm = 0.0;
  double clean_risk = 0.0;   // empirical risk on the clean labels
  double regularizer = 0.0;  // empirical regularizer
  std::vector<IdentityRow> rows;
  bool all_within() const;
};

/// Draws one clean dataset of size n, a random w of norm w_norm and, for
/// each rho, `resamples` independent corruptions of the labels.
IdentityReport check_identity(const LossSpec& loss, const DataModel& model, Index n, double w_norm,
                              const std::vector<double>& rhos, int resamples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Two-sided bound max{c_L |w|, l(0)} <= R(w) <= c_U |w| + l(0).

/// gamma log 2 / (4 a2).
double sandwich_lower_constant(const LossConstants& loss, const FeatureConstants& features);
/// (L / 2) sqrt(a1 / a0).
double sandwich_upper_constant(const LossConstants& loss, const FeatureConstants& features);

struct SandwichPoint {
  double norm = 0.0;
  int direction = 0;
  double estimate = 0.0;
  double std_error = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool violated = false;
};

struct SandwichReport {
  double c_L = 0.0;
  double c_U = 0.0;
  double ell0 = 0.0;
  std::vector<SandwichPoint> samples;
  int violations = 0;  // breaches by more than 4 standard errors
};

/// Requires model.constants (see with_certificate) and norms in [0, 1e3].
SandwichReport check_sandwich(const LossSpec& loss, const DataModel& model, const std::vector<double>& norms,
                              int directions, Index mc_samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Norm of the penalized population minimizer as rho grows.

struct ShrinkageRow {
  double rho = 0.0;
  FitStatus status = FitStatus::iteration_limit;
  double w_norm = 0.0;
  double scaled_norm = 0.0;  // w_norm * sqrt(rho)
};

struct ShrinkageReport {
  std::vector<ShrinkageRow> rows;  // ascending rho
  std::vector<FitResult> fits;     // one per row
  double log_log_slope = 0.0;      // of log w_norm on log rho
  double scaled_ratio = 0.0;       // max / min of scaled_norm
  bool strictly_decreasing = false;
  bool all_converged = false;
  /// False when some solve diverged: a bounded minimizer must exist for rho > 0.
  bool bound_consistent = false;
};

/// Requires at least 4 values of rho, each in (0, 1/2). One SAA sample is
/// shared by all solves.
ShrinkageReport check_shrinkage(const LossSpec& loss, const DataModel& model, std::vector<double> rhos,
                                Index saa_samples, std::uint64_t seed, const SolveConfig& cfg = {},
                                int threads = 1);

// ---------------------------------------------------------------------------
// Population risk of the penalized minimizer above an infimum proxy.

struct RiskGapRow {
  double rho = 0.0;
  FitStatus status = FitStatus::iteration_limit;
  double risk = 0.0;
  double risk_se = 0.0;
  double gap = 0.0;
  double gap_se = 0.0;          // paired standard error against the proxy solve
  double gap_over_sqrt_rho = 0.0;  // 0 at rho = 0
};

struct RiskGapReport {
  double inf_proxy = 0.0;
  double inf_proxy_rho = 0.0;
  std::vector<RiskGapRow> rows;  // rho = 0 first, then ascending
  double ratio_spread = 0.0;     // max / min of gap / sqrt(rho) over positive gaps
  bool nonnegative = false;
  /// Adjacent gaps never drop by more than one paired standard error.
  bool nondecreasing = false;
};

/// The proxy for inf L is the smallest test risk among converged solves,
/// rho = 0 included when that solve converges.
RiskGapReport check_risk_gap(const LossSpec& loss, const DataModel& model, std::vector<double> rhos,
                             Index saa_samples, Index mc_samples, std::uint64_t seed, const SolveConfig& cfg = {},
                             int threads = 1);

// ---------------------------------------------------------------------------
// Excess risk of corrupted-label ERM over (n, rho).

struct SweepOptions {
  Index mc_test_samples = 100000;
  Index saa_samples = 100000;
  SolveConfig solver;
  int threads = 1;
};

struct SweepCell {
  Index n = 0;
  double rho = 0.0;
  int trials = 0;
  double mean_excess = 0.0;
  double se = 0.0;
  int diverged_count = 0;
};

struct SweepReport {
  double inf_proxy = 0.0;
  std::vector<SweepCell> cells;
  std::vector<Index> n_grid;
  std::vector<double> best_rho;    // per n, argmin of mean excess
  std::vector<double> bound_rho;   // per n, sqrt(d log n / n)
  /// Per n: the smallest positive rho is within 2 pooled SE of the best cell.
  std::vector<bool> small_rho_competitive;
  bool best_rho_nonincreasing = false;
  ExperimentResult experiment;
};

/// Requires trials >= 20.
SweepReport theorem1_sweep(const LossSpec& loss, const DataModel& model, const std::vector<Index>& n_grid,
                           const std::vector<double>& rho_grid, int trials, std::uint64_t seed,
                           const SweepOptions& options = {});

// ---------------------------------------------------------------------------
// Uniform deviation quantities, with sphere suprema replaced by maxima over
// a fixed random direction set.

enum class ConcQuantity {
  margin,   // inf_u (1/n) sum max(0, -X_i'u y~_i)
  expsum,   // sup_u (1/n) sum exp(-t |X_i'u|)
  sup_gap,  // sup_{|w| <= r} |corrupted empirical risk - penalized population risk|
};

std::string_view to_string(ConcQuantity q);
/// Parses "conc1-margin", "conc2-expsum" or "conc3-sup-gap".
ConcQuantity conc_quantity_by_name(std::string_view name);

struct ConcConfig {
  double rho = 0.1;
  std::vector<Index> n_grid{250, 1000, 4000, 16000};
  int directions = 500;
  double r = 5.0;
  double t = 100.0;
  int trials = 5;
  Index reference_samples = 400000;
};

struct ConcentrationReport {
  ConcQuantity quantity = ConcQuantity::sup_gap;
  std::vector<Index> n_grid;
  MatrixXd estimates;  // n_grid.size() x trials
  std::vector<double> mean;
  std::vector<double> se;
  double trend_slope = 0.0;  // of log mean on log n
  /// Each mean is at most the previous one plus 2 pooled SE.
  bool nonincreasing_within_2se = false;
  int directions = 0;
};

/// For sup_gap the sup is taken over radii {r/4, r/2, r} times the direction
/// set, against a penalized population reference on one shared sample.
/// Requires directions >= 500; `loss` is needed for sup_gap only.
ConcentrationReport estimate_conc_quantities(ConcQuantity quantity, const LossSpec* loss, const DataModel& model,
                                             const ConcConfig& cfg, std::uint64_t seed, int threads = 1);

}  // namespace noisyerm
