#pragma once

#include "noisyerm/datagen.hpp"
#include "noisyerm/losses.hpp"
#include "noisyerm/risk.hpp"

#include <Eigen/Core>

#include <optional>
#include <string_view>
#include <vector>

namespace noisyerm {

enum class StepRule { backtracking_armijo, diminishing_subgradient };

struct SolveConfig {
  int max_iters = 20000;
  double grad_tol = 1e-8;
  double divergence_norm = 1e4;
  double objective_tol = 1e-6;
  /// Defaults to Armijo for smooth losses and subgradient steps otherwise.
  std::optional<StepRule> step_rule;
  /// Starting point; zero when unset.
  std::optional<VectorXd> init;
  int trace_every = 1;
  /// Trailing trace entries inspected by the divergence verdict.
  int divergence_window = 5;

  /// Throws std::invalid_argument on non-positive tolerances or max_iters < 1.
  void validate() const;
};

enum class FitStatus { converged, diverged, iteration_limit };

std::string_view to_string(FitStatus status);

struct FitResult {
  FitStatus status = FitStatus::iteration_limit;
  VectorXd w;
  double objective = 0.0;
  double grad_norm = 0.0;
  int iters = 0;
  std::vector<double> w_norm_trace;
  std::vector<double> objective_trace;
  /// The first iterate whose norm reached divergence_norm, if any.
  std::optional<VectorXd> first_crossing;
};

/// Convex objective on margins m = Z w, Z the label-signed feature rows:
///   (1/n) sum_i [ pos_weight * l(m_i) + neg_weight * l(-m_i) ].
/// ERM uses (1, 0); the penalized population objective uses (1 - rho, rho).
class MarginObjective {
 public:
  MarginObjective(const LossSpec& loss, MatrixXd signed_features, double pos_weight = 1.0, double neg_weight = 0.0);

  double value(const Eigen::Ref<const VectorXd>& w) const;
  double value_and_gradient(const Eigen::Ref<const VectorXd>& w, VectorXd& grad) const;
  /// True when every margin is strictly positive, the loss never reaches
  /// its infimum and only the l(m) term is present: the objective then keeps
  /// decreasing along the ray through w.
  bool certifies_unbounded_ray(const Eigen::Ref<const VectorXd>& w) const;

  Index dim() const noexcept { return z_.cols(); }
  Index size() const noexcept { return z_.rows(); }
  const LossSpec& loss() const noexcept { return loss_; }

 private:
  LossSpec loss_;
  MatrixXd z_;
  double pos_weight_;
  double neg_weight_;
};

FitResult minimize(const MarginObjective& objective, const SolveConfig& cfg);

/// Minimizes the clean (or, with use_corrupted, the corrupted) empirical risk.
FitResult fit_erm(const LossSpec& loss, const Dataset& ds, bool use_corrupted, const SolveConfig& cfg = {});

/// Minimizes (1 - rho) L_saa(w) + rho L_saa(-w) on a fixed sample.
FitResult fit_population_saa(const LossSpec& loss, const PopulationSample& sample, double rho,
                             const SolveConfig& cfg = {});

/// Draws the SAA sample (saa_samples >= 1e4) and solves.
FitResult fit_population_saa(const LossSpec& loss, const DataModel& model, double rho, Index saa_samples,
                             std::uint64_t seed, const SolveConfig& cfg = {});

enum class DivergenceVerdict { diverged, not_diverged };

struct DivergenceEvidence {
  std::vector<double> w_norms;
  std::vector<double> objectives;
  bool grad_tol_met = false;
  double divergence_norm = 1e4;
  int window = 5;
};

/// Diverged iff the last norm reached divergence_norm, the trailing window
/// of norms is nondecreasing, the trailing window of objectives is
/// nonincreasing with a strict drop, and the gradient tolerance was not met.
DivergenceVerdict detect_divergence(const DivergenceEvidence& evidence);

}  // namespace noisyerm
