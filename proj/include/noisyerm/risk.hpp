#pragma once

#include "noisyerm/datagen.hpp"
#include "noisyerm/losses.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string_view>

namespace noisyerm {

enum class RiskKind {
  empirical,
  corrupted_empirical,
  population_mc,
  regularizer_empirical,
  regularizer_mc,
  zero_one_empirical,
  zero_one_population,
};

std::string_view to_string(RiskKind kind);

struct RiskEstimate {
  double value = 0.0;
  double std_error = 0.0;  // 0 for exact empirical averages
  Index n_samples = 0;
  RiskKind kind = RiskKind::empirical;
};

/// Per-sample losses l(m_i) for a margin vector.
template <typename Derived>
Eigen::ArrayXd loss_values(const LossSpec& loss, const Eigen::DenseBase<Derived>& margins) {
  const auto& m = margins.derived().eval();
  Eigen::ArrayXd out(m.size());
  for (Index i = 0; i < m.size(); ++i) out(i) = loss.eval(m.coeff(i));
  return out;
}

/// (1/n) sum l(x_i'w y_i). Exact; std_error is 0.
RiskEstimate empirical_risk(const LossSpec& loss, const Dataset& ds, const Eigen::Ref<const VectorXd>& w);

/// (1/n) sum l(x_i'w y~_i). Throws std::logic_error without corrupted labels.
RiskEstimate corrupted_empirical_risk(const LossSpec& loss, const Dataset& ds, const Eigen::Ref<const VectorXd>& w);

/// (1/n) sum (l(x_i'w) + l(-x_i'w)) / 2; labels unused.
RiskEstimate empirical_regularizer(const LossSpec& loss, const Dataset& ds, const Eigen::Ref<const VectorXd>& w);

/// 2 rho / (1 - 2 rho); throws std::invalid_argument unless 0 <= rho < 1/2.
double lambda_of_rho(double rho);

/// A fixed Monte Carlo draw of (X, Y) pairs. Reusing one sample across
/// weights and corruption levels gives common random numbers.
struct PopulationSample {
  MatrixXd x;
  VectorXd y;
  std::uint64_t seed = 0;

  Index size() const noexcept { return x.rows(); }
  /// Rows scaled by their labels: margins are signed_features() * w.
  MatrixXd signed_features() const { return y.asDiagonal() * x; }
};

/// Labels are drawn from eta. Throws std::invalid_argument for mc_samples < 1000.
PopulationSample draw_population_sample(const DataModel& model, Index mc_samples, std::uint64_t seed);

/// Monte Carlo L(w) = E l(X'w Y) on a prepared sample.
RiskEstimate sample_risk(const LossSpec& loss, const PopulationSample& sample, const Eigen::Ref<const VectorXd>& w);

/// Monte Carlo R(w) = E (l(X'w) + l(-X'w)) / 2 on a prepared sample.
RiskEstimate sample_regularizer(const LossSpec& loss, const PopulationSample& sample,
                                const Eigen::Ref<const VectorXd>& w);

/// (1 - rho) L(w) + rho L(-w), evaluated per sample on one shared draw.
RiskEstimate sample_penalized_risk(const LossSpec& loss, const PopulationSample& sample,
                                   const Eigen::Ref<const VectorXd>& w, double rho);

RiskEstimate population_risk(const LossSpec& loss, const DataModel& model, const Eigen::Ref<const VectorXd>& w,
                             Index mc_samples, std::uint64_t seed);

RiskEstimate penalized_population_risk(const LossSpec& loss, const DataModel& model,
                                       const Eigen::Ref<const VectorXd>& w, double rho, Index mc_samples,
                                       std::uint64_t seed);

/// The two algebraic forms of the penalized risk on one sample:
/// (1 - 2 rho)(L + lambda R) and (1 - rho) L(w) + rho L(-w).
struct PenalizedForms {
  double regularized = 0.0;
  double mirrored = 0.0;
  double relative_gap() const;
};

PenalizedForms penalized_risk_forms(const LossSpec& loss, const PopulationSample& sample,
                                    const Eigen::Ref<const VectorXd>& w, double rho);

/// Fraction of sign errors, counting x'w y <= 0 as an error.
RiskEstimate zero_one_risk(const Dataset& ds, const Eigen::Ref<const VectorXd>& w);
RiskEstimate zero_one_risk(const PopulationSample& sample, const Eigen::Ref<const VectorXd>& w);
RiskEstimate zero_one_risk(const DataModel& model, const Eigen::Ref<const VectorXd>& w, Index mc_samples,
                           std::uint64_t seed);

}  // namespace noisyerm
