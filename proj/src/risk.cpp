#include "noisyerm/risk.hpp"

#include "noisyerm/stats.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace noisyerm {

std::string_view to_string(RiskKind kind) {
  switch (kind) {
    case RiskKind::empirical: return "empirical";
    case RiskKind::corrupted_empirical: return "corrupted-empirical";
    case RiskKind::population_mc: return "population-mc";
    case RiskKind::regularizer_empirical: return "regularizer-empirical";
    case RiskKind::regularizer_mc: return "regularizer-mc";
    case RiskKind::zero_one_empirical: return "zero-one-empirical";
    case RiskKind::zero_one_population: return "zero-one-population";
  }
  return "unknown";
}

namespace {

void require_dim(Index data_dim, Index w_dim) {
  if (data_dim != w_dim)
    throw std::invalid_argument("dimension mismatch: data has " + std::to_string(data_dim) +
                                " columns, w has " + std::to_string(w_dim));
}

RiskEstimate exact_average(const Eigen::ArrayXd& values, RiskKind kind) {
  const MeanEstimate est = mean_estimate(values);
  return RiskEstimate{est.mean, 0.0, values.size(), kind};
}

RiskEstimate mc_average(const Eigen::ArrayXd& values, RiskKind kind) {
  const MeanEstimate est = mean_estimate(values);
  return RiskEstimate{est.mean, est.std_error, values.size(), kind};
}

Eigen::ArrayXd regularizer_values(const LossSpec& loss, const VectorXd& raw_margins) {
  Eigen::ArrayXd out(raw_margins.size());
  for (Index i = 0; i < raw_margins.size(); ++i)
    out(i) = 0.5 * (loss.eval(raw_margins(i)) + loss.eval(-raw_margins(i)));
  return out;
}

}  // namespace

RiskEstimate empirical_risk(const LossSpec& loss, const Dataset& ds, const Eigen::Ref<const VectorXd>& w) {
  require_dim(ds.dim(), w.size());
  const VectorXd margins = (ds.x() * w).cwiseProduct(ds.y());
  return exact_average(loss_values(loss, margins), RiskKind::empirical);
}

RiskEstimate corrupted_empirical_risk(const LossSpec& loss, const Dataset& ds, const Eigen::Ref<const VectorXd>& w) {
  require_dim(ds.dim(), w.size());
  const VectorXd margins = (ds.x() * w).cwiseProduct(ds.y_tilde());
  return exact_average(loss_values(loss, margins), RiskKind::corrupted_empirical);
}

RiskEstimate empirical_regularizer(const LossSpec& loss, const Dataset& ds, const Eigen::Ref<const VectorXd>& w) {
  require_dim(ds.dim(), w.size());
  return exact_average(regularizer_values(loss, ds.x() * w), RiskKind::regularizer_empirical);
}

double lambda_of_rho(double rho) {
  require_valid_rho(rho);
  return 2.0 * rho / (1.0 - 2.0 * rho);
}

PopulationSample draw_population_sample(const DataModel& model, Index mc_samples, std::uint64_t seed) {
  if (mc_samples < 1000) throw std::invalid_argument("population estimates need at least 1000 samples");
  const Dataset ds = sample_clean(model, mc_samples, seed);
  return PopulationSample{ds.x(), ds.y(), seed};
}

RiskEstimate sample_risk(const LossSpec& loss, const PopulationSample& sample, const Eigen::Ref<const VectorXd>& w) {
  require_dim(sample.x.cols(), w.size());
  const VectorXd margins = (sample.x * w).cwiseProduct(sample.y);
  return mc_average(loss_values(loss, margins), RiskKind::population_mc);
}

RiskEstimate sample_regularizer(const LossSpec& loss, const PopulationSample& sample,
                                const Eigen::Ref<const VectorXd>& w) {
  require_dim(sample.x.cols(), w.size());
  return mc_average(regularizer_values(loss, sample.x * w), RiskKind::regularizer_mc);
}

RiskEstimate sample_penalized_risk(const LossSpec& loss, const PopulationSample& sample,
                                   const Eigen::Ref<const VectorXd>& w, double rho) {
  require_valid_rho(rho);
  require_dim(sample.x.cols(), w.size());
  const VectorXd margins = (sample.x * w).cwiseProduct(sample.y);
  Eigen::ArrayXd values(margins.size());
  for (Index i = 0; i < margins.size(); ++i)
    values(i) = (1.0 - rho) * loss.eval(margins(i)) + rho * loss.eval(-margins(i));
  return mc_average(values, RiskKind::population_mc);
}

RiskEstimate population_risk(const LossSpec& loss, const DataModel& model, const Eigen::Ref<const VectorXd>& w,
                             Index mc_samples, std::uint64_t seed) {
  return sample_risk(loss, draw_population_sample(model, mc_samples, seed), w);
}

RiskEstimate penalized_population_risk(const LossSpec& loss, const DataModel& model,
                                       const Eigen::Ref<const VectorXd>& w, double rho, Index mc_samples,
                                       std::uint64_t seed) {
  return sample_penalized_risk(loss, draw_population_sample(model, mc_samples, seed), w, rho);
}

double PenalizedForms::relative_gap() const {
  const double scale = std::max(std::abs(regularized), std::abs(mirrored));
  return scale == 0.0 ? 0.0 : std::abs(regularized - mirrored) / scale;
}

PenalizedForms penalized_risk_forms(const LossSpec& loss, const PopulationSample& sample,
                                    const Eigen::Ref<const VectorXd>& w, double rho) {
  const double lambda = lambda_of_rho(rho);
  const double risk = sample_risk(loss, sample, w).value;
  const double flipped = sample_risk(loss, sample, -w).value;
  const double reg = sample_regularizer(loss, sample, w).value;
  return PenalizedForms{(1.0 - 2.0 * rho) * (risk + lambda * reg), (1.0 - rho) * risk + rho * flipped};
}

namespace {

Eigen::ArrayXd sign_errors(const MatrixXd& x, const VectorXd& y, const Eigen::Ref<const VectorXd>& w) {
  require_dim(x.cols(), w.size());
  const VectorXd margins = (x * w).cwiseProduct(y);
  return (margins.array() <= 0.0).cast<double>();
}

}  // namespace

RiskEstimate zero_one_risk(const Dataset& ds, const Eigen::Ref<const VectorXd>& w) {
  return exact_average(sign_errors(ds.x(), ds.y(), w), RiskKind::zero_one_empirical);
}

RiskEstimate zero_one_risk(const PopulationSample& sample, const Eigen::Ref<const VectorXd>& w) {
  return mc_average(sign_errors(sample.x, sample.y, w), RiskKind::zero_one_population);
}

RiskEstimate zero_one_risk(const DataModel& model, const Eigen::Ref<const VectorXd>& w, Index mc_samples,
                           std::uint64_t seed) {
  return zero_one_risk(draw_population_sample(model, mc_samples, seed), w);
}

}  // namespace noisyerm
