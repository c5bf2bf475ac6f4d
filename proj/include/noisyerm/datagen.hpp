#pragma once

#include "noisyerm/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

namespace noisyerm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

/// Tail constants (a0, a1, a2) of the feature law: for every unit u,
/// E exp(a0 |X'u|^2) <= a1 and E exp(-t |X'u|) <= a2 / t for all t > 0.
struct FeatureConstants {
  double a0 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
};

/// Draws an n x d feature matrix (one sample per row).
using FeatureSampler = std::function<MatrixXd(Index n, Rng& rng)>;
/// P(Y = +1 | X = x).
using EtaFn = std::function<double(const Eigen::Ref<const VectorXd>& x)>;

/// Joint law of (X, Y).
struct DataModel {
  int dim = 0;
  FeatureSampler sampler;
  EtaFn eta;
  std::optional<FeatureConstants> constants;
  std::string name;
};

/// X ~ N(0, I_d) with a fair-coin label law until an eta is attached.
/// Throws std::invalid_argument for d == 0.
DataModel gaussian_model(int d);

/// Same features with eta replaced.
DataModel with_eta(DataModel model, EtaFn eta, std::string name);

/// sigma(3 x_1 + 0.5 x_2^3). Throws std::invalid_argument if x has fewer than 2 entries.
double cubic_logit_eta(const Eigen::Ref<const VectorXd>& x);

/// The simulation model: standard Gaussian features, cubic-logit labels.
DataModel cubic_logit_model(int d);

/// Well-specified logistic labels, eta(x) = sigma(beta'x).
DataModel logistic_model(const VectorXd& beta);

EtaFn constant_eta(double p);

/// Numerically stable logistic sigmoid.
double sigmoid(double a);

/// Corruption record of the (R, Z) construction: label i was replaced by
/// the random sign z_i whenever r_i = 1.
struct CorruptionTrace {
  VectorXi r;  // in {0, 1}
  VectorXd z;  // in {-1, +1}
};

/// Immutable labelled sample. Features are shared between a clean dataset
/// and its corrupted copies.
class Dataset {
 public:
  Dataset(std::shared_ptr<const MatrixXd> x, VectorXd y, std::uint64_t seed);

  const MatrixXd& x() const noexcept { return *x_; }
  const std::shared_ptr<const MatrixXd>& shared_x() const noexcept { return x_; }
  const VectorXd& y() const noexcept { return y_; }
  bool has_corrupted() const noexcept { return y_tilde_.has_value(); }
  /// Throws std::logic_error when no corrupted labels are present.
  const VectorXd& y_tilde() const;
  const std::optional<CorruptionTrace>& trace() const noexcept { return trace_; }
  double rho() const noexcept { return rho_; }
  std::uint64_t seed() const noexcept { return seed_; }
  Index size() const noexcept { return x_->rows(); }
  Index dim() const noexcept { return x_->cols(); }

  /// Copy carrying corrupted labels (and optionally the trace that produced them).
  Dataset with_corruption(VectorXd y_tilde, double rho, std::optional<CorruptionTrace> trace) const;

 private:
  std::shared_ptr<const MatrixXd> x_;
  VectorXd y_;
  std::optional<VectorXd> y_tilde_;
  std::optional<CorruptionTrace> trace_;
  double rho_ = 0.0;
  std::uint64_t seed_ = 0;
};

/// X_i iid from the sampler, Y_i = +1 with probability eta(X_i).
Dataset sample_clean(const DataModel& model, Index n, std::uint64_t seed);

/// Direct flips: y~_i = -y_i with probability rho. Requires 0 <= rho < 1/2.
Dataset corrupt(const Dataset& ds, double rho, std::uint64_t seed);

/// r_i ~ Bernoulli(2 rho), z_i ~ Unif{+-1}, y~_i = (1 - r_i) y_i + r_i z_i.
Dataset corrupt_via_rz(const Dataset& ds, double rho, std::uint64_t seed);

/// Throws std::invalid_argument unless 0 <= rho < 1/2.
void require_valid_rho(double rho);

struct FeatureCertificate {
  FeatureConstants constants;
  bool feasible = false;
  std::string message;
  double max_relative_se = 0.0;  // of the accepted MGF estimate
  double decay_log_slope = 0.0;  // slope of log(t E e^{-t|X'u|}) over the top decade of t
  int directions = 0;
  Index mc_samples = 0;
};

/// Estimates (a0, a1, a2) over random unit directions. a0 is halved from
/// 1/4 until the MGF estimate E exp(a0 |X'u|^2) has relative standard error
/// <= 0.5% in every direction; a1 is the largest estimate plus 3 SE. a2 is
/// the largest t * E exp(-t |X'u|) over a log grid of t in [1e-3, 1e3].
/// Requires directions >= 100 and mc_samples >= 1e4.
FeatureCertificate certify_features(const DataModel& model, int directions, Index mc_samples,
                                    std::uint64_t seed);

/// The model with the certificate's constants attached. Throws
/// std::invalid_argument when the certificate is infeasible.
DataModel with_certificate(DataModel model, const FeatureCertificate& cert);

/// Uniform random unit vectors, one per column.
MatrixXd random_directions(int d, int count, std::uint64_t seed);

// CSV layout: x_1..x_d,y,y_tilde,r,z; absent optional columns are empty.
void write_dataset_csv(const Dataset& ds, std::ostream& out);
/// Throws std::runtime_error on malformed input.
Dataset read_dataset_csv(std::istream& in);

}  // namespace noisyerm
