#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace noisyerm {

// Scalar kernels. Margins are t = (w'x) * y.

/// log(1 + e^{-t}) as max(0, -t) + log1p(e^{-|t|}); finite for every finite t.
template <typename Scalar>
Scalar logistic_value(Scalar t) {
  using std::abs;
  using std::exp;
  using std::log1p;
  return (t < Scalar(0) ? -t : Scalar(0)) + log1p(exp(-abs(t)));
}

/// d/dt log(1 + e^{-t}) = -1 / (1 + e^{t}).
template <typename Scalar>
Scalar logistic_slope(Scalar t) {
  using std::exp;
  if (t >= Scalar(0)) {
    const Scalar e = exp(-t);
    return -e / (Scalar(1) + e);
  }
  return Scalar(-1) / (Scalar(1) + exp(t));
}

template <typename Scalar>
Scalar hinge_value(Scalar t) {
  return t < Scalar(1) ? Scalar(1) - t : Scalar(0);
}

/// Subgradient of (1 - t)_+, fixed to -1 at the kink.
template <typename Scalar>
Scalar hinge_slope(Scalar t) {
  return t <= Scalar(1) ? Scalar(-1) : Scalar(0);
}

/// Constants (L, gamma, c1, c2) of the loss conditions: L-Lipschitz,
/// l(t) >= l(0) + gamma |t| for t <= 0, and l(t) <= c1 exp(-c2 t) for t >= 0.
struct LossConstants {
  double lipschitz = 1.0;
  double gamma = 1.0;
  double decay_c1 = 1.0;
  double decay_c2 = 1.0;
};

/// A convex, nonincreasing surrogate loss on the margin. Immutable after
/// construction and safe to evaluate from any number of threads.
class LossSpec {
 public:
  using ScalarFn = std::function<double(double)>;

  LossSpec(std::string name, ScalarFn value, ScalarFn subgradient, LossConstants constants, bool smooth);

  const std::string& name() const noexcept { return name_; }
  double eval(double t) const { return value_(t); }
  double operator()(double t) const { return value_(t); }
  double subgrad(double t) const { return subgradient_(t); }
  const LossConstants& constants() const noexcept { return constants_; }
  bool smooth() const noexcept { return smooth_; }
  double at_zero() const { return value_(0.0); }

  /// True when the loss stays strictly positive far out on the positive
  /// axis, i.e. its infimum over margins is not attained. Separable data
  /// then has no empirical minimizer.
  bool infimum_unattained() const { return value_(64.0) > 0.0; }

 private:
  std::string name_;
  ScalarFn value_;
  ScalarFn subgradient_;
  LossConstants constants_;
  bool smooth_;
};

LossSpec logistic_loss();
LossSpec hinge_loss();

/// "logistic" | "hinge"; throws std::invalid_argument otherwise.
LossSpec loss_by_name(std::string_view name);

struct SamplingPlan {
  double half_width = 50.0;  // grid covers [-half_width, half_width]
  int points = 2001;
};

struct InequalityCheck {
  std::string name;
  bool passed = true;
  double worst_margin = 0.0;  // min over the grid of (rhs - lhs); negative means violated
  double worst_t = 0.0;
};

struct CertificateReport {
  std::string loss;
  std::vector<InequalityCheck> checks;
  bool all_passed() const;
  const InequalityCheck& check(std::string_view name) const;
};

/// Grid check of the loss conditions: nonnegative, nonincreasing, convex,
/// Lipschitz, the gamma lower slope on t <= 0 and the exponential decay on
/// t >= 0. Throws std::invalid_argument if the plan has half_width < 50 or
/// fewer than 1000 points.
CertificateReport certify_loss(const LossSpec& spec, const SamplingPlan& plan = {}, double slack = 1e-12);

}  // namespace noisyerm
