#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace noisyerm {

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;  // sample sd / sqrt(count); 0 when count < 2
  double sample_sd = 0.0;
  std::size_t count = 0;
};

/// Mean and standard error of a sample. Sums are taken around the first
/// element, so a constant sample returns that constant exactly with SE 0.
template <typename Derived>
MeanEstimate mean_estimate(const Eigen::DenseBase<Derived>& expr) {
  const auto& values = expr.derived().eval();
  MeanEstimate out;
  const Eigen::Index n = values.size();
  out.count = static_cast<std::size_t>(n);
  if (n == 0) return out;
  const double shift = values.coeff(0);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double dv = values.coeff(i) - shift;
    sum += dv;
    sum_sq += dv * dv;
  }
  const double nd = static_cast<double>(n);
  out.mean = shift + sum / nd;
  if (n > 1) {
    const double var = std::max(0.0, (sum_sq - sum * sum / nd) / (nd - 1.0));
    out.sample_sd = std::sqrt(var);
    out.std_error = out.sample_sd / std::sqrt(nd);
  }
  return out;
}

inline MeanEstimate mean_estimate(std::span<const double> values) {
  return mean_estimate(Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                         static_cast<Eigen::Index>(values.size())));
}

/// Least-squares slope of y on x.
inline double regression_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

inline double pooled_se(double se_a, double se_b) { return std::sqrt(se_a * se_a + se_b * se_b); }

}  // namespace noisyerm
