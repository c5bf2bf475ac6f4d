#include "noisyerm/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace noisyerm {

LossSpec::LossSpec(std::string name, ScalarFn value, ScalarFn subgradient, LossConstants constants,
                   bool smooth)
    : name_(std::move(name)),
      value_(std::move(value)),
      subgradient_(std::move(subgradient)),
      constants_(constants),
      smooth_(smooth) {
  if (!value_ || !subgradient_) throw std::invalid_argument("LossSpec: value and subgradient are required");
}

LossSpec logistic_loss() {
  return LossSpec("logistic", &logistic_value<double>, &logistic_slope<double>,
                  LossConstants{.lipschitz = 1.0, .gamma = 0.5, .decay_c1 = 1.0, .decay_c2 = 1.0}, true);
}

LossSpec hinge_loss() {
  return LossSpec("hinge", &hinge_value<double>, &hinge_slope<double>,
                  LossConstants{.lipschitz = 1.0, .gamma = 1.0, .decay_c1 = 1.0, .decay_c2 = 1.0}, false);
}

LossSpec loss_by_name(std::string_view name) {
  if (name == "logistic") return logistic_loss();
  if (name == "hinge") return hinge_loss();
  throw std::invalid_argument("unknown loss '" + std::string(name) + "' (expected logistic | hinge)");
}

bool CertificateReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const InequalityCheck& c) { return c.passed; });
}

const InequalityCheck& CertificateReport::check(std::string_view name) const {
  for (const auto& c : checks)
    if (c.name == name) return c;
  throw std::out_of_range("no check named " + std::string(name));
}

namespace {

struct Tracker {
  InequalityCheck check;
  double slack;

  explicit Tracker(std::string name, double slack_) : slack(slack_) {
    check.name = std::move(name);
    check.worst_margin = std::numeric_limits<double>::infinity();
  }

  // Records rhs - lhs; the inequality is lhs <= rhs.
  void record(double lhs, double rhs, double t) {
    const double margin = rhs - lhs;
    if (margin < check.worst_margin || std::isnan(margin)) {
      check.worst_margin = margin;
      check.worst_t = t;
    }
    if (!(margin >= -slack)) check.passed = false;
  }
};

}  // namespace

CertificateReport certify_loss(const LossSpec& spec, const SamplingPlan& plan, double slack) {
  if (plan.half_width < 50.0 || plan.points < 1000)
    throw std::invalid_argument("certify_loss: grid must cover [-50, 50] with at least 1000 points");

  const int m = plan.points;
  const double h = 2.0 * plan.half_width / (m - 1);
  std::vector<double> t(m), v(m);
  for (int i = 0; i < m; ++i) {
    t[i] = -plan.half_width + h * i;
    v[i] = spec.eval(t[i]);
  }
  const auto& k = spec.constants();
  const double ell0 = spec.at_zero();

  Tracker nonneg("nonnegative", slack), monotone("nonincreasing", slack), convex("convex", slack),
      lipschitz("lipschitz", slack), lower("gamma_lower_slope", slack), decay("exponential_decay", slack);

  for (int i = 0; i < m; ++i) {
    nonneg.record(0.0, v[i], t[i]);
    if (i + 1 < m) {
      monotone.record(v[i + 1], v[i], t[i]);
      lipschitz.record(std::abs(v[i + 1] - v[i]), k.lipschitz * (t[i + 1] - t[i]), t[i]);
    }
    for (int stride : {1, 7, 50, 250}) {
      if (i - stride < 0 || i + stride >= m) continue;
      convex.record(v[i], 0.5 * (v[i - stride] + v[i + stride]), t[i]);
    }
    if (t[i] <= 0.0) lower.record(ell0 + k.gamma * std::abs(t[i]), v[i], t[i]);
    if (t[i] >= 0.0) decay.record(v[i], k.decay_c1 * std::exp(-k.decay_c2 * t[i]), t[i]);
  }
  // The grid may straddle 0 without hitting it.
  lower.record(ell0, ell0, 0.0);
  decay.record(ell0, k.decay_c1, 0.0);

  CertificateReport report;
  report.loss = spec.name();
  for (auto* tr : {&nonneg, &monotone, &convex, &lipschitz, &lower, &decay}) report.checks.push_back(tr->check);
  return report;
}

}  // namespace noisyerm
