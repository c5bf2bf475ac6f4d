#include "noisyerm/losses.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

using namespace noisyerm;

TEST_CASE("logistic loss values and constants") {
  const LossSpec loss = logistic_loss();
  CHECK(loss.name() == "logistic");
  CHECK(loss.smooth());
  CHECK(loss.eval(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  // mpmath: log(1 + e) = 1.313261687518222834...
  CHECK(loss.eval(-1.0) == doctest::Approx(1.3132616875182228).epsilon(1e-15));
  const auto& k = loss.constants();
  CHECK(k.lipschitz == 1.0);
  CHECK(k.gamma == 0.5);
  CHECK(k.decay_c1 == 1.0);
  CHECK(k.decay_c2 == 1.0);
}

TEST_CASE("logistic loss is stable at extreme margins") {
  const LossSpec loss = logistic_loss();
  CHECK(loss.eval(1e4) >= 0.0);
  CHECK(loss.eval(1e4) < 1e-300);
  CHECK(loss.eval(-1e4) == doctest::Approx(1e4));
  for (double t : {-1e8, -1e6, -700.0, -40.0, 40.0, 700.0, 1e6, 1e8}) {
    CHECK(std::isfinite(loss.eval(t)));
    CHECK(std::isfinite(loss.subgrad(t)));
  }
}

TEST_CASE("hinge loss pieces") {
  const LossSpec loss = hinge_loss();
  CHECK_FALSE(loss.smooth());
  CHECK(loss.eval(1.0) == 0.0);
  CHECK(loss.eval(0.0) == 1.0);
  CHECK(loss.subgrad(0.5) == -1.0);
  CHECK(loss.subgrad(2.0) == 0.0);
  CHECK(loss.subgrad(1.0) == -1.0);
  const auto& k = loss.constants();
  CHECK((k.lipschitz == 1.0 && k.gamma == 1.0 && k.decay_c1 == 1.0 && k.decay_c2 == 1.0));
}

TEST_CASE("loss lookup by name") {
  CHECK(loss_by_name("logistic").name() == "logistic");
  CHECK(loss_by_name("hinge").name() == "hinge");
  CHECK_THROWS_AS(loss_by_name("squared"), std::invalid_argument);
}

TEST_CASE("shipped losses pass every grid check") {
  for (const LossSpec& loss : {logistic_loss(), hinge_loss()}) {
    CAPTURE(loss.name());
    const CertificateReport report = certify_loss(loss, SamplingPlan{50.0, 20001});
    CHECK(report.checks.size() == 6);
    for (const auto& c : report.checks) {
      CAPTURE(c.name);
      CHECK(c.passed);
      CHECK(c.worst_margin >= -1e-12);
    }
  }
}

TEST_CASE("squared loss fails monotonicity and names the point") {
  const LossSpec squared("squared", [](double t) { return t * t; }, [](double t) { return 2 * t; }, {}, true);
  const CertificateReport report = certify_loss(squared);
  CHECK_FALSE(report.all_passed());
  const auto& mono = report.check("nonincreasing");
  CHECK_FALSE(mono.passed);
  CHECK(mono.worst_t > 0.0);
  CHECK(report.check("nonnegative").passed);
}

TEST_CASE("certification rejects thin grids") {
  CHECK_THROWS_AS(certify_loss(logistic_loss(), SamplingPlan{10.0, 2001}), std::invalid_argument);
  CHECK_THROWS_AS(certify_loss(logistic_loss(), SamplingPlan{50.0, 999}), std::invalid_argument);
}

TEST_CASE("subgradient agrees with central differences") {
  const double h = 1e-5;
  const LossSpec logistic = logistic_loss();
  for (double t = -30.0; t <= 30.0; t += 0.37) {
    const double fd = (logistic.eval(t + h) - logistic.eval(t - h)) / (2 * h);
    const double g = logistic.subgrad(t);
    // Relative error 1e-6, with an absolute floor where the slope itself
    // underflows past the difference quotient's rounding.
    CHECK(std::abs(fd - g) <= 1e-6 * std::abs(g) + 1e-10);
  }
  const LossSpec hinge = hinge_loss();
  for (double t = -5.0; t <= 5.0; t += 0.13) {
    if (std::abs(t - 1.0) < 1e-3) continue;
    const double fd = (hinge.eval(t + h) - hinge.eval(t - h)) / (2 * h);
    CHECK(fd == doctest::Approx(hinge.subgrad(t)).epsilon(1e-6));
  }
}
