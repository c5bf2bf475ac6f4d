#include "noisyerm/datagen.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

using namespace noisyerm;

TEST_CASE("gaussian features: moments") {
  const DataModel model = gaussian_model(50);
  Rng rng = make_rng(11, StreamTag::features);
  const MatrixXd x = model.sampler(100000, rng);
  const double tol = 3.0 / std::sqrt(1e5);
  const Eigen::RowVectorXd means = x.colwise().mean();
  CHECK(means.cwiseAbs().maxCoeff() < tol);
  // chi-square(50) has mean 50
  const double mean_sq_norm = x.rowwise().squaredNorm().mean();
  CHECK(std::abs(mean_sq_norm - 50.0) < 0.5);
}

TEST_CASE("gaussian features: identity covariance in d = 2") {
  const DataModel model = gaussian_model(2);
  Rng rng = make_rng(12, StreamTag::features);
  const MatrixXd x = model.sampler(100000, rng);
  const double cov = (x.col(0).array() * x.col(1).array()).mean() - x.col(0).mean() * x.col(1).mean();
  CHECK(std::abs(cov) < 3.0 / std::sqrt(1e5));
  CHECK_THROWS_AS(gaussian_model(0), std::invalid_argument);
}

TEST_CASE("feature streams are reproducible") {
  const DataModel model = gaussian_model(5);
  Rng a = make_rng(99, StreamTag::features), b = make_rng(99, StreamTag::features);
  CHECK(model.sampler(100, a) == model.sampler(100, b));
}

TEST_CASE("cubic-logit label probability") {
  VectorXd x = VectorXd::Zero(3);
  CHECK(cubic_logit_eta(x) == 0.5);
  x << 1.0, 0.0, 0.0;
  // mpmath: sigma(3) = 0.952574126822433219...
  CHECK(cubic_logit_eta(x) == doctest::Approx(0.9525741268224332).epsilon(1e-15));
  x << 0.0, -2.0, 0.0;
  // mpmath: sigma(-4) = 0.017986209962091558...
  CHECK(cubic_logit_eta(x) == doctest::Approx(0.017986209962091558).epsilon(1e-14));
  CHECK_THROWS_AS(cubic_logit_eta(VectorXd::Zero(1)), std::invalid_argument);
  x << 400.0, 0.0, 0.0;
  CHECK(cubic_logit_eta(x) == 1.0);
  x << -400.0, 0.0, 0.0;
  CHECK(cubic_logit_eta(x) >= 0.0);
}

TEST_CASE("sample_clean: degenerate and fair label laws") {
  const Dataset ones = sample_clean(with_eta(gaussian_model(3), constant_eta(1.0), "one"), 1000, 5);
  CHECK((ones.y().array() == 1.0).all());
  CHECK_FALSE(ones.has_corrupted());
  CHECK_THROWS_AS(ones.y_tilde(), std::logic_error);

  const Dataset fair = sample_clean(gaussian_model(3), 100000, 6);
  const double frac = (fair.y().array() == 1.0).cast<double>().mean();
  CHECK(std::abs(frac - 0.5) < 3.0 / std::sqrt(4e5) * 2.0);
  CHECK_THROWS_AS(sample_clean(gaussian_model(3), 0, 1), std::invalid_argument);
}

TEST_CASE("sample_clean: cubic-logit labels follow the first coordinate") {
  const Dataset ds = sample_clean(cubic_logit_model(50), 100000, 7);
  double pos_hi = 0, n_hi = 0, pos_lo = 0, n_lo = 0;
  for (Index i = 0; i < ds.size(); ++i) {
    if (ds.x()(i, 0) > 0) {
      n_hi += 1;
      pos_hi += ds.y()(i) > 0;
    } else {
      n_lo += 1;
      pos_lo += ds.y()(i) > 0;
    }
  }
  CHECK(pos_hi / n_hi > pos_lo / n_lo);
}

TEST_CASE("sample_clean is deterministic per seed") {
  const DataModel model = cubic_logit_model(4);
  const Dataset a = sample_clean(model, 500, 42), b = sample_clean(model, 500, 42), c = sample_clean(model, 500, 43);
  CHECK(a.x() == b.x());
  CHECK(a.y() == b.y());
  CHECK(a.x() != c.x());
}

TEST_CASE("corrupt: direct flips") {
  const Dataset ds = sample_clean(cubic_logit_model(2), 100000, 8);
  const Dataset none = corrupt(ds, 0.0, 1);
  CHECK(none.y_tilde() == ds.y());
  CHECK_FALSE(none.trace().has_value());

  const Dataset noisy = corrupt(ds, 0.1, 2);
  const double flips = (noisy.y_tilde().array() != ds.y().array()).cast<double>().mean();
  CHECK(std::abs(flips - 0.1) < 3.0 * std::sqrt(0.1 * 0.9 / 1e5));
  CHECK(((noisy.y_tilde().array() == 1.0) || (noisy.y_tilde().array() == -1.0)).all());
  CHECK(noisy.rho() == 0.1);
  // features are shared, not copied
  CHECK(noisy.shared_x() == ds.shared_x());

  CHECK_THROWS_AS(corrupt(ds, 0.5, 3), std::invalid_argument);
  CHECK_THROWS_AS(corrupt(ds, -0.1, 3), std::invalid_argument);
  CHECK_THROWS_AS(corrupt_via_rz(ds, 0.5, 3), std::invalid_argument);
}

TEST_CASE("corrupt_via_rz: trace identity and marginal flip rate") {
  const Dataset ds = sample_clean(cubic_logit_model(2), 100000, 9);
  const Dataset zero = corrupt_via_rz(ds, 0.0, 1);
  CHECK(zero.trace()->r.sum() == 0);
  CHECK(zero.y_tilde() == ds.y());

  const double rho = 0.15;
  const Dataset rz = corrupt_via_rz(ds, rho, 2);
  const auto& tr = *rz.trace();
  for (Index i = 0; i < ds.size(); ++i)
    REQUIRE(rz.y_tilde()(i) == (1 - tr.r(i)) * ds.y()(i) + tr.r(i) * tr.z(i));
  // marginalizing r and z: P(flip) = 2 rho * 1/2 = rho
  const double flips = (rz.y_tilde().array() != ds.y().array()).cast<double>().mean();
  const double se = std::sqrt(rho * (1 - rho) / 1e5);
  CHECK(std::abs(flips - rho) < 3.0 * se);

  // both mechanisms give the same flip law
  const Dataset direct = corrupt(ds, rho, 3);
  const double flips_direct = (direct.y_tilde().array() != ds.y().array()).cast<double>().mean();
  CHECK(std::abs(flips - flips_direct) < 3.0 * std::sqrt(2.0) * se);

  // z is drawn independently of y
  const double corr = ((tr.z.array() - tr.z.mean()) * (ds.y().array() - ds.y().mean())).mean() /
                      (std::sqrt((tr.z.array() - tr.z.mean()).square().mean()) *
                       std::sqrt((ds.y().array() - ds.y().mean()).square().mean()));
  CHECK(std::abs(corr) < 3.0 / std::sqrt(1e5));
}

TEST_CASE("corruption is deterministic per seed") {
  const Dataset ds = sample_clean(cubic_logit_model(3), 2000, 10);
  CHECK(corrupt(ds, 0.2, 5).y_tilde() == corrupt(ds, 0.2, 5).y_tilde());
  CHECK(corrupt_via_rz(ds, 0.2, 5).y_tilde() == corrupt_via_rz(ds, 0.2, 5).y_tilde());
  CHECK(corrupt(ds, 0.2, 5).y_tilde() != corrupt(ds, 0.2, 6).y_tilde());
}

TEST_CASE("feature certificate: standard Gaussian") {
  const FeatureCertificate cert = certify_features(gaussian_model(5), 100, 10000, 21);
  CHECK(cert.feasible);
  CHECK(cert.constants.a0 == 0.125);
  // E exp(Z^2 / 8) = (1 - 1/4)^{-1/2} = 1.1547005...
  CHECK(cert.constants.a1 > 1.1547);
  CHECK(cert.constants.a1 < 1.18);
  // sup_t t E exp(-t|Z|) -> sqrt(2/pi) = 0.7978845...; the direction sup of
  // the estimate sits above it, the noise at t = 1e3 bounds it from above.
  CHECK(cert.constants.a2 > 0.75);
  CHECK(cert.constants.a2 < 1.6);
  CHECK(std::abs(cert.decay_log_slope) < 0.5);
}

TEST_CASE("feature certificate: degenerate and heavy-tailed features are flagged") {
  DataModel zero = gaussian_model(3);
  zero.sampler = [](Index n, Rng&) { return MatrixXd::Zero(n, 3); };
  const FeatureCertificate c0 = certify_features(zero, 100, 10000, 1);
  CHECK_FALSE(c0.feasible);
  CHECK(c0.message.find("a2") != std::string::npos);

  DataModel cauchy = gaussian_model(3);
  cauchy.sampler = [](Index n, Rng& rng) {
    std::cauchy_distribution<double> dist;
    MatrixXd x(n, 3);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < 3; ++j) x(i, j) = dist(rng);
    return x;
  };
  const FeatureCertificate cc = certify_features(cauchy, 100, 10000, 1);
  CHECK_FALSE(cc.feasible);
  CHECK(cc.message.find("heavy tails") != std::string::npos);

  CHECK_THROWS_AS(certify_features(gaussian_model(3), 99, 10000, 1), std::invalid_argument);
}

TEST_CASE("random directions are unit vectors") {
  const MatrixXd u = random_directions(7, 50, 3);
  CHECK((u.colwise().norm().array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("dataset csv round-trips bit-exactly") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Dataset clean = sample_clean(cubic_logit_model(3), 40, seed);
    for (const Dataset& ds : {clean, corrupt(clean, 0.3, seed), corrupt_via_rz(clean, 0.3, seed)}) {
      std::stringstream ss;
      write_dataset_csv(ds, ss);
      const Dataset back = read_dataset_csv(ss);
      CHECK(back.x() == ds.x());
      CHECK(back.y() == ds.y());
      CHECK(back.has_corrupted() == ds.has_corrupted());
      if (ds.has_corrupted()) CHECK(back.y_tilde() == ds.y_tilde());
      CHECK(back.trace().has_value() == ds.trace().has_value());
      if (ds.trace()) {
        CHECK(back.trace()->r == ds.trace()->r);
        CHECK(back.trace()->z == ds.trace()->z);
      }
    }
  }
}

TEST_CASE("dataset csv header and errors") {
  const Dataset ds = sample_clean(cubic_logit_model(2), 3, 1);
  std::stringstream ss;
  write_dataset_csv(ds, ss);
  std::string header;
  std::getline(ss, header);
  CHECK(header == "x_1,x_2,y,y_tilde,r,z");

  std::istringstream bad("x_1,x_2,y,y_tilde,r,z\n1,2,abc,,,\n");
  CHECK_THROWS_AS(read_dataset_csv(bad), std::runtime_error);
  std::istringstream wrong("a,b,c\n");
  CHECK_THROWS_AS(read_dataset_csv(wrong), std::runtime_error);
}
