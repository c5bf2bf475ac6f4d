#include "noisyerm/datagen.hpp"

#include "noisyerm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace noisyerm {

double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

DataModel gaussian_model(int d) {
  if (d <= 0) throw std::invalid_argument("gaussian_model: dimension must be >= 1");
  DataModel model;
  model.dim = d;
  model.sampler = [d](Index n, Rng& rng) {
    std::normal_distribution<double> normal;
    MatrixXd x(n, d);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < d; ++j) x(i, j) = normal(rng);
    return x;
  };
  model.eta = constant_eta(0.5);
  model.name = "gaussian";
  return model;
}

DataModel with_eta(DataModel model, EtaFn eta, std::string name) {
  model.eta = std::move(eta);
  model.name = std::move(name);
  return model;
}

double cubic_logit_eta(const Eigen::Ref<const VectorXd>& x) {
  if (x.size() < 2) throw std::invalid_argument("cubic_logit_eta: needs at least 2 coordinates");
  return sigmoid(3.0 * x(0) + 0.5 * x(1) * x(1) * x(1));
}

DataModel cubic_logit_model(int d) {
  if (d < 2) throw std::invalid_argument("cubic_logit_model: dimension must be >= 2");
  return with_eta(gaussian_model(d), &cubic_logit_eta, "gaussian/cubic-logit");
}

DataModel logistic_model(const VectorXd& beta) {
  return with_eta(gaussian_model(static_cast<int>(beta.size())),
                  [beta](const Eigen::Ref<const VectorXd>& x) { return sigmoid(beta.dot(x)); },
                  "gaussian/logistic");
}

EtaFn constant_eta(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("constant_eta: p must lie in [0, 1]");
  return [p](const Eigen::Ref<const VectorXd>&) { return p; };
}

// Dataset

Dataset::Dataset(std::shared_ptr<const MatrixXd> x, VectorXd y, std::uint64_t seed)
    : x_(std::move(x)), y_(std::move(y)), seed_(seed) {
  if (!x_ || x_->rows() < 1) throw std::invalid_argument("Dataset: needs at least one row");
  if (y_.size() != x_->rows()) throw std::invalid_argument("Dataset: label count does not match rows");
  if (((y_.array() != 1.0) && (y_.array() != -1.0)).any())
    throw std::invalid_argument("Dataset: labels must be +1 or -1");
}

const VectorXd& Dataset::y_tilde() const {
  if (!y_tilde_) throw std::logic_error("Dataset: corrupted labels are not present");
  return *y_tilde_;
}

Dataset Dataset::with_corruption(VectorXd y_tilde, double rho, std::optional<CorruptionTrace> trace) const {
  if (y_tilde.size() != y_.size()) throw std::invalid_argument("Dataset: corrupted label count mismatch");
  if (((y_tilde.array() != 1.0) && (y_tilde.array() != -1.0)).any())
    throw std::invalid_argument("Dataset: corrupted labels must be +1 or -1");
  Dataset out = *this;
  out.y_tilde_ = std::move(y_tilde);
  out.trace_ = std::move(trace);
  out.rho_ = rho;
  return out;
}

void require_valid_rho(double rho) {
  if (!(rho >= 0.0 && rho < 0.5))
    throw std::invalid_argument("rho must satisfy 0 <= rho < 1/2 (got " + std::to_string(rho) + ")");
}

Dataset sample_clean(const DataModel& model, Index n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_clean: n must be >= 1");
  Rng feature_rng = make_rng(seed, StreamTag::features);
  Rng label_rng = make_rng(seed, StreamTag::labels);
  auto x = std::make_shared<const MatrixXd>(model.sampler(n, feature_rng));
  if (x->cols() != model.dim) throw std::logic_error("sample_clean: sampler returned the wrong dimension");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    const double p = model.eta(x->row(i).transpose());
    y(i) = unit(label_rng) < p ? 1.0 : -1.0;
  }
  return Dataset(std::move(x), std::move(y), seed);
}

Dataset corrupt(const Dataset& ds, double rho, std::uint64_t seed) {
  require_valid_rho(rho);
  Rng rng = make_rng(seed, StreamTag::corruption);
  std::bernoulli_distribution flip(rho);
  VectorXd y_tilde = ds.y();
  for (Index i = 0; i < y_tilde.size(); ++i)
    if (flip(rng)) y_tilde(i) = -y_tilde(i);
  return ds.with_corruption(std::move(y_tilde), rho, std::nullopt);
}

Dataset corrupt_via_rz(const Dataset& ds, double rho, std::uint64_t seed) {
  require_valid_rho(rho);
  Rng replace_rng = make_rng(seed, StreamTag::replace);
  Rng sign_rng = make_rng(seed, StreamTag::sign);
  std::bernoulli_distribution replace(2.0 * rho);
  std::bernoulli_distribution coin(0.5);
  const Index n = ds.size();
  CorruptionTrace trace{VectorXi(n), VectorXd(n)};
  VectorXd y_tilde(n);
  for (Index i = 0; i < n; ++i) {
    trace.r(i) = replace(replace_rng) ? 1 : 0;
    trace.z(i) = coin(sign_rng) ? 1.0 : -1.0;
    y_tilde(i) = (1 - trace.r(i)) * ds.y()(i) + trace.r(i) * trace.z(i);
  }
  return ds.with_corruption(std::move(y_tilde), rho, std::move(trace));
}

DataModel with_certificate(DataModel model, const FeatureCertificate& cert) {
  if (!cert.feasible) throw std::invalid_argument("feature certificate is infeasible: " + cert.message);
  model.constants = cert.constants;
  return model;
}

MatrixXd random_directions(int d, int count, std::uint64_t seed) {
  Rng rng = make_rng(seed, StreamTag::directions);
  std::normal_distribution<double> normal;
  MatrixXd u(d, count);
  for (int c = 0; c < count; ++c) {
    double norm = 0.0;
    do {
      for (int j = 0; j < d; ++j) u(j, c) = normal(rng);
      norm = u.col(c).norm();
    } while (norm == 0.0);
    u.col(c) /= norm;
  }
  return u;
}

FeatureCertificate certify_features(const DataModel& model, int directions, Index mc_samples,
                                    std::uint64_t seed) {
  if (directions < 100 || mc_samples < 10000)
    throw std::invalid_argument("certify_features: needs >= 100 directions and >= 1e4 samples");

  Rng rng = make_rng(seed, StreamTag::population);
  const MatrixXd x = model.sampler(mc_samples, rng);
  const MatrixXd u = random_directions(model.dim, directions, seed);
  const Eigen::ArrayXXd proj = (x * u).array().abs();

  FeatureCertificate cert;
  cert.directions = directions;
  cert.mc_samples = mc_samples;
  cert.feasible = true;

  constexpr double kMaxRelativeSe = 0.005;
  constexpr double kMinA0 = 1e-6;
  double a0 = 0.25;
  bool accepted = false;
  while (a0 >= kMinA0) {
    double worst_rel = 0.0;
    double a1 = 0.0;
    bool finite = true;
    for (int c = 0; c < directions; ++c) {
      const Eigen::ArrayXd v = (a0 * proj.col(c).square()).exp();
      if (!v.allFinite()) {
        finite = false;
        break;
      }
      const MeanEstimate est = mean_estimate(v);
      worst_rel = std::max(worst_rel, est.std_error / est.mean);
      a1 = std::max(a1, est.mean + 3.0 * est.std_error);
    }
    if (finite && worst_rel <= kMaxRelativeSe) {
      cert.constants.a0 = a0;
      cert.constants.a1 = a1;
      cert.max_relative_se = worst_rel;
      accepted = true;
      break;
    }
    a0 *= 0.5;
  }
  if (!accepted) {
    cert.feasible = false;
    cert.message = "exp(a0 |X'u|^2) has no stable estimate for any a0 >= 1e-6 (heavy tails)";
  }

  // t on a log grid, ten points per decade over [1e-3, 1e3].
  std::vector<double> ts;
  for (int k = -30; k <= 30; ++k) ts.push_back(std::pow(10.0, k / 10.0));
  std::vector<double> sup_by_t(ts.size(), 0.0);
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double t = ts[k];
    const Eigen::RowVectorXd means = (-t * proj).exp().colwise().mean();
    sup_by_t[k] = t * means.maxCoeff();
  }
  cert.constants.a2 = *std::max_element(sup_by_t.begin(), sup_by_t.end());

  std::vector<double> log_t, log_v;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    if (ts[k] < 100.0 * (1.0 - 1e-9)) continue;
    log_t.push_back(std::log(ts[k]));
    log_v.push_back(std::log(sup_by_t[k]));
  }
  cert.decay_log_slope = regression_slope(log_t, log_v);
  if (cert.decay_log_slope > 0.5) {
    cert.feasible = false;
    if (!cert.message.empty()) cert.message += "; ";
    cert.message += "t * E exp(-t |X'u|) grows with t, so no finite a2 exists (mass at X'u = 0)";
  }
  return cert;
}

// CSV

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("dataset csv line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
}

}  // namespace

void write_dataset_csv(const Dataset& ds, std::ostream& out) {
  const Index d = ds.dim();
  for (Index j = 0; j < d; ++j) out << "x_" << (j + 1) << ',';
  out << "y,y_tilde,r,z\n";
  for (Index i = 0; i < ds.size(); ++i) {
    for (Index j = 0; j < d; ++j) out << format_double(ds.x()(i, j)) << ',';
    out << static_cast<int>(ds.y()(i)) << ',';
    if (ds.has_corrupted()) out << static_cast<int>(ds.y_tilde()(i));
    out << ',';
    if (ds.trace()) out << ds.trace()->r(i);
    out << ',';
    if (ds.trace()) out << static_cast<int>(ds.trace()->z(i));
    out << '\n';
  }
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset csv: empty input");
  const auto header = split_csv_line(line);
  if (header.size() < 5) throw std::runtime_error("dataset csv: header too short");
  const std::size_t d = header.size() - 4;
  for (std::size_t j = 0; j < d; ++j)
    if (header[j] != "x_" + std::to_string(j + 1)) throw std::runtime_error("dataset csv: bad header " + header[j]);
  if (header[d] != "y" || header[d + 1] != "y_tilde" || header[d + 2] != "r" || header[d + 3] != "z")
    throw std::runtime_error("dataset csv: header must end with y,y_tilde,r,z");

  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw std::runtime_error("dataset csv line " + std::to_string(rows.size() + 2) + ": wrong field count");
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw std::runtime_error("dataset csv: no rows");

  const Index n = static_cast<Index>(rows.size());
  MatrixXd x(n, static_cast<Index>(d));
  VectorXd y(n), y_tilde(n), z(n);
  VectorXi r(n);
  const bool has_tilde = !rows[0][d + 1].empty();
  const bool has_trace = !rows[0][d + 2].empty();
  for (Index i = 0; i < n; ++i) {
    const auto& f = rows[static_cast<std::size_t>(i)];
    const std::size_t line_no = static_cast<std::size_t>(i) + 2;
    for (std::size_t j = 0; j < d; ++j) x(i, static_cast<Index>(j)) = parse_double(f[j], line_no);
    y(i) = parse_double(f[d], line_no);
    if (has_tilde != !f[d + 1].empty() || has_trace != !f[d + 2].empty() || has_trace != !f[d + 3].empty())
      throw std::runtime_error("dataset csv line " + std::to_string(line_no) + ": optional columns inconsistent");
    if (has_tilde) y_tilde(i) = parse_double(f[d + 1], line_no);
    if (has_trace) {
      r(i) = static_cast<int>(parse_double(f[d + 2], line_no));
      z(i) = parse_double(f[d + 3], line_no);
    }
  }
  Dataset ds(std::make_shared<const MatrixXd>(std::move(x)), std::move(y), 0);
  if (!has_tilde) return ds;
  std::optional<CorruptionTrace> trace;
  if (has_trace) trace = CorruptionTrace{std::move(r), std::move(z)};
  return ds.with_corruption(std::move(y_tilde), 0.0, std::move(trace));
}

}  // namespace noisyerm
