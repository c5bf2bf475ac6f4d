// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance            run all criteria
//   acceptance 3 8        run a subset
//   --known-fail 3        still print FAIL for 3, but leave the exit code alone

#include "noisyerm/cli.hpp"
#include "noisyerm/experiment.hpp"
#include "noisyerm/rng.hpp"
#include "noisyerm/stats.hpp"
#include "noisyerm/theory_checks.hpp"

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace noisyerm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, a);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome regularization_identity() {
  const IdentityReport r =
      check_identity(logistic_loss(), cubic_logit_model(10), 200, 1.0, {0.05, 0.2, 0.4}, 20000, 20190101);
  std::string detail = "max |z| over rho {0.05, 0.2, 0.4}:";
  double worst = 0.0;
  for (const IdentityRow& row : r.rows) worst = std::max(worst, std::abs(row.z_score));
  detail += fmt(" %.3f", worst);
  return {r.all_within(), detail};
}

Outcome algebraic_rewrite() {
  const PopulationSample sample = draw_population_sample(cubic_logit_model(10), 10000, 41);
  Rng rng(42);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 0.5);
  std::uniform_real_distribution<double> scale(0.0, 5.0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    VectorXd w(10);
    for (Index j = 0; j < w.size(); ++j) w(j) = normal(rng);
    w *= scale(rng) / w.norm();
    const double rho = unif(rng);
    worst = std::max(worst, penalized_risk_forms(logistic_loss(), sample, w, rho).relative_gap());
  }
  return {worst <= 1e-12, fmt("worst relative gap over 100 (w, rho): %.3e", worst)};
}

Dataset separable_dataset(std::uint64_t seed) {
  Rng rng(derive_seed(seed, StreamTag::features));
  std::normal_distribution<double> normal;
  auto x = std::make_shared<MatrixXd>(50, 2);
  VectorXd y(50);
  for (Index i = 0; i < 50; ++i) {
    (*x)(i, 0) = normal(rng);
    (*x)(i, 1) = normal(rng);
    y(i) = (*x)(i, 0) + 0.5 * (*x)(i, 1) > 0.0 ? 1.0 : -1.0;
  }
  return Dataset(std::move(x), std::move(y), seed);
}

Outcome separability() {
  int clean_diverged = 0;
  bool pass = true;
  std::string detail;
  std::vector<Dataset> data;
  for (std::uint64_t s = 0; s < 20; ++s) {
    data.push_back(separable_dataset(1000 + s));
    clean_diverged += fit_erm(logistic_loss(), data.back(), false).status == FitStatus::diverged;
  }
  pass = clean_diverged == 20;
  detail = "rho=0 diverged " + std::to_string(clean_diverged) + "/20";
  const std::vector<double> rhos{0.02, 0.05, 0.1};
  for (std::size_t k = 0; k < rhos.size(); ++k) {
    int converged = 0, unflipped = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Dataset noisy = corrupt(data[s], rhos[k], derive_seed(1000 + s, StreamTag::corruption, {k}));
      unflipped += noisy.y_tilde() == noisy.y();
      converged += fit_erm(logistic_loss(), noisy, true).status == FitStatus::converged;
    }
    pass = pass && converged >= 19;
    detail += "; rho=" + fmt("%.2f", rhos[k]) + " converged " + std::to_string(converged) + "/20 (" +
              std::to_string(unflipped) + " draws flipped no label)";
  }
  return {pass, detail};
}

Outcome risk_figure() {
  ExperimentConfig cfg;
  cfg.trials = 30;
  cfg.mc_test_samples = 50000;
  const ExperimentResult r = run_experiment(cfg, 1);
  auto cell = [&](Index n, std::size_t k) -> const CellSummary& {
    for (const CellSummary& c : r.summary)
      if (c.n == n && c.rho == cfg.rho_grid[k]) return c;
    throw std::logic_error("missing cell");
  };
  // n = 400: corruption helps
  const CellSummary& z400 = cell(400, 0);
  const CellSummary* best400 = nullptr;
  for (std::size_t k = 1; k < cfg.rho_grid.size(); ++k)
    if (!best400 || cell(400, k).mean_risk < best400->mean_risk) best400 = &cell(400, k);
  const double gap400 = (z400.mean_risk - best400->mean_risk) / pooled_se(z400.se, best400->se);
  // n = 2000: no noticeable improvement
  const CellSummary& z2000 = cell(2000, 0);
  const CellSummary* best2000 = &z2000;
  for (std::size_t k = 1; k < cfg.rho_grid.size(); ++k)
    if (cell(2000, k).mean_risk < best2000->mean_risk) best2000 = &cell(2000, k);
  const double gap2000 = (z2000.mean_risk - best2000->mean_risk) / pooled_se(z2000.se, best2000->se);
  // population curve
  bool monotone = true;
  for (std::size_t k = 1; k < r.population.size(); ++k)
    if (r.population[k].risk < r.population[k - 1].risk - pooled_se(r.population[k].risk_se, r.population[k - 1].risk_se))
      monotone = false;
  const bool pass = gap400 > 2.0 && gap2000 <= 2.0 && monotone;
  std::string detail = "n=400 gap " + fmt("%.2f", gap400) + " SE at rho=" + fmt("%.2f", best400->rho) +
                       "; n=2000 gap " + fmt("%.2f", gap2000) + " SE; population nondecreasing " +
                       (monotone ? "yes" : "no");
  return {pass, detail};
}

Outcome sandwich() {
  const FeatureCertificate cert = certify_features(gaussian_model(10), 100, 100000, 7);
  if (!cert.feasible) return {false, "feature certificate infeasible: " + cert.message};
  const SandwichReport r = check_sandwich(logistic_loss(), with_certificate(gaussian_model(10), cert),
                                          {0.0, 0.5, 1.0, 5.0, 20.0, 100.0}, 50, 100000, 11);
  return {r.violations == 0, "violations " + std::to_string(r.violations) + "/" + std::to_string(r.samples.size()) +
                                 ", c_L " + fmt("%.4f", r.c_L) + ", c_U " + fmt("%.4f", r.c_U)};
}

Outcome shrinkage() {
  const ShrinkageReport r = check_shrinkage(logistic_loss(), cubic_logit_model(50), {0.02, 0.05, 0.1, 0.2}, 100000, 3);
  std::string norms;
  for (const ShrinkageRow& row : r.rows) norms += fmt(" %.3f", row.w_norm);
  return {r.strictly_decreasing && r.scaled_ratio <= 10.0,
          "norms" + norms + "; max/min of norm*sqrt(rho) " + fmt("%.3f", r.scaled_ratio)};
}

Outcome concentration() {
  const LossSpec loss = logistic_loss();
  const DataModel model = cubic_logit_model(5);
  ConcConfig c3;
  c3.rho = 0.1;
  c3.r = 5.0;
  c3.directions = 500;
  c3.n_grid = {250, 1000, 4000, 16000};
  const ConcentrationReport sup_gap = estimate_conc_quantities(ConcQuantity::sup_gap, &loss, model, c3, 5);

  const FeatureCertificate cert = certify_features(model, 100, 100000, 8);
  ConcConfig c2;
  c2.n_grid = {10000};
  c2.t = 100.0;
  c2.trials = 1;
  const ConcentrationReport expsum = estimate_conc_quantities(ConcQuantity::expsum, nullptr, model, c2, 5);
  const double bound = (cert.constants.a2 + 1.0) / c2.t + 0.1;

  const bool slope_ok = sup_gap.trend_slope >= -0.65 && sup_gap.trend_slope <= -0.35;
  const bool expsum_ok = cert.feasible && expsum.mean[0] <= bound;
  return {slope_ok && expsum_ok, "conc3 slope " + fmt("%.3f", sup_gap.trend_slope) + "; conc2 " +
                                     fmt("%.4f", expsum.mean[0]) + " vs bound " + fmt("%.4f", bound)};
}

// Dense grid over [-20, 20]^d with step 1e-2, vectorized along the last axis.
double grid_minimum(const std::string& loss, const MatrixXd& signed_x) {
  const int points = 4001;
  const Eigen::ArrayXd axis = Eigen::ArrayXd::LinSpaced(points, -20.0, 20.0);
  auto values = [&](const Eigen::ArrayXd& m) -> Eigen::ArrayXd {
    if (loss == "hinge") return (1.0 - m).max(0.0);
    return (-m.abs()).exp().log1p() + (-m).max(0.0);
  };
  const Index n = signed_x.rows();
  double best = std::numeric_limits<double>::infinity();
  if (signed_x.cols() == 1) {
    Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(points);
    for (Index i = 0; i < n; ++i) sum += values(axis * signed_x(i, 0));
    return sum.minCoeff() / static_cast<double>(n);
  }
  Eigen::ArrayXd sum(points);
  for (int a = 0; a < points; ++a) {
    sum.setZero();
    for (Index i = 0; i < n; ++i) sum += values(axis(a) * signed_x(i, 0) + axis * signed_x(i, 1));
    best = std::min(best, sum.minCoeff() / static_cast<double>(n));
  }
  return best;
}

Outcome solver_oracle() {
  int instances = 0, matched = 0, skipped = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; instances < 20; ++seed) {
    const std::string loss_name = instances < 10 ? "logistic" : "hinge";
    const int d = 1 + instances % 2;
    Rng rng(derive_seed(seed, StreamTag::features, {static_cast<std::uint64_t>(instances)}));
    std::normal_distribution<double> normal;
    std::uniform_int_distribution<int> size(8, 20);
    const int n = size(rng);
    auto x = std::make_shared<MatrixXd>(n, d);
    VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) (*x)(i, j) = normal(rng);
      y(i) = std::bernoulli_distribution(sigmoid(2.0 * (*x)(i, 0)))(rng) ? 1.0 : -1.0;
    }
    // A mirrored pair along each axis keeps the minimizer bounded.
    for (int j = 0; j < d; ++j) {
      (*x)(2 * j, Eigen::all).setZero();
      (*x)(2 * j + 1, Eigen::all).setZero();
      (*x)(2 * j, j) = (*x)(2 * j + 1, j) = 1.0;
      y(2 * j) = 1.0;
      y(2 * j + 1) = -1.0;
    }
    const Dataset ds(x, y, seed);
    const LossSpec loss = loss_by_name(loss_name);
    const FitResult fit = fit_erm(loss, ds, false);
    if (fit.status == FitStatus::diverged || fit.w.cwiseAbs().maxCoeff() > 19.0) {
      ++skipped;  // minimizer outside the grid box
      continue;
    }
    const double grid = grid_minimum(loss_name, y.asDiagonal() * (*x));
    const double err = std::abs(fit.objective - grid);
    worst = std::max(worst, err);
    matched += err <= 1e-3;
    ++instances;
  }
  return {matched == 20, std::to_string(matched) + "/20 within 1e-3 (worst " + fmt("%.2e", worst) + ", " +
                             std::to_string(skipped) + " draws skipped with minimizer outside the box)"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "noisyerm_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::vector<std::pair<std::string, json>> runs{
      {"run-experiment",
       {{"d", 5}, {"n_values", {40, 120}}, {"rho_grid", {0.0, 0.1}}, {"trials", 3}, {"mc_test_samples", 2000},
        {"saa_samples", 10000}}},
      {"check-identity", {{"resamples", 300}}},
      {"check-sandwich",
       {{"d", 5}, {"directions", 4}, {"mc_samples", 2000}, {"certificate_mc_samples", 10000}}},
      {"check-shrinkage", {{"d", 5}, {"saa_samples", 10000}, {"mc_samples", 2000}}},
      {"theorem-sweep",
       {{"d", 5}, {"n_values", {50, 100}}, {"rho_grid", {0.0, 0.05, 0.1}}, {"trials", 20},
        {"mc_test_samples", 2000}, {"saa_samples", 10000}}},
      {"conc-estimate", {{"n_values", {100, 400}}, {"trials", 2}, {"reference_samples", 10000}}},
      {"certify", {{"mc_samples", 10000}}},
  };
  int identical = 0;
  std::string failures;
  for (const auto& [sub, cfg] : runs) {
    const fs::path cfg_path = root / (sub + ".json");
    std::ofstream(cfg_path) << cfg.dump();
    std::vector<fs::path> dirs;
    bool ok = true;
    for (const char* threads : {"1", "1", "3"}) {
      dirs.push_back(root / (sub + "_" + std::to_string(dirs.size())));
      const std::string out = dirs.back().string(), config = cfg_path.string();
      const char* argv[] = {"noisyerm", sub.c_str(), "--config", config.c_str(), "--out", out.c_str(),
                            "--seed", "123", "--threads", threads};
      std::ostringstream sink_out, sink_err;
      if (run_cli(10, argv, sink_out, sink_err) != 0) {
        ok = false;
        failures += " " + sub + " (exit: " + sink_err.str().substr(0, 120) + ")";
        break;
      }
    }
    if (ok) {
      int compared = 0;
      for (const auto& entry : fs::directory_iterator(dirs[0])) {
        const std::string ext = entry.path().extension().string();
        if (ext != ".csv" && ext != ".svg") continue;
        ++compared;
        const std::string ref = slurp(entry.path());
        for (std::size_t k = 1; k < dirs.size(); ++k)
          if (slurp(dirs[k] / entry.path().filename()) != ref) ok = false;
      }
      if (compared == 0) ok = false;
      if (!ok) failures += " " + sub;
    }
    identical += ok;
  }
  fs::remove_all(root);
  return {identical == static_cast<int>(runs.size()),
          std::to_string(identical) + "/" + std::to_string(runs.size()) +
              " subcommands byte-identical across reruns and thread counts" +
              (failures.empty() ? "" : "; differing:" + failures)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "regularization identity", 10, regularization_identity},
      {2, "algebraic rewrite", 1, algebraic_rewrite},
      {3, "separability behavior", 30, separability},
      {4, "risk-vs-rho figure", 1200, risk_figure},
      {5, "regularizer sandwich", 120, sandwich},
      {6, "minimizer shrinkage", 300, shrinkage},
      {7, "concentration trends", 600, concentration},
      {8, "solver grid oracle", 60, solver_oracle},
      {9, "determinism", 600, determinism},
  };
  std::set<int> selected, known_fail;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--known-fail" && i + 1 < argc) {
      known_fail.insert(std::atoi(argv[++i]));
    } else {
      selected.insert(std::atoi(argv[i]));
    }
  }

  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = secs <= c.budget_seconds;
    const bool pass = o.pass && in_budget;
    if (!pass && !known_fail.count(c.id)) ++failed;
    std::cout << "criterion " << c.id << " [" << c.name << "]: " << (pass ? "PASS" : "FAIL") << " | " << o.detail
              << " | " << fmt("%.1f", secs) << " s (budget " << fmt("%.0f", c.budget_seconds) << " s)"
              << (in_budget ? "" : " OVER BUDGET") << (!pass && known_fail.count(c.id) ? " (known failure)" : "")
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
