#include "noisyerm/cli.hpp"

#include "noisyerm/reports.hpp"
#include "noisyerm/stats.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#ifndef NOISYERM_VERSION
#define NOISYERM_VERSION "unknown"
#endif

namespace noisyerm {

using nlohmann::json;

std::string_view to_string(Subcommand s) {
  switch (s) {
    case Subcommand::run_experiment: return "run-experiment";
    case Subcommand::check_identity: return "check-identity";
    case Subcommand::check_sandwich: return "check-sandwich";
    case Subcommand::check_shrinkage: return "check-shrinkage";
    case Subcommand::theorem_sweep: return "theorem-sweep";
    case Subcommand::conc_estimate: return "conc-estimate";
    case Subcommand::certify: return "certify";
  }
  return "unknown";
}

std::vector<Subcommand> all_subcommands() {
  return {Subcommand::run_experiment, Subcommand::check_identity, Subcommand::check_sandwich,
          Subcommand::check_shrinkage, Subcommand::theorem_sweep, Subcommand::conc_estimate, Subcommand::certify};
}

Subcommand subcommand_by_name(std::string_view name) {
  for (Subcommand s : all_subcommands())
    if (to_string(s) == name) return s;
  throw ConfigError("unknown subcommand '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Strict JSON reading

namespace {

class Reader {
 public:
  Reader(const json& doc, std::string prefix) : doc_(doc), prefix_(std::move(prefix)) {
    if (!doc_.is_object())
      throw ConfigError((prefix_.empty() ? std::string("config") : "key '" + prefix_ + "'") +
                        " must be a JSON object, got " + doc_.type_name());
  }

  template <typename T>
  void read(const std::string& key, T& target) {
    seen_.push_back(key);
    const auto it = doc_.find(key);
    if (it == doc_.end()) return;
    convert(*it, path(key), target);
  }

  void read_solver(const std::string& key, SolveConfig& cfg) {
    seen_.push_back(key);
    const auto it = doc_.find(key);
    if (it == doc_.end()) return;
    Reader sub(*it, path(key));
    sub.read("max_iters", cfg.max_iters);
    sub.read("grad_tol", cfg.grad_tol);
    sub.read("divergence_norm", cfg.divergence_norm);
    sub.read("objective_tol", cfg.objective_tol);
    std::string rule = "auto";
    sub.read("step_rule", rule);
    if (rule == "auto") {
      cfg.step_rule.reset();
    } else if (rule == "backtracking-armijo") {
      cfg.step_rule = StepRule::backtracking_armijo;
    } else if (rule == "diminishing-subgradient") {
      cfg.step_rule = StepRule::diminishing_subgradient;
    } else {
      throw ConfigError("key '" + sub.path("step_rule") +
                        "' expects one of auto, backtracking-armijo, diminishing-subgradient; got '" + rule + "'");
    }
    sub.finish();
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("key '" + path(key) + "': " + e.what());
    }
  }

  /// A scalar "rho" stands for a one-element list under list_key.
  void read_rho_shorthand(const std::string& list_key, std::vector<double>& target) {
    seen_.push_back("rho");
    const auto it = doc_.find("rho");
    if (it == doc_.end()) return;
    if (doc_.contains(list_key)) throw ConfigError("keys 'rho' and '" + path(list_key) + "' are mutually exclusive");
    double rho = 0.0;
    convert(*it, path("rho"), rho);
    target = {rho};
  }

  void finish() const {
    for (auto it = doc_.begin(); it != doc_.end(); ++it)
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
        throw ConfigError("unknown key '" + path(it.key()) + "'");
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

 private:
  [[noreturn]] static void type_error(const std::string& key, const char* expected, const json& v) {
    throw ConfigError("key '" + key + "' expects " + expected + ", got " + v.type_name());
  }

  static void convert(const json& v, const std::string& key, double& out) {
    if (!v.is_number()) type_error(key, "a number", v);
    out = v.get<double>();
  }
  static void convert(const json& v, const std::string& key, int& out) {
    if (!v.is_number_integer()) type_error(key, "an integer", v);
    const auto x = v.get<std::int64_t>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
      throw ConfigError("key '" + key + "' is out of range");
    out = static_cast<int>(x);
  }
  static void convert(const json& v, const std::string& key, long& out) {
    if (!v.is_number_integer()) type_error(key, "an integer", v);
    out = v.get<long>();
  }
  static void convert(const json& v, const std::string& key, std::uint64_t& out) {
    if (!v.is_number_unsigned()) type_error(key, "a nonnegative integer", v);
    out = v.get<std::uint64_t>();
  }
  static void convert(const json& v, const std::string& key, std::string& out) {
    if (!v.is_string()) type_error(key, "a string", v);
    out = v.get<std::string>();
  }
  template <typename T>
  static void convert(const json& v, const std::string& key, std::vector<T>& out) {
    if (!v.is_array()) type_error(key, "an array", v);
    std::vector<T> tmp(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) convert(v[i], key + "[" + std::to_string(i) + "]", tmp[i]);
    out = std::move(tmp);
  }

  const json& doc_;
  std::string prefix_;
  std::vector<std::string> seen_;
};

[[noreturn]] void invalid(const std::string& key, const std::string& what) {
  throw ConfigError("key '" + key + "': " + what);
}

// Library messages read "field: problem".
[[noreturn]] void rethrow_field_error(const std::invalid_argument& e) {
  const std::string msg = e.what();
  const auto colon = msg.find(": ");
  if (colon == std::string::npos) throw ConfigError(msg);
  invalid(msg.substr(0, colon), msg.substr(colon + 2));
}

void check_rho(const std::string& key, double rho) {
  if (!(rho >= 0.0 && rho < 0.5))
    invalid(key, "rho must lie in [0, 1/2), got " + format_double(rho));
}

void check_loss(const std::string& key, const std::string& name) {
  if (name != "logistic" && name != "hinge") invalid(key, "expected \"logistic\" or \"hinge\", got \"" + name + "\"");
}

void check_model(const std::string& key, const std::string& name, int d) {
  if (name != "gaussian" && name != "cubic-logit")
    invalid(key, "expected \"gaussian\" or \"cubic-logit\", got \"" + name + "\"");
  if (name == "cubic-logit" && d < 2) invalid("d", "the cubic-logit model needs d >= 2");
}

void check_min(const std::string& key, double value, double lo) {
  if (!(value >= lo)) invalid(key, "must be >= " + format_double(lo));
}

DataModel model_by_name(const std::string& name, int d) {
  return name == "gaussian" ? gaussian_model(d) : cubic_logit_model(d);
}

json solver_json(const SolveConfig& cfg) {
  std::string rule = "auto";
  if (cfg.step_rule) rule = *cfg.step_rule == StepRule::backtracking_armijo ? "backtracking-armijo" : "diminishing-subgradient";
  return {{"max_iters", cfg.max_iters},
          {"grad_tol", cfg.grad_tol},
          {"divergence_norm", cfg.divergence_norm},
          {"objective_tol", cfg.objective_tol},
          {"step_rule", rule}};
}

ExperimentConfig parse_experiment(const json& doc) {
  ExperimentConfig c;
  Reader r(doc, "");
  r.read("d", c.d);
  r.read("n_values", c.n_values);
  r.read("rho_grid", c.rho_grid);
  r.read_rho_shorthand("rho_grid", c.rho_grid);
  r.read("trials", c.trials);
  r.read("loss", c.loss);
  r.read("mc_test_samples", c.mc_test_samples);
  r.read("saa_samples", c.saa_samples);
  r.read("master_seed", c.master_seed);
  r.read_solver("solver", c.solver);
  r.finish();
  for (std::size_t i = 0; i < c.rho_grid.size(); ++i) check_rho("rho_grid[" + std::to_string(i) + "]", c.rho_grid[i]);
  check_loss("loss", c.loss);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    rethrow_field_error(e);
  }
  return c;
}

IdentityParams parse_identity(const json& doc) {
  IdentityParams p;
  Reader r(doc, "");
  r.read("n", p.n);
  r.read("d", p.d);
  r.read("w_norm", p.w_norm);
  r.read("rhos", p.rhos);
  r.read_rho_shorthand("rhos", p.rhos);
  r.read("resamples", p.resamples);
  r.read("loss", p.loss);
  r.read("master_seed", p.master_seed);
  r.finish();
  check_min("n", static_cast<double>(p.n), 1);
  check_min("d", p.d, 2);
  check_min("w_norm", p.w_norm, 0);
  check_min("resamples", p.resamples, 2);
  if (p.rhos.empty()) invalid("rhos", "must be nonempty");
  for (std::size_t i = 0; i < p.rhos.size(); ++i) check_rho("rhos[" + std::to_string(i) + "]", p.rhos[i]);
  check_loss("loss", p.loss);
  return p;
}

SandwichParams parse_sandwich(const json& doc) {
  SandwichParams p;
  Reader r(doc, "");
  r.read("d", p.d);
  r.read("model", p.model);
  r.read("norms", p.norms);
  r.read("directions", p.directions);
  r.read("mc_samples", p.mc_samples);
  r.read("certificate_directions", p.certificate_directions);
  r.read("certificate_mc_samples", p.certificate_mc_samples);
  r.read("loss", p.loss);
  r.read("master_seed", p.master_seed);
  r.finish();
  check_min("d", p.d, 1);
  check_model("model", p.model, p.d);
  if (p.norms.empty()) invalid("norms", "must be nonempty");
  for (std::size_t i = 0; i < p.norms.size(); ++i)
    if (!(p.norms[i] >= 0.0 && p.norms[i] <= 1e3)) invalid("norms[" + std::to_string(i) + "]", "must lie in [0, 1000]");
  check_min("directions", p.directions, 1);
  check_min("mc_samples", static_cast<double>(p.mc_samples), 1000);
  check_min("certificate_directions", p.certificate_directions, 100);
  check_min("certificate_mc_samples", static_cast<double>(p.certificate_mc_samples), 10000);
  check_loss("loss", p.loss);
  return p;
}

ShrinkageParams parse_shrinkage(const json& doc) {
  ShrinkageParams p;
  Reader r(doc, "");
  r.read("d", p.d);
  r.read("rhos", p.rhos);
  r.read_rho_shorthand("rhos", p.rhos);
  r.read("saa_samples", p.saa_samples);
  r.read("mc_samples", p.mc_samples);
  r.read("loss", p.loss);
  r.read("master_seed", p.master_seed);
  r.read_solver("solver", p.solver);
  r.finish();
  check_min("d", p.d, 2);
  if (p.rhos.size() < 4) invalid("rhos", "needs at least 4 values");
  for (std::size_t i = 0; i < p.rhos.size(); ++i) {
    const std::string key = "rhos[" + std::to_string(i) + "]";
    check_rho(key, p.rhos[i]);
    if (p.rhos[i] == 0.0) invalid(key, "rho must be positive here");
  }
  check_min("saa_samples", static_cast<double>(p.saa_samples), 10000);
  check_min("mc_samples", static_cast<double>(p.mc_samples), 1000);
  check_loss("loss", p.loss);
  return p;
}

SweepParams parse_sweep(const json& doc) {
  SweepParams p;
  Reader r(doc, "");
  r.read("d", p.d);
  r.read("n_values", p.n_values);
  r.read("rho_grid", p.rho_grid);
  r.read_rho_shorthand("rho_grid", p.rho_grid);
  r.read("trials", p.trials);
  r.read("mc_test_samples", p.mc_test_samples);
  r.read("saa_samples", p.saa_samples);
  r.read("loss", p.loss);
  r.read("master_seed", p.master_seed);
  r.read_solver("solver", p.solver);
  r.finish();
  check_min("trials", p.trials, 20);
  for (std::size_t i = 0; i < p.rho_grid.size(); ++i) check_rho("rho_grid[" + std::to_string(i) + "]", p.rho_grid[i]);
  check_loss("loss", p.loss);
  ExperimentConfig e;
  e.d = p.d;
  e.n_values = p.n_values;
  e.rho_grid = p.rho_grid;
  e.trials = p.trials;
  e.mc_test_samples = p.mc_test_samples;
  e.saa_samples = p.saa_samples;
  e.loss = p.loss;
  try {
    e.validate();
  } catch (const std::invalid_argument& ex) {
    rethrow_field_error(ex);
  }
  return p;
}

ConcParams parse_conc(const json& doc) {
  ConcParams p;
  Reader r(doc, "");
  r.read("quantities", p.quantities);
  r.read("d", p.d);
  r.read("model", p.model);
  r.read("rho", p.conc.rho);
  r.read("n_values", p.conc.n_grid);
  r.read("directions", p.conc.directions);
  r.read("r", p.conc.r);
  r.read("t", p.conc.t);
  r.read("trials", p.conc.trials);
  r.read("reference_samples", p.conc.reference_samples);
  r.read("loss", p.loss);
  r.read("master_seed", p.master_seed);
  r.finish();
  if (p.quantities.empty()) invalid("quantities", "must be nonempty");
  for (std::size_t i = 0; i < p.quantities.size(); ++i) {
    try {
      conc_quantity_by_name(p.quantities[i]);
    } catch (const std::invalid_argument& e) {
      invalid("quantities[" + std::to_string(i) + "]", e.what());
    }
  }
  check_min("d", p.d, 1);
  check_model("model", p.model, p.d);
  check_rho("rho", p.conc.rho);
  if (p.conc.n_grid.empty()) invalid("n_values", "must be nonempty");
  for (std::size_t i = 0; i < p.conc.n_grid.size(); ++i)
    check_min("n_values[" + std::to_string(i) + "]", static_cast<double>(p.conc.n_grid[i]), 1);
  check_min("directions", p.conc.directions, 500);
  if (!(p.conc.r > 0.0)) invalid("r", "must be positive");
  if (!(p.conc.t > 0.0)) invalid("t", "must be positive");
  check_min("trials", p.conc.trials, 1);
  check_min("reference_samples", static_cast<double>(p.conc.reference_samples), 1000);
  check_loss("loss", p.loss);
  return p;
}

CertifyParams parse_certify(const json& doc) {
  CertifyParams p;
  Reader r(doc, "");
  r.read("d", p.d);
  r.read("model", p.model);
  r.read("directions", p.directions);
  r.read("mc_samples", p.mc_samples);
  r.read("losses", p.losses);
  r.read("master_seed", p.master_seed);
  r.finish();
  check_min("d", p.d, 1);
  check_model("model", p.model, p.d);
  check_min("directions", p.directions, 100);
  check_min("mc_samples", static_cast<double>(p.mc_samples), 10000);
  for (std::size_t i = 0; i < p.losses.size(); ++i) check_loss("losses[" + std::to_string(i) + "]", p.losses[i]);
  return p;
}

}  // namespace

TypedConfig parse_config(Subcommand sub, const json& doc) {
  switch (sub) {
    case Subcommand::run_experiment: return parse_experiment(doc);
    case Subcommand::check_identity: return parse_identity(doc);
    case Subcommand::check_sandwich: return parse_sandwich(doc);
    case Subcommand::check_shrinkage: return parse_shrinkage(doc);
    case Subcommand::theorem_sweep: return parse_sweep(doc);
    case Subcommand::conc_estimate: return parse_conc(doc);
    case Subcommand::certify: return parse_certify(doc);
  }
  throw ConfigError("unknown subcommand");
}

TypedConfig parse_config_file(Subcommand sub, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(sub, doc);
}

json resolved_json(const TypedConfig& cfg) {
  struct Visitor {
    json operator()(const ExperimentConfig& c) const {
      return {{"d", c.d},
              {"n_values", c.n_values},
              {"rho_grid", c.rho_grid},
              {"trials", c.trials},
              {"loss", c.loss},
              {"mc_test_samples", c.mc_test_samples},
              {"saa_samples", c.saa_samples},
              {"master_seed", c.master_seed},
              {"solver", solver_json(c.solver)}};
    }
    json operator()(const IdentityParams& p) const {
      return {{"n", p.n},         {"d", p.d},       {"w_norm", p.w_norm},           {"rhos", p.rhos},
              {"resamples", p.resamples}, {"loss", p.loss}, {"master_seed", p.master_seed}};
    }
    json operator()(const SandwichParams& p) const {
      return {{"d", p.d},
              {"model", p.model},
              {"norms", p.norms},
              {"directions", p.directions},
              {"mc_samples", p.mc_samples},
              {"certificate_directions", p.certificate_directions},
              {"certificate_mc_samples", p.certificate_mc_samples},
              {"loss", p.loss},
              {"master_seed", p.master_seed}};
    }
    json operator()(const ShrinkageParams& p) const {
      return {{"d", p.d},
              {"rhos", p.rhos},
              {"saa_samples", p.saa_samples},
              {"mc_samples", p.mc_samples},
              {"loss", p.loss},
              {"master_seed", p.master_seed},
              {"solver", solver_json(p.solver)}};
    }
    json operator()(const SweepParams& p) const {
      return {{"d", p.d},
              {"n_values", p.n_values},
              {"rho_grid", p.rho_grid},
              {"trials", p.trials},
              {"mc_test_samples", p.mc_test_samples},
              {"saa_samples", p.saa_samples},
              {"loss", p.loss},
              {"master_seed", p.master_seed},
              {"solver", solver_json(p.solver)}};
    }
    json operator()(const ConcParams& p) const {
      return {{"quantities", p.quantities},
              {"d", p.d},
              {"model", p.model},
              {"rho", p.conc.rho},
              {"n_values", p.conc.n_grid},
              {"directions", p.conc.directions},
              {"r", p.conc.r},
              {"t", p.conc.t},
              {"trials", p.conc.trials},
              {"reference_samples", p.conc.reference_samples},
              {"loss", p.loss},
              {"master_seed", p.master_seed}};
    }
    json operator()(const CertifyParams& p) const {
      return {{"d", p.d},
              {"model", p.model},
              {"directions", p.directions},
              {"mc_samples", p.mc_samples},
              {"losses", p.losses},
              {"master_seed", p.master_seed}};
    }
  };
  return std::visit(Visitor{}, cfg);
}

void override_seed(TypedConfig& cfg, std::uint64_t seed) {
  std::visit([seed](auto& c) { c.master_seed = seed; }, cfg);
}

// ---------------------------------------------------------------------------
// Subcommand runners

namespace {

struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunOutput {
  ReportSet reports;
  json summary = json::object();
  std::optional<std::string> failure;  // reported after the files are written
};

RunOutput run(const ExperimentConfig& cfg, int threads) {
  const ExperimentResult r = run_experiment(cfg, threads);
  RunOutput out;
  out.reports.add_table("results.csv", results_table(r));
  out.reports.add_table("summary.csv", summary_table(r));
  out.reports.add_table("population.csv", population_table(r));
  out.reports.add_text("figure1.svg", figure1_svg(r));

  json cells = json::array();
  for (Index n : cfg.n_values) {
    const CellSummary* zero = nullptr;
    const CellSummary* best = nullptr;
    for (const CellSummary& c : r.summary) {
      if (c.n != n) continue;
      if (c.rho == 0.0) zero = &c;
      if (c.rho > 0.0 && (!best || c.mean_risk < best->mean_risk)) best = &c;
    }
    json entry{{"n", n}};
    if (best) entry["best_positive_rho"] = best->rho, entry["best_positive_mean_risk"] = best->mean_risk;
    if (zero) entry["rho0_mean_risk"] = zero->mean_risk, entry["rho0_diverged"] = zero->diverged_count;
    if (zero && best)
      entry["gap_in_pooled_se"] = (zero->mean_risk - best->mean_risk) / std::max(pooled_se(zero->se, best->se), 1e-300);
    cells.push_back(entry);
  }
  out.summary["cells"] = cells;
  return out;
}

RunOutput run(const IdentityParams& p, int) {
  const LossSpec loss = loss_by_name(p.loss);
  const IdentityReport r = check_identity(loss, cubic_logit_model(p.d), p.n, p.w_norm, p.rhos, p.resamples, p.master_seed);
  RunOutput out;
  out.reports.add_table("identity.csv", identity_table(r));
  std::vector<RiskEstimate> risks{{r.clean_risk, 0.0, p.n, RiskKind::empirical},
                                  {r.regularizer, 0.0, p.n, RiskKind::regularizer_empirical}};
  std::vector<double> norms{p.w_norm, p.w_norm}, rhos{0.0, 0.0};
  for (const IdentityRow& row : r.rows) {
    risks.push_back({row.resampled_mean, row.resampled_se, p.resamples, RiskKind::corrupted_empirical});
    norms.push_back(p.w_norm);
    rhos.push_back(row.rho);
  }
  out.reports.add_table("risks.csv", risk_table(risks, norms, rhos));
  out.summary["all_within_4se"] = r.all_within();
  return out;
}

RunOutput run(const SandwichParams& p, int) {
  const LossSpec loss = loss_by_name(p.loss);
  const DataModel base = model_by_name(p.model, p.d);
  const FeatureCertificate cert = certify_features(base, p.certificate_directions, p.certificate_mc_samples,
                                                   derive_seed(p.master_seed, StreamTag::population, {1}));
  if (!cert.feasible) throw NumericalFailure("feature certificate failed: " + cert.message);
  const SandwichReport r = check_sandwich(loss, with_certificate(base, cert), p.norms, p.directions, p.mc_samples,
                                          p.master_seed);
  RunOutput out;
  out.reports.add_table("features.csv", feature_certificate_table(cert));
  out.reports.add_table("sandwich.csv", sandwich_table(r));
  out.summary["c_L"] = r.c_L;
  out.summary["c_U"] = r.c_U;
  out.summary["violations"] = r.violations;
  return out;
}

RunOutput run(const ShrinkageParams& p, int threads) {
  const LossSpec loss = loss_by_name(p.loss);
  const DataModel model = cubic_logit_model(p.d);
  const ShrinkageReport s = check_shrinkage(loss, model, p.rhos, p.saa_samples, p.master_seed, p.solver, threads);
  const RiskGapReport g = check_risk_gap(loss, model, p.rhos, p.saa_samples, p.mc_samples, p.master_seed, p.solver, threads);
  RunOutput out;
  out.reports.add_table("shrinkage.csv", shrinkage_table(s));
  out.reports.add_table("risk_gap.csv", risk_gap_table(g));
  std::vector<std::string> labels;
  json fits = json::array();
  for (std::size_t k = 0; k < s.rows.size(); ++k) {
    labels.push_back("rho=" + format_double(s.rows[k].rho));
    json f = fit_json(s.fits[k]);
    f["rho"] = s.rows[k].rho;
    fits.push_back(f);
  }
  out.reports.add_table("fits.csv", fit_table(labels, s.fits));
  out.reports.add_text("fits.json", fits.dump(2) + "\n");
  out.summary["log_log_slope"] = s.log_log_slope;
  out.summary["scaled_ratio"] = s.scaled_ratio;
  out.summary["strictly_decreasing"] = s.strictly_decreasing;
  out.summary["gap_nondecreasing"] = g.nondecreasing;
  out.summary["gap_ratio_spread"] = g.ratio_spread;
  if (!s.bound_consistent) out.failure = "a penalized population solve diverged at rho > 0";
  return out;
}

RunOutput run(const SweepParams& p, int threads) {
  SweepOptions opts;
  opts.mc_test_samples = p.mc_test_samples;
  opts.saa_samples = p.saa_samples;
  opts.solver = p.solver;
  opts.threads = threads;
  const SweepReport r =
      theorem1_sweep(loss_by_name(p.loss), cubic_logit_model(p.d), p.n_values, p.rho_grid, p.trials, p.master_seed, opts);
  RunOutput out;
  out.reports.add_table("sweep.csv", sweep_table(r));
  out.reports.add_table("sweep_best.csv", sweep_best_table(r));
  out.reports.add_table("results.csv", results_table(r.experiment));
  out.reports.add_text("sweep.svg", sweep_svg(r));
  out.summary["inf_proxy"] = r.inf_proxy;
  out.summary["best_rho"] = r.best_rho;
  out.summary["best_rho_nonincreasing"] = r.best_rho_nonincreasing;
  return out;
}

RunOutput run(const ConcParams& p, int threads) {
  const LossSpec loss = loss_by_name(p.loss);
  const DataModel model = model_by_name(p.model, p.d);
  std::vector<ConcentrationReport> reports;
  json slopes = json::object();
  for (const std::string& name : p.quantities) {
    const ConcQuantity q = conc_quantity_by_name(name);
    reports.push_back(estimate_conc_quantities(q, &loss, model, p.conc, p.master_seed, threads));
    slopes[name] = reports.back().trend_slope;
  }
  RunOutput out;
  out.reports.add_table("conc.csv", conc_table(reports));
  out.reports.add_table("conc_summary.csv", conc_summary_table(reports));
  out.summary["trend_slope"] = slopes;
  return out;
}

RunOutput run(const CertifyParams& p, int) {
  const FeatureCertificate cert =
      certify_features(model_by_name(p.model, p.d), p.directions, p.mc_samples, p.master_seed);
  std::vector<CertificateReport> losses;
  for (const std::string& name : p.losses) losses.push_back(certify_loss(loss_by_name(name)));
  RunOutput out;
  out.reports.add_table("features.csv", feature_certificate_table(cert));
  out.reports.add_table("loss_checks.csv", loss_certificate_table(losses));
  out.summary["features_feasible"] = cert.feasible;
  out.summary["a0"] = cert.constants.a0;
  out.summary["a1"] = cert.constants.a1;
  out.summary["a2"] = cert.constants.a2;
  if (!cert.feasible) out.failure = "feature certificate failed: " + cert.message;
  for (const CertificateReport& r : losses)
    if (!r.all_passed()) out.failure = "loss '" + r.loss + "' failed its certificate";
  return out;
}

std::string describe(Subcommand s) {
  switch (s) {
    case Subcommand::run_experiment: return "risk-vs-rho experiment over (n, rho, trial) with population curve";
    case Subcommand::check_identity: return "corrupted risk vs its regularized expectation over label resamples";
    case Subcommand::check_sandwich: return "lower/upper bounds on the regularizer over norms and directions";
    case Subcommand::check_shrinkage: return "norm of the penalized population minimizer and the risk gap over rho";
    case Subcommand::theorem_sweep: return "best rho per n against the infimum proxy";
    case Subcommand::conc_estimate: return "Monte Carlo concentration quantities over n";
    case Subcommand::certify: return "feature-distribution constants and loss properties";
  }
  return "";
}

void error_line(std::ostream& err, const std::string& kind, int code, const std::string& message) {
  err << json{{"status", "error"}, {"kind", kind}, {"exit_code", code}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Corrupted-label ERM experiments and numerical checks", "noisyerm"};
  app.require_subcommand(1);
  app.set_version_flag("--version", NOISYERM_VERSION);

  CliConfig cli;
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<std::pair<Subcommand, CLI::App*>> subs;
  for (Subcommand s : all_subcommands()) {
    CLI::App* sub = app.add_subcommand(std::string(to_string(s)), describe(s));
    sub->add_option("--config", config_path, "JSON config file; absent keys take defaults");
    sub->add_option("--out", out_dir, std::string("output directory (default: $") + kOutDirEnv + " or ./noisyerm-out)");
    sub->add_option("--seed", seed, "override master_seed");
    sub->add_option("--threads", threads, "worker threads (results do not depend on it)");
    subs.emplace_back(s, sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << NOISYERM_VERSION << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    error_line(err, "usage", 2, e.what());
    return 2;
  }

  try {
    for (const auto& [s, sub] : subs) {
      if (!sub->parsed()) continue;
      cli.subcommand = s;
      if (sub->count("--config")) cli.config_path = config_path;
      if (sub->count("--seed")) cli.seed = seed;
      if (sub->count("--threads")) cli.threads = threads;
      if (sub->count("--out")) {
        cli.out_dir = out_dir;
      } else if (const char* env = std::getenv(kOutDirEnv); env && *env) {
        cli.out_dir = env;
      } else {
        cli.out_dir = "noisyerm-out";
      }
    }
    if (cli.threads && *cli.threads < 1) throw ConfigError("--threads must be >= 1");

    TypedConfig cfg = cli.config_path ? parse_config_file(cli.subcommand, *cli.config_path)
                                      : parse_config(cli.subcommand, json::object());
    if (cli.seed) override_seed(cfg, *cli.seed);
    const json resolved = resolved_json(cfg);
    const int workers = cli.threads.value_or(1);

    const auto start = std::chrono::steady_clock::now();
    RunOutput result;
    try {
      result = std::visit([&](const auto& c) { return run(c, workers); }, cfg);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    result.reports.add_text("config.resolved", resolved.dump(2) + "\n");
    json manifest{{"tool", "noisyerm"},
                  {"version", NOISYERM_VERSION},
                  {"subcommand", to_string(cli.subcommand)},
                  {"master_seed", resolved["master_seed"]},
                  {"threads", workers},
                  {"wall_time_seconds", wall},
                  {"files", result.reports.names()},
                  {"libraries",
                   {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
                    {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                    {"cli11", CLI11_VERSION}}},
                  {"compiler", __VERSION__}};
    if (resolved.contains("solver")) manifest["solver"] = resolved["solver"];
    manifest["files"].push_back("manifest.json");
    result.reports.add_text("manifest.json", manifest.dump(2) + "\n");

    try {
      emit_reports(result.reports, cli.out_dir);
    } catch (const EmptyTableError&) {
      throw;
    } catch (const std::exception& e) {
      error_line(err, "output", 2, std::string("cannot write reports to '") + cli.out_dir.string() + "': " + e.what());
      return 2;
    }

    if (result.failure) {
      error_line(err, "numerical", 3, *result.failure);
      return 3;
    }
    out << json{{"status", "ok"},
                {"subcommand", to_string(cli.subcommand)},
                {"out_dir", cli.out_dir.string()},
                {"files", result.reports.names()},
                {"summary", result.summary}}
               .dump()
        << std::endl;
    return 0;
  } catch (const ConfigError& e) {
    error_line(err, "config", 2, e.what());
    return 2;
  } catch (const EmptyTableError& e) {
    error_line(err, "empty-table", 1, e.what());
    return 1;
  } catch (const std::runtime_error& e) {
    error_line(err, "numerical", 3, e.what());
    return 3;
  } catch (const std::exception& e) {
    error_line(err, "internal", 1, e.what());
    return 1;
  }
}

}  // namespace noisyerm
