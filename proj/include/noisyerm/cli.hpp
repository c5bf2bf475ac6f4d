#pragma once

#include "noisyerm/experiment.hpp"
#include "noisyerm/theory_checks.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace noisyerm {

enum class Subcommand {
  run_experiment,
  check_identity,
  check_sandwich,
  check_shrinkage,
  theorem_sweep,
  conc_estimate,
  certify,
};

std::string_view to_string(Subcommand s);
/// Throws ConfigError on an unknown name.
Subcommand subcommand_by_name(std::string_view name);
std::vector<Subcommand> all_subcommands();

/// Raised for anything the user can fix in the config or flags (exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IdentityParams {
  Index n = 200;
  int d = 10;
  double w_norm = 1.0;
  std::vector<double> rhos{0.05, 0.2, 0.4};
  int resamples = 20000;
  std::string loss = "logistic";
  std::uint64_t master_seed = 20190101;
};

struct SandwichParams {
  int d = 10;
  std::string model = "gaussian";
  std::vector<double> norms{0.0, 0.5, 1.0, 5.0, 20.0, 100.0};
  int directions = 50;
  Index mc_samples = 100000;
  int certificate_directions = 100;
  Index certificate_mc_samples = 100000;
  std::string loss = "logistic";
  std::uint64_t master_seed = 20190101;
};

struct ShrinkageParams {
  int d = 50;
  std::vector<double> rhos{0.02, 0.05, 0.1, 0.2};
  Index saa_samples = 100000;
  Index mc_samples = 100000;
  std::string loss = "logistic";
  std::uint64_t master_seed = 20190101;
  SolveConfig solver;
};

struct SweepParams {
  int d = 50;
  std::vector<Index> n_values{400, 2000};
  std::vector<double> rho_grid = default_rho_grid();
  int trials = 20;
  Index mc_test_samples = 100000;
  Index saa_samples = 100000;
  std::string loss = "logistic";
  std::uint64_t master_seed = 20190101;
  SolveConfig solver;
};

struct ConcParams {
  std::vector<std::string> quantities{"conc1-margin", "conc2-expsum", "conc3-sup-gap"};
  int d = 5;
  std::string model = "cubic-logit";
  ConcConfig conc;
  std::string loss = "logistic";
  std::uint64_t master_seed = 20190101;
};

struct CertifyParams {
  int d = 10;
  std::string model = "gaussian";
  int directions = 100;
  Index mc_samples = 100000;
  std::vector<std::string> losses{"logistic", "hinge"};
  std::uint64_t master_seed = 20190101;
};

using TypedConfig =
    std::variant<ExperimentConfig, IdentityParams, SandwichParams, ShrinkageParams, SweepParams, ConcParams, CertifyParams>;

/// Strict schema check: unknown keys and wrong types raise ConfigError
/// naming the key. Absent keys take the defaults above.
TypedConfig parse_config(Subcommand sub, const nlohmann::json& doc);
/// Reads a JSON file; a missing or unparsable file raises ConfigError.
TypedConfig parse_config_file(Subcommand sub, const std::filesystem::path& path);
/// Every key with its resolved value; parse_config accepts it unchanged.
nlohmann::json resolved_json(const TypedConfig& cfg);
void override_seed(TypedConfig& cfg, std::uint64_t seed);

struct CliConfig {
  Subcommand subcommand = Subcommand::run_experiment;
  std::optional<std::filesystem::path> config_path;
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "NOISYERM_OUT_DIR";

/// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
/// 1 any other failure. Errors are reported as one JSON line on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace noisyerm
