#include "noisyerm/cli.hpp"
#include "noisyerm/reports.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace noisyerm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("noisyerm_test_cli_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun invoke(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"noisyerm"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_json(const fs::path& dir, const std::string& name, const json& doc) {
  const fs::path p = dir / name;
  std::ofstream(p) << doc.dump();
  return p;
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

const json kTinyExperiment = {{"d", 5},           {"n_values", {40, 120}}, {"rho_grid", {0.0, 0.1, 0.2}},
                              {"trials", 3},      {"mc_test_samples", 2000}, {"saa_samples", 10000},
                              {"master_seed", 11}};

}  // namespace

TEST_CASE("an empty run-experiment config resolves to the documented defaults") {
  const auto cfg = std::get<ExperimentConfig>(parse_config(Subcommand::run_experiment, json::object()));
  CHECK(cfg.d == 50);
  CHECK(cfg.n_values == std::vector<Index>{400, 2000});
  REQUIRE(cfg.rho_grid.size() == 21);
  CHECK(cfg.rho_grid.front() == 0.0);
  CHECK(cfg.rho_grid.back() == doctest::Approx(0.2));
  CHECK(cfg.trials == 100);
  CHECK(cfg.loss == "logistic");
}

TEST_CASE("rho at one half is rejected with the admissible range named") {
  for (const json& doc : {json{{"rho", 0.5}}, json{{"rho_grid", {0.1, 0.5}}}}) {
    try {
      parse_config(Subcommand::run_experiment, doc);
      FAIL("accepted rho = 0.5");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("[0, 1/2)") != std::string::npos);
    }
  }
  CHECK_THROWS_AS(parse_config(Subcommand::conc_estimate, json{{"rho", 0.5}}), ConfigError);
  CHECK_THROWS_AS(parse_config(Subcommand::run_experiment, json{{"rho", 0.1}, {"rho_grid", {0.1}}}), ConfigError);
}

TEST_CASE("unknown and mistyped keys are named") {
  try {
    parse_config(Subcommand::run_experiment, json{{"learning_rate_sched", "cosine"}});
    FAIL("accepted an unknown key");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("learning_rate_sched") != std::string::npos);
  }
  try {
    parse_config(Subcommand::run_experiment, json{{"trials", "many"}});
    FAIL("accepted a string for trials");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("trials") != std::string::npos);
    CHECK(msg.find("integer") != std::string::npos);
  }
  try {
    parse_config(Subcommand::check_shrinkage, json{{"solver", {{"tolerance", 1e-9}}}});
    FAIL("accepted an unknown solver key");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("solver.tolerance") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config(Subcommand::certify, json::array()), ConfigError);
  CHECK_THROWS_AS(parse_config_file(Subcommand::certify, "/nonexistent/noisyerm.json"), ConfigError);
}

TEST_CASE("every subcommand accepts an empty config and round-trips its resolved form") {
  for (Subcommand s : all_subcommands()) {
    CAPTURE(to_string(s));
    CHECK(subcommand_by_name(to_string(s)) == s);
    const TypedConfig cfg = parse_config(s, json::object());
    const json resolved = resolved_json(cfg);
    CHECK(resolved_json(parse_config(s, resolved)) == resolved);
    TypedConfig seeded = cfg;
    override_seed(seeded, 99);
    CHECK(resolved_json(seeded)["master_seed"] == 99);
  }
  CHECK_THROWS_AS(subcommand_by_name("fit"), ConfigError);
}

TEST_CASE("run-experiment writes the declared files and the summary header") {
  TempDir tmp("layout");
  const fs::path cfg = write_json(tmp.path, "cfg.json", kTinyExperiment);
  const CliRun r = invoke({"run-experiment", "--config", cfg.string(), "--out", (tmp.path / "out").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const json ok = json::parse(r.out);
  CHECK(ok["status"] == "ok");
  for (const char* f : {"results.csv", "summary.csv", "population.csv", "figure1.svg", "config.resolved", "manifest.json"})
    CHECK_MESSAGE(fs::exists(tmp.path / "out" / f), f);
  CHECK(first_line(slurp(tmp.path / "out" / "summary.csv")) == "n,rho,mean_risk,se,diverged_count");
  const json manifest = json::parse(slurp(tmp.path / "out" / "manifest.json"));
  CHECK(manifest["master_seed"] == 11);
  CHECK(manifest.contains("wall_time_seconds"));
  CHECK(manifest.contains("version"));
  const std::string svg = slurp(tmp.path / "out" / "figure1.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("corruption level") != std::string::npos);
  CHECK(svg.find("test risk") != std::string::npos);
}

TEST_CASE("reruns are byte-identical across thread counts and from config.resolved") {
  TempDir tmp("determinism");
  const fs::path cfg = write_json(tmp.path, "cfg.json", kTinyExperiment);
  const fs::path a = tmp.path / "a", b = tmp.path / "b", c = tmp.path / "c";
  REQUIRE(invoke({"run-experiment", "--config", cfg.string(), "--out", a.string()}).code == 0);
  REQUIRE(invoke({"run-experiment", "--config", cfg.string(), "--out", b.string(), "--threads", "3"}).code == 0);
  REQUIRE(invoke({"run-experiment", "--config", (a / "config.resolved").string(), "--out", c.string()}).code == 0);
  for (const char* f : {"results.csv", "summary.csv", "population.csv", "figure1.svg", "config.resolved"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK(slurp(a / f) == slurp(c / f));
  }
}

TEST_CASE("the seed flag overrides the config") {
  TempDir tmp("seed");
  const fs::path cfg = write_json(tmp.path, "cfg.json", kTinyExperiment);
  REQUIRE(invoke({"run-experiment", "--config", cfg.string(), "--out", (tmp.path / "a").string(), "--seed", "5"})
              .code == 0);
  const json resolved = json::parse(slurp(tmp.path / "a" / "config.resolved"));
  CHECK(resolved["master_seed"] == 5);
}

TEST_CASE("an empty table aborts with no partial files") {
  TempDir tmp("empty");
  const fs::path cfg = write_json(tmp.path, "cfg.json", json{{"losses", json::array()}, {"mc_samples", 10000}});
  const fs::path out = tmp.path / "out";
  const CliRun r = invoke({"certify", "--config", cfg.string(), "--out", out.string()});
  CHECK(r.code != 0);
  const json line = json::parse(r.err);
  CHECK(line["status"] == "error");
  CHECK(line["kind"] == "empty-table");
  CHECK((!fs::exists(out) || fs::is_empty(out)));

  ReportSet set;
  set.add_text("notes.txt", "x\n");
  set.add_table("t.csv", Table{{"a"}, {}});
  CHECK_THROWS_AS(emit_reports(set, out), EmptyTableError);
  CHECK((!fs::exists(out) || fs::is_empty(out)));
}

TEST_CASE("exit codes and machine-readable error lines") {
  TempDir tmp("codes");
  const fs::path bad = write_json(tmp.path, "bad.json", json{{"rho", 0.5}});
  CliRun r = invoke({"run-experiment", "--config", bad.string(), "--out", (tmp.path / "o").string()});
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["kind"] == "config");
  CHECK(json::parse(r.err)["exit_code"] == 2);

  r = invoke({"run-experiment", "--config", (tmp.path / "missing.json").string()});
  CHECK(r.code == 2);

  r = invoke({"no-such-subcommand"});
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["kind"] == "usage");

  r = invoke({"check-identity", "--threads", "0"});
  CHECK(r.code == 2);

  std::ofstream(tmp.path / "afile") << "x";
  const fs::path small = write_json(tmp.path, "small.json", json{{"resamples", 50}});
  r = invoke({"check-identity", "--config", small.string(), "--out", (tmp.path / "afile" / "sub").string()});
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["kind"] == "output");

  r = invoke({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("check-sandwich") != std::string::npos);
}

TEST_CASE("the out-dir environment variable is a default the flag overrides") {
  TempDir tmp("env");
  const fs::path small = write_json(tmp.path, "small.json", json{{"resamples", 50}});
  const fs::path env_dir = tmp.path / "from_env";
  ::setenv(kOutDirEnv, env_dir.c_str(), 1);
  CHECK(invoke({"check-identity", "--config", small.string()}).code == 0);
  CHECK(fs::exists(env_dir / "identity.csv"));
  const fs::path flag_dir = tmp.path / "from_flag";
  CHECK(invoke({"check-identity", "--config", small.string(), "--out", flag_dir.string()}).code == 0);
  CHECK(fs::exists(flag_dir / "identity.csv"));
  ::unsetenv(kOutDirEnv);
}
