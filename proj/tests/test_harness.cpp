#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bsde/errors.hpp"
#include "bsde/harness.hpp"

using namespace bsde;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("bsde_test_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config parsing") {
  SECTION("typed accessors and lists") {
    const ExperimentConfig cfg = ExperimentConfig::parse_text(
        "# a comment\n"
        "model.name = standard-brownian\n"
        "grid.N = 8, 16, 32\n"
        "grid.beta = 0.5\n"
        "mc.seed = 42\n");
    CHECK(cfg.get_string("model.name") == "standard-brownian");
    CHECK(cfg.get_double("grid.beta") == 0.5);
    CHECK(cfg.get_u64("mc.seed") == 42);
    CHECK(cfg.get_int_list("grid.N") == std::vector<int>{8, 16, 32});
    CHECK(cfg.get_double("missing.key", 7.0) == 7.0);
  }
  SECTION("unknown keys are rejected with the line number") {
    try {
      ExperimentConfig::parse_text("grid.beta = 0.5\nnot.a.key = 1\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.line() == 2);
    }
  }
  SECTION("duplicate keys and malformed lines") {
    CHECK_THROWS_AS(ExperimentConfig::parse_text("grid.beta = 0.5\ngrid.beta = 0.6\n"),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse_text("grid.beta love 0.5\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse_text("grid.beta = zero point five\n"),
                    ConfigError);
  }
  SECTION("hash is stable under reordering") {
    const ExperimentConfig a =
        ExperimentConfig::parse_text("grid.beta = 0.5\nmc.seed = 1\n");
    const ExperimentConfig b =
        ExperimentConfig::parse_text("mc.seed = 1\ngrid.beta = 0.5\n");
    CHECK(a.hash() == b.hash());
  }
}

TEST_CASE("verify-grid command") {
  TempDir dir("verify_grid");
  SECTION("default sweep passes") {
    const ExperimentConfig cfg = ExperimentConfig::parse_text(
        "sweep.N_list = 4, 16, 64\nmc.seed = 1\n");
    CHECK(cmd_verify_grid(cfg, dir.path.string()) == 0);
    const std::string csv = slurp(dir.path / "grid_bounds.csv");
    CHECK(csv.rfind("# config_hash=", 0) == 0);
    CHECK(csv.find("# seed=1") != std::string::npos);
    CHECK(csv.find("# version=") != std::string::npos);
    CHECK(csv.find("beta,theta,N,lhs,rhs,margin,holds") != std::string::npos);
    CHECK(csv.find(",0\n") == std::string::npos);  // no failing rows
  }
  SECTION("out-of-range beta in the config is a parse error") {
    const ExperimentConfig cfg =
        ExperimentConfig::parse_text("grid.beta = 1.5\nmc.seed = 1\n");
    CHECK_THROWS_AS(cmd_verify_grid(cfg, dir.path.string()), ConfigError);
  }
  SECTION("smallest sweep writes one row per theta") {
    const ExperimentConfig cfg = ExperimentConfig::parse_text(
        "sweep.N_list = 4\nsweep.beta_list = 0.5\nsweep.theta_list = 0.25, 0.5, 0.75, 1.0\n"
        "mc.seed = 1\n");
    CHECK(cmd_verify_grid(cfg, dir.path.string()) == 0);
    const std::string csv = slurp(dir.path / "grid_bounds.csv");
    int rows = 0;
    for (char c : csv)
      if (c == '\n') ++rows;
    CHECK(rows == 3 + 1 + 4);  // header block + column header + 4 checks
  }
}

TEST_CASE("convergence command produces deterministic reports") {
  TempDir dir1("conv_a");
  TempDir dir2("conv_b");
  const ExperimentConfig cfg = ExperimentConfig::parse_text(
      "model.name = standard-brownian\n"
      "model.vol = 1.0\n"
      "terminal.name = capped-call\n"
      "terminal.strike = 0.0\n"
      "terminal.cap = 2.0\n"
      "driver.name = zero\n"
      "scheme = euler\n"
      "backend.kind = quad\n"
      "backend.grid_points = 1024\n"
      "grid.T = 1.0\n"
      "grid.beta = 0.9\n"
      "grid.N = 4, 8, 16\n"
      "mc.M = 4000\n"
      "mc.seed = 42\n");
  CHECK(cmd_convergence(cfg, dir1.path.string()) == 0);
  CHECK(cmd_convergence(cfg, dir2.path.string()) == 0);
  CHECK(slurp(dir1.path / "reports.csv") == slurp(dir2.path / "reports.csv"));
  CHECK(slurp(dir1.path / "rate_fit.json") == slurp(dir2.path / "rate_fit.json"));
  CHECK(!slurp(dir1.path / "summary.json").empty());
  SECTION("report command merges summaries") {
    CHECK(cmd_report(dir1.path.string()) == 0);
    const std::string table = slurp(dir1.path / "report.csv");
    CHECK(table.find("fitted_slope") != std::string::npos);
    CHECK(table.find("euler") != std::string::npos);
  }
}

TEST_CASE("convergence flags exact cases as degenerate floor") {
  TempDir dir("conv_floor");
  const ExperimentConfig cfg = ExperimentConfig::parse_text(
      "model.name = standard-brownian\n"
      "terminal.name = identity\n"
      "driver.name = zero\n"
      "scheme = euler\n"
      "backend.kind = quad\n"
      "backend.grid_points = 1024\n"
      "grid.T = 1.0\n"
      "grid.N = 4, 8, 16\n"
      "mc.M = 2000\n"
      "mc.seed = 9\n");
  CHECK(cmd_convergence(cfg, dir.path.string()) == 0);
  const std::string js = slurp(dir.path / "summary.json");
  CHECK(js.find("\"degenerate_floor\": true") != std::string::npos);
}

TEST_CASE("probe and smoothness commands") {
  TempDir dir("probe");
  const ExperimentConfig cfg = ExperimentConfig::parse_text(
      "model.name = standard-brownian\n"
      "terminal.name = identity\n"
      "driver.name = zero\n"
      "grid.T = 1.0\n"
      "grid.N = 64\n"
      "mc.M = 20000\n"
      "mc.seed = 7\n");
  CHECK(cmd_probe_representation(cfg, dir.path.string()) == 0);
  const std::string js = slurp(dir.path / "representation_probe.json");
  CHECK(js.find("z_score") != std::string::npos);
  CHECK(js.find("config_hash") != std::string::npos);

  SECTION("tiny sample still yields a well-defined report") {
    const ExperimentConfig tiny = ExperimentConfig::parse_text(
        "model.name = standard-brownian\n"
        "terminal.name = identity\n"
        "driver.name = zero\n"
        "grid.T = 1.0\n"
        "grid.N = 64\n"
        "mc.M = 10\n"
        "mc.seed = 7\n");
    CHECK(cmd_probe_representation(tiny, dir.path.string()) == 0);
    std::ifstream is(dir.path / "representation_probe.json");
    nlohmann::json j;
    is >> j;
    CHECK(j["stderr"].get<double>() > 0.05);  // wide, but finite and reported
    CHECK(std::isfinite(j["estimate"].get<double>()));
  }

  const ExperimentConfig scfg = ExperimentConfig::parse_text(
      "model.name = standard-brownian\n"
      "terminal.name = identity\n"
      "grid.T = 1.0\n"
      "mc.M = 20000\n"
      "mc.seed = 7\n");
  CHECK(cmd_smoothness(scfg, dir.path.string()) == 0);
  CHECK(slurp(dir.path / "smoothness.json").find("alpha_hat") != std::string::npos);
}

TEST_CASE("solve and simulate commands") {
  TempDir dir("solve");
  const ExperimentConfig cfg = ExperimentConfig::parse_text(
      "model.name = standard-brownian\n"
      "terminal.name = identity\n"
      "driver.name = zero\n"
      "scheme = euler\n"
      "backend.kind = quad\n"
      "backend.grid_points = 1024\n"
      "grid.T = 1.0\n"
      "grid.N = 8\n"
      "mc.M = 1000\n"
      "mc.seed = 5\n");
  CHECK(cmd_solve(cfg, dir.path.string()) == 0);
  const std::string csv = slurp(dir.path / "solution.csv");
  CHECK(csv.find("index,t,mean_y,mean_z,y_at_x0,z_at_x0") != std::string::npos);
  CHECK(cmd_simulate(cfg, dir.path.string()) == 0);
  CHECK(fs::exists(dir.path / "batch.bin"));
  const std::string sim = slurp(dir.path / "simulate_summary.csv");
  CHECK(sim.find("dw_mean") != std::string::npos);
}
