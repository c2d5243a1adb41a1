#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "mkflow/config.hpp"
#include "mkflow/errors.hpp"
#include "mkflow/io.hpp"

using namespace mkflow;
using Catch::Approx;
namespace fs = std::filesystem;

TEST_CASE("flat config parsing") {
  const auto entries = parse_flat_config(
      "# comment line\n"
      "a = 1\n"
      "\n"
      "b = two words  # trailing comment\n"
      "  spaced_key   =   value\n");
  REQUIRE(entries.size() == 3);
  REQUIRE(entries.at("a") == "1");
  REQUIRE(entries.at("b") == "two words");
  REQUIRE(entries.at("spaced_key") == "value");

  REQUIRE_THROWS_AS(parse_flat_config("a = 1\na = 2\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_flat_config("just text\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_flat_config("= value\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_flat_config("key =\n"), ConfigError);
}

TEST_CASE("maze run config") {
  const RunConfig cfg = parse_run_config(
      "scenario = maze\n"
      "resolution = 64\n"
      "mask = builtin:maze64\n"
      "max_steps = 1234\n"
      "output_dir = /tmp/maze_run\n");
  REQUIRE(cfg.scenario == "maze");
  REQUIRE(cfg.resolution == 64);
  REQUIRE(cfg.mask_path == "builtin:maze64");
  REQUIRE(cfg.max_steps == 1234);
  REQUIRE(cfg.output_dir == "/tmp/maze_run");
  REQUIRE_FALSE(cfg.k_e.has_value());
  REQUIRE_FALSE(cfg.dt0.has_value());
  REQUIRE(cfg.tau == 5e-9);
  REQUIRE(cfg.solver_tol == 1e-10);
  const std::vector<double> default_vars{0.1, 0.01, 5e-9};
  REQUIRE(cfg.snapshot_vars == default_vars);
}

TEST_CASE("transport run config with geometry overrides") {
  const RunConfig cfg = parse_run_config(
      "scenario = ot\n"
      "resolution = 32\n"
      "k_e = 0.5\n"
      "ic = sinusoidal\n"
      "source_center_x = 0.3\n"
      "source_radius = 0.05\n"
      "sink_semi_axis_y = 0.4\n"
      "k_angle_deg = 90\n"
      "dt0 = 0.02\n"
      "dt_growth = 1.05\n"
      "dt_cap = 0.5\n"
      "tau = 1e-7\n"
      "snapshot_vars = 0.2, 1e-3\n"
      "solver_tol = 1e-8\n"
      "solver_max_iter = 500\n");
  REQUIRE(cfg.scenario == "ot");
  REQUIRE(cfg.resolution == 32);
  REQUIRE(cfg.k_e == 0.5);
  REQUIRE(cfg.ic == InitialCondition::Sinusoidal);
  REQUIRE(cfg.geometry.source_center.x == 0.3);
  REQUIRE(cfg.geometry.source_center.y == 0.5);  // untouched default
  REQUIRE(cfg.geometry.source_radius == 0.05);
  REQUIRE(cfg.geometry.sink_semi_axes.y == 0.4);
  REQUIRE(cfg.geometry.k_angle == Approx(std::numbers::pi / 2.0));
  REQUIRE(cfg.dt0 == 0.02);
  REQUIRE(cfg.dt_growth == 1.05);
  REQUIRE(cfg.dt_cap == 0.5);
  REQUIRE(cfg.tau == 1e-7);
  const std::vector<double> vars{0.2, 1e-3};
  REQUIRE(cfg.snapshot_vars == vars);
  REQUIRE(cfg.solver_tol == 1e-8);
  REQUIRE(cfg.solver_max_iter == 500);
  REQUIRE(cfg.output_dir == "out/ot");  // default from the scenario name
}

TEST_CASE("run config validation errors") {
  REQUIRE_THROWS_AS(parse_run_config("resolution = 8\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_run_config("scenario = banana\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_run_config("scenario = maze\n"), ConfigError);  // no mask
  REQUIRE_THROWS_AS(parse_run_config("scenario = ot\nmask = m.txt\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_run_config("scenario = maze\nmask = m\nk_e = 2\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_run_config("scenario = maze\nmask = m\nic = radial\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_run_config("scenario = ot\nresolution = 1\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_run_config("scenario = ot\nk_e = 0\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_run_config("scenario = ot\nic = diagonal\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_run_config("scenario = ot\nresolution = twelve\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_run_config("scenario = ot\ndt0 = -0.1\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_run_config("scenario = ot\ndt_growth = 0.9\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_run_config("scenario = ot\ntau = 0\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_run_config("scenario = ot\nmax_steps = 0\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_run_config("scenario = ot\nsnapshot_vars = 0.1, -1\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_run_config("scenario = ot\nsource_radius = 0\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_run_config("scenario = ot\nsolver_tol = 0\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_run_config("scenario = ot\nsolver_max_iter = -1\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_run_config("scenario = ot\nmystery = 1\n"), ConfigError);
}

TEST_CASE("run config loads from disk") {
  const fs::path dir = fs::temp_directory_path() / "mkflow_test_config";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_file_atomic(dir / "run.cfg", "scenario = ot\nresolution = 16\n");
  const RunConfig cfg = load_run_config(dir / "run.cfg");
  REQUIRE(cfg.scenario == "ot");
  REQUIRE(cfg.resolution == 16);
  REQUIRE_THROWS_AS(load_run_config(dir / "missing.cfg"), IoError);
}