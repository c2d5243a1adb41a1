#pragma once

#include <cctype>
#include <climits>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mkflow/errors.hpp"
#include "mkflow/io.hpp"
#include "mkflow/scenarios.hpp"

namespace mkflow {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline double parse_double(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw ConfigError("[config] key '" + key + "': cannot parse '" + value + "' as a number");
  }
  return v;
}

inline int parse_int(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const long v = std::strtol(begin, &end, 10);
  if (end == begin || *end != '\0' || v < INT_MIN || v > INT_MAX) {
    throw ConfigError("[config] key '" + key + "': cannot parse '" + value + "' as an integer");
  }
  return static_cast<int>(v);
}

}  // namespace detail

// `key = value` lines with `#` comments; duplicate or unknown keys are
// errors so typos fail loudly before a long run.
inline std::map<std::string, std::string> parse_flat_config(std::string_view text) {
  std::map<std::string, std::string> entries;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("[config] line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key(detail::trim(line.substr(0, eq)));
    std::string value(detail::trim(line.substr(eq + 1)));
    if (key.empty() || value.empty()) {
      throw ConfigError("[config] line " + std::to_string(line_no) + ": empty key or value");
    }
    if (!entries.emplace(key, value).second) {
      throw ConfigError("[config] duplicate key '" + key + "'");
    }
  }
  return entries;
}

struct RunConfig {
  std::string scenario;  // "maze" or "ot"
  int resolution = 64;
  std::string mask_path;          // maze only
  std::optional<double> k_e;      // ot only; absent = homogeneous
  InitialCondition ic = InitialCondition::Uniform;
  OtGeometry geometry;
  std::optional<double> dt0;      // schedule overrides; scenario default otherwise
  std::optional<double> dt_growth;
  std::optional<double> dt_cap;
  double tau = 5e-9;
  int max_steps = 50000;
  std::vector<double> snapshot_vars{0.1, 0.01, 5e-9};
  std::string output_dir;
  double solver_tol = 1e-10;
  int solver_max_iter = 0;  // 0 = ten times the fine node count
};

inline RunConfig parse_run_config(std::string_view text) {
  auto entries = parse_flat_config(text);
  const auto take = [&](const char* key) -> std::optional<std::string> {
    auto it = entries.find(key);
    if (it == entries.end()) return std::nullopt;
    std::string v = it->second;
    entries.erase(it);
    return v;
  };

  RunConfig cfg;
  if (auto v = take("scenario")) {
    cfg.scenario = *v;
  } else {
    throw ConfigError("[config] missing required key 'scenario' (maze or ot)");
  }
  if (cfg.scenario != "maze" && cfg.scenario != "ot") {
    throw ConfigError("[config] scenario must be 'maze' or 'ot', got '" + cfg.scenario + "'");
  }

  if (auto v = take("resolution")) cfg.resolution = detail::parse_int("resolution", *v);
  if (cfg.resolution < 2) throw ConfigError("[config] resolution must be at least 2");

  if (auto v = take("mask")) cfg.mask_path = *v;
  if (cfg.scenario == "maze" && cfg.mask_path.empty()) {
    throw ConfigError("[config] maze scenario requires 'mask = <path>'");
  }
  if (cfg.scenario != "maze" && !cfg.mask_path.empty()) {
    throw ConfigError("[config] 'mask' only applies to the maze scenario");
  }

  if (cfg.scenario == "maze" && (entries.count("k_e") || entries.count("ic"))) {
    throw ConfigError("[config] 'k_e' and 'ic' only apply to the ot scenario");
  }
  if (auto v = take("k_e")) {
    cfg.k_e = detail::parse_double("k_e", *v);
    if (!(*cfg.k_e > 0.0)) throw ConfigError("[config] k_e must be positive");
  }
  if (auto v = take("ic")) {
    if (*v == "uniform") {
      cfg.ic = InitialCondition::Uniform;
    } else if (*v == "radial") {
      cfg.ic = InitialCondition::Radial;
    } else if (*v == "sinusoidal") {
      cfg.ic = InitialCondition::Sinusoidal;
    } else {
      throw ConfigError("[config] ic must be uniform, radial, or sinusoidal");
    }
  }

  const auto geom_double = [&](const char* key, double& slot, bool positive) {
    if (auto v = take(key)) {
      slot = detail::parse_double(key, *v);
      if (positive && !(slot > 0.0)) {
        throw ConfigError(std::string("[config] ") + key + " must be positive");
      }
    }
  };
  geom_double("source_center_x", cfg.geometry.source_center.x, false);
  geom_double("source_center_y", cfg.geometry.source_center.y, false);
  geom_double("source_radius", cfg.geometry.source_radius, true);
  geom_double("sink_center_x", cfg.geometry.sink_center.x, false);
  geom_double("sink_center_y", cfg.geometry.sink_center.y, false);
  geom_double("sink_semi_axis_x", cfg.geometry.sink_semi_axes.x, true);
  geom_double("sink_semi_axis_y", cfg.geometry.sink_semi_axes.y, true);
  geom_double("k_center_x", cfg.geometry.k_center.x, false);
  geom_double("k_center_y", cfg.geometry.k_center.y, false);
  geom_double("k_semi_axis_x", cfg.geometry.k_semi_axes.x, true);
  geom_double("k_semi_axis_y", cfg.geometry.k_semi_axes.y, true);
  if (auto v = take("k_angle_deg")) {
    cfg.geometry.k_angle = detail::parse_double("k_angle_deg", *v) * std::numbers::pi / 180.0;
  }

  if (auto v = take("dt0")) {
    cfg.dt0 = detail::parse_double("dt0", *v);
    if (!(*cfg.dt0 > 0.0)) throw ConfigError("[config] dt0 must be positive");
  }
  if (auto v = take("dt_growth")) {
    cfg.dt_growth = detail::parse_double("dt_growth", *v);
    if (!(*cfg.dt_growth >= 1.0)) throw ConfigError("[config] dt_growth must be at least 1");
  }
  if (auto v = take("dt_cap")) {
    cfg.dt_cap = detail::parse_double("dt_cap", *v);
    if (!(*cfg.dt_cap > 0.0)) throw ConfigError("[config] dt_cap must be positive");
  }
  if (auto v = take("tau")) {
    cfg.tau = detail::parse_double("tau", *v);
    if (!(cfg.tau > 0.0)) throw ConfigError("[config] tau must be positive");
  }
  if (auto v = take("max_steps")) {
    cfg.max_steps = detail::parse_int("max_steps", *v);
    if (cfg.max_steps < 1) throw ConfigError("[config] max_steps must be at least 1");
  }
  if (auto v = take("snapshot_vars")) {
    cfg.snapshot_vars.clear();
    std::string item;
    for (std::size_t i = 0; i <= v->size(); ++i) {
      if (i == v->size() || (*v)[i] == ',') {
        const std::string_view sv = detail::trim(item);
        if (!sv.empty()) {
          cfg.snapshot_vars.push_back(detail::parse_double("snapshot_vars", std::string(sv)));
          if (!(cfg.snapshot_vars.back() > 0.0)) {
            throw ConfigError("[config] snapshot_vars entries must be positive");
          }
        }
        item.clear();
      } else {
        item.push_back((*v)[i]);
      }
    }
  }
  if (auto v = take("output_dir")) cfg.output_dir = *v;
  if (cfg.output_dir.empty()) cfg.output_dir = "out/" + cfg.scenario;
  if (auto v = take("solver_tol")) {
    cfg.solver_tol = detail::parse_double("solver_tol", *v);
    if (!(cfg.solver_tol > 0.0)) throw ConfigError("[config] solver_tol must be positive");
  }
  if (auto v = take("solver_max_iter")) {
    cfg.solver_max_iter = detail::parse_int("solver_max_iter", *v);
    if (cfg.solver_max_iter < 0) {
      throw ConfigError("[config] solver_max_iter must be nonnegative");
    }
  }

  if (!entries.empty()) {
    throw ConfigError("[config] unknown key '" + entries.begin()->first + "'");
  }
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_file(path));
}

}  // namespace mkflow
