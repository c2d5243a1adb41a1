#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mkflow/dynamics.hpp"
#include "mkflow/errors.hpp"
#include "mkflow/fem.hpp"
#include "mkflow/mesh.hpp"
#include "mkflow/schedule.hpp"

namespace mkflow {

// Rectangular raster describing maze geometry. Row 0 is the top row of the
// text file; cell(ix, iy) follows mesh convention with iy = 0 at the bottom.
class GridMask {
 public:
  enum class Cell : char { Path = '.', Wall = '#', Source = 'S', Sink = 'T' };

  GridMask(int width, int height, std::vector<Cell> cells)
      : width_(width), height_(height), cells_(std::move(cells)) {
    if (width_ < 1 || height_ < 1 ||
        cells_.size() != static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_)) {
      throw ContractError("[scenarios] mask dimensions do not match cell data");
    }
  }

  static GridMask parse(std::string_view text) {
    std::vector<Cell> cells;
    std::vector<std::size_t> row_starts;
    int width = -1, height = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t eol = text.find('\n', pos);
      if (eol == std::string_view::npos) eol = text.size();
      std::string_view line = text.substr(pos, eol - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      pos = eol + 1;
      if (line.empty()) continue;
      if (width < 0) {
        width = static_cast<int>(line.size());
      } else if (static_cast<int>(line.size()) != width) {
        throw IoError("[scenarios] mask rows have unequal lengths");
      }
      for (char c : line) {
        switch (c) {
          case '.': cells.push_back(Cell::Path); break;
          case '#': cells.push_back(Cell::Wall); break;
          case 'S': cells.push_back(Cell::Source); break;
          case 'T': cells.push_back(Cell::Sink); break;
          default:
            throw IoError(std::string("[scenarios] unknown mask character '") + c + "'");
        }
      }
      ++height;
    }
    if (width <= 0 || height <= 0) throw IoError("[scenarios] empty mask");
    return GridMask(width, height, std::move(cells));
  }

  int width() const { return width_; }
  int height() const { return height_; }

  Cell cell(int ix, int iy) const {
    if (ix < 0 || ix >= width_ || iy < 0 || iy >= height_) {
      throw ContractError("[scenarios] mask cell out of range");
    }
    const int row = height_ - 1 - iy;
    return cells_[static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
                  static_cast<std::size_t>(ix)];
  }

  bool wall(int ix, int iy) const { return cell(ix, iy) == Cell::Wall; }

  int count(Cell kind) const {
    int n = 0;
    for (Cell c : cells_) n += (c == kind) ? 1 : 0;
    return n;
  }

 private:
  int width_;
  int height_;
  std::vector<Cell> cells_;
};

// Rescales the negative part so positive and negative masses cancel.
inline std::vector<double> balance_source(std::vector<double> f,
                                          std::span<const double> areas) {
  if (f.size() != areas.size()) {
    throw ContractError("[scenarios] source and area sizes disagree");
  }
  double pos = 0.0, neg = 0.0;
  for (std::size_t s = 0; s < f.size(); ++s) {
    if (f[s] > 0.0) pos += f[s] * areas[s];
    if (f[s] < 0.0) neg -= f[s] * areas[s];
  }
  if (!(pos > 0.0) || !(neg > 0.0)) {
    throw ContractError("[scenarios] source needs both positive and negative parts");
  }
  const double scale = pos / neg;
  for (double& v : f) {
    if (v < 0.0) v *= scale;
  }
  return f;
}

// One experiment, fully assembled: geometry, coefficients, forcing, initial
// state, and stopping parameters.
struct Scenario {
  MeshPair pair;
  ResistanceField k;
  std::vector<double> f;
  DensityField mu0;
  StepSchedule schedule;
  double tau = 5e-9;
  std::string name;

  void validate() const {
    const int cells = pair.coarse.triangle_count();
    k.validate(cells);
    if (static_cast<int>(f.size()) != cells || static_cast<int>(mu0.values.size()) != cells) {
      throw ContractError("[scenarios] field sizes do not match the coarse mesh");
    }
    double sum = 0.0, mass = 0.0;
    for (int s = 0; s < cells; ++s) {
      sum += f[static_cast<std::size_t>(s)] * pair.coarse.triangle_area(s);
      mass += std::abs(f[static_cast<std::size_t>(s)]) * pair.coarse.triangle_area(s);
    }
    if (mass > 0.0 && std::abs(sum) > 1e-12 * mass) {
      throw ContractError("[scenarios] scenario source is not balanced");
    }
    for (double v : mu0.values) {
      if (!(v >= kMuFloor)) {
        throw ContractError("[scenarios] initial density below the floor");
      }
    }
    schedule.validate();
  }

  LoadVector load() const { return assemble_load(pair, f); }
};

// Walls resist (k = 1000) and start empty; corridors conduct (k = 1) and
// start at density one. Food sources sit on the S and T regions.
inline Scenario maze_scenario(const GridMask& mask, int resolution) {
  if (mask.width() != resolution || mask.height() != resolution) {
    throw ContractError("[scenarios] mask dimensions do not match the mesh resolution");
  }
  if (mask.count(GridMask::Cell::Source) == 0 || mask.count(GridMask::Cell::Sink) == 0) {
    throw ContractError("[scenarios] maze mask needs both a source and a sink region");
  }

  Scenario sc;
  sc.pair = refine_uniform(structured_rect_mesh(resolution, resolution));
  const int cells = sc.pair.coarse.triangle_count();
  sc.k.values.assign(static_cast<std::size_t>(cells), 1.0);
  sc.mu0.values.assign(static_cast<std::size_t>(cells), 1.0);
  sc.f.assign(static_cast<std::size_t>(cells), 0.0);
  for (int t = 0; t < cells; ++t) {
    const int cell = t / 2;
    const int ix = cell % resolution;
    const int iy = cell / resolution;
    switch (mask.cell(ix, iy)) {
      case GridMask::Cell::Wall:
        sc.k.values[static_cast<std::size_t>(t)] = 1000.0;
        sc.mu0.values[static_cast<std::size_t>(t)] = kMuFloor;
        break;
      case GridMask::Cell::Source:
        sc.f[static_cast<std::size_t>(t)] = 1.0;
        break;
      case GridMask::Cell::Sink:
        sc.f[static_cast<std::size_t>(t)] = -1.0;
        break;
      case GridMask::Cell::Path:
        break;
    }
  }
  sc.f = balance_source(std::move(sc.f), sc.pair.coarse.triangle_areas());
  sc.schedule = StepSchedule{1e-2, 1.01, 0.5};
  sc.tau = 5e-9;
  sc.name = "maze";
  sc.validate();
  return sc;
}

// Forcing and resistance geometry for the transport experiments on the unit
// square. The numbers are conventions of this project, kept in one place so
// configs can override them.
struct OtGeometry {
  Vec2 source_center{0.2, 0.5};
  double source_radius = 0.1;
  Vec2 sink_center{0.7, 0.5};
  Vec2 sink_semi_axes{0.1, 0.2};
  Vec2 k_center{0.45, 0.5};
  Vec2 k_semi_axes{0.25, 0.08};
  double k_angle = std::numbers::pi / 4.0;

  bool in_source(const Vec2& p) const {
    return (p - source_center).norm() <= source_radius;
  }
  bool in_sink(const Vec2& p) const {
    const double x = (p.x - sink_center.x) / sink_semi_axes.x;
    const double y = (p.y - sink_center.y) / sink_semi_axes.y;
    return x * x + y * y <= 1.0;
  }
  bool in_k_ellipse(const Vec2& p) const {
    const double c = std::cos(k_angle), s = std::sin(k_angle);
    const double dx = p.x - k_center.x, dy = p.y - k_center.y;
    const double x = (c * dx + s * dy) / k_semi_axes.x;
    const double y = (-s * dx + c * dy) / k_semi_axes.y;
    return x * x + y * y <= 1.0;
  }
};

enum class InitialCondition { Uniform, Radial, Sinusoidal };

inline const char* to_string(InitialCondition ic) {
  switch (ic) {
    case InitialCondition::Uniform: return "uniform";
    case InitialCondition::Radial: return "radial";
    case InitialCondition::Sinusoidal: return "sinusoidal";
  }
  return "?";
}

inline double initial_density_value(InitialCondition ic, const Vec2& p) {
  switch (ic) {
    case InitialCondition::Uniform:
      return 1.0;
    case InitialCondition::Radial:
      return 0.1 + 4.0 * ((p.x - 0.5) * (p.x - 0.5) + (p.y - 0.5) * (p.y - 0.5));
    case InitialCondition::Sinusoidal:
      return 3.0 + 2.0 * std::sin(8.0 * std::numbers::pi * p.x) *
                       std::sin(8.0 * std::numbers::pi * p.y);
  }
  throw ContractError("[scenarios] unknown initial condition");
}

inline DensityField initial_density(InitialCondition ic, const TriMesh& coarse) {
  DensityField mu;
  mu.values.resize(static_cast<std::size_t>(coarse.triangle_count()));
  for (int t = 0; t < coarse.triangle_count(); ++t) {
    mu.values[static_cast<std::size_t>(t)] = initial_density_value(ic, coarse.centroid(t));
  }
  return mu;
}

// Circle-to-ellipse transport. k_e set: resistance k_e inside the central
// oblique ellipse, 1 elsewhere; k_e unset: k = 1 everywhere. Membership is
// tested at cell centroids.
inline Scenario ot_scenario(std::optional<double> k_e, MeshPair pair, InitialCondition ic,
                            const OtGeometry& geom = {}) {
  if (k_e && !(*k_e > 0.0)) throw ContractError("[scenarios] k_e must be positive");
  for (const Vec2& p : pair.coarse.nodes()) {
    if (p.x < -1e-9 || p.x > 1.0 + 1e-9 || p.y < -1e-9 || p.y > 1.0 + 1e-9) {
      throw ContractError("[scenarios] transport scenarios expect the unit square");
    }
  }

  Scenario sc;
  sc.pair = std::move(pair);
  const int cells = sc.pair.coarse.triangle_count();
  sc.k.values.assign(static_cast<std::size_t>(cells), 1.0);
  sc.f.assign(static_cast<std::size_t>(cells), 0.0);
  int n_source = 0, n_sink = 0;
  for (int t = 0; t < cells; ++t) {
    const Vec2 c = sc.pair.coarse.centroid(t);
    if (geom.in_source(c)) {
      sc.f[static_cast<std::size_t>(t)] = 1.0;
      ++n_source;
    } else if (geom.in_sink(c)) {
      sc.f[static_cast<std::size_t>(t)] = -1.0;
      ++n_sink;
    }
    if (k_e && geom.in_k_ellipse(c)) {
      sc.k.values[static_cast<std::size_t>(t)] = *k_e;
    }
  }
  if (n_source == 0 || n_sink == 0) {
    throw ContractError(
        "[scenarios] mesh too coarse: no cell centroid falls in the source or sink region");
  }
  sc.f = balance_source(std::move(sc.f), sc.pair.coarse.triangle_areas());
  sc.mu0 = initial_density(ic, sc.pair.coarse);
  sc.schedule = StepSchedule{1e-2, 1.01, 0.25};
  sc.tau = 5e-9;
  if (k_e) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "ot_k%g", *k_e);
    sc.name = buf;
  } else {
    sc.name = "ot_homogeneous";
  }
  sc.validate();
  return sc;
}

}  // namespace mkflow
