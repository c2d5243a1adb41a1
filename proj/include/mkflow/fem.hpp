#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mkflow/errors.hpp"
#include "mkflow/mesh.hpp"
#include "mkflow/solver.hpp"
#include "mkflow/sparse.hpp"

namespace mkflow {

// Lower clamp on the transport density; keeps the bilinear form coercive
// while cells effectively vanish.
inline constexpr double kMuFloor = 1e-10;

// Piecewise-constant transport density / conductivity on the coarse mesh.
struct DensityField {
  std::vector<double> values;

  static DensityField uniform(int cells, double value) {
    return DensityField{std::vector<double>(static_cast<std::size_t>(cells), value)};
  }
};

// Piecewise-linear nodal potential on the fine mesh, zero weighted mean.
struct PotentialField {
  std::vector<double> values;
};

// Discrete right-hand side (f, phi_m) on the fine mesh; entries sum to zero
// for a balanced source.
struct LoadVector {
  std::vector<double> values;
};

// Lumped P1 mass weights m_l = sum_t |t|/3 over fine triangles containing l.
inline std::vector<double> lumped_mass(const TriMesh& mesh) {
  std::vector<double> m(static_cast<std::size_t>(mesh.node_count()), 0.0);
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const double w = mesh.triangle_area(t) / 3.0;
    for (int v : mesh.triangle(t)) m[static_cast<std::size_t>(v)] += w;
  }
  return m;
}

// Assembles the mu-weighted P1 stiffness matrix on the fine mesh with the
// coefficient constant per coarse cell. The sparsity pattern and per-triangle
// scatter targets are built once, so repeated assembly along a run only
// rewrites values.
class StiffnessAssembler {
 public:
  explicit StiffnessAssembler(const MeshPair& pair) : cells_(pair.coarse.triangle_count()) {
    const TriMesh& fine = pair.fine;
    const int n = fine.node_count();

    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (int t = 0; t < fine.triangle_count(); ++t) {
      const auto& tri = fine.triangle(t);
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          adj[static_cast<std::size_t>(tri[static_cast<std::size_t>(i)])].push_back(
              tri[static_cast<std::size_t>(j)]);
        }
      }
    }
    a_.n = n;
    a_.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 0; i < n; ++i) {
      auto& nbr = adj[static_cast<std::size_t>(i)];
      std::sort(nbr.begin(), nbr.end());
      nbr.erase(std::unique(nbr.begin(), nbr.end()), nbr.end());
      a_.row_ptr[static_cast<std::size_t>(i) + 1] =
          a_.row_ptr[static_cast<std::size_t>(i)] + static_cast<int>(nbr.size());
    }
    a_.col.reserve(static_cast<std::size_t>(a_.row_ptr[static_cast<std::size_t>(n)]));
    for (int i = 0; i < n; ++i) {
      for (int j : adj[static_cast<std::size_t>(i)]) a_.col.push_back(j);
    }
    a_.val.assign(a_.col.size(), 0.0);

    entries_.reserve(static_cast<std::size_t>(fine.triangle_count()) * 9);
    tri_parent_.resize(static_cast<std::size_t>(fine.triangle_count()));
    for (int t = 0; t < fine.triangle_count(); ++t) {
      const TriangleGeometry g = triangle_geometry(fine, t);
      const auto& tri = fine.triangle(t);
      tri_parent_[static_cast<std::size_t>(t)] = pair.parent[static_cast<std::size_t>(t)];
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          Entry e;
          e.dst = a_.find(tri[static_cast<std::size_t>(i)], tri[static_cast<std::size_t>(j)]);
          e.coeff = g.area * g.grad[static_cast<std::size_t>(i)].dot(
                                 g.grad[static_cast<std::size_t>(j)]);
          entries_.push_back(e);
        }
      }
    }
  }

  const SparseSpd& assemble(const DensityField& mu) {
    if (static_cast<int>(mu.values.size()) != cells_) {
      throw ContractError("[fem] density field size does not match the coarse mesh");
    }
    for (double v : mu.values) {
      if (!(v >= kMuFloor) || !std::isfinite(v)) {
        throw ContractError("[fem] density below the 1e-10 floor (or non-finite)");
      }
    }
    std::fill(a_.val.begin(), a_.val.end(), 0.0);
    std::size_t k = 0;
    for (int parent : tri_parent_) {
      const double m = mu.values[static_cast<std::size_t>(parent)];
      for (int e = 0; e < 9; ++e, ++k) {
        a_.val[static_cast<std::size_t>(entries_[k].dst)] += m * entries_[k].coeff;
      }
    }
    return a_;
  }

  const SparseSpd& matrix() const { return a_; }

 private:
  struct Entry {
    int dst = -1;
    double coeff = 0.0;
  };
  int cells_ = 0;
  SparseSpd a_;
  std::vector<Entry> entries_;
  std::vector<int> tri_parent_;
};

inline SparseSpd assemble_stiffness(const MeshPair& pair, const DensityField& mu) {
  StiffnessAssembler assembler(pair);
  return assembler.assemble(mu);
}

// b_m = sum over fine triangles containing m of f_parent |t|/3: exact for a
// per-coarse-cell constant source against the P1 basis. The source must be
// discretely balanced.
inline LoadVector assemble_load(const MeshPair& pair, std::span<const double> f_cells) {
  if (static_cast<int>(f_cells.size()) != pair.coarse.triangle_count()) {
    throw ContractError("[fem] source size does not match the coarse mesh");
  }
  double total = 0.0, mass = 0.0;
  for (int s = 0; s < pair.coarse.triangle_count(); ++s) {
    total += f_cells[static_cast<std::size_t>(s)] * pair.coarse.triangle_area(s);
    mass += std::abs(f_cells[static_cast<std::size_t>(s)]) * pair.coarse.triangle_area(s);
  }
  if (mass > 0.0 && std::abs(total) > 1e-10 * mass) {
    throw ContractError("[fem] unbalanced source: |integral f| = " + std::to_string(total) +
                        " exceeds 1e-10 of its L1 mass");
  }
  LoadVector b;
  b.values.assign(static_cast<std::size_t>(pair.fine.node_count()), 0.0);
  for (int t = 0; t < pair.fine.triangle_count(); ++t) {
    const double w =
        f_cells[static_cast<std::size_t>(pair.parent[static_cast<std::size_t>(t)])] *
        pair.fine.triangle_area(t) / 3.0;
    for (int v : pair.fine.triangle(t)) b.values[static_cast<std::size_t>(v)] += w;
  }
  return b;
}

inline PotentialField solve_neumann(const MeshPair& pair, const SparseSpd& a,
                                    const LoadVector& b, const SolveOptions& opts = {},
                                    SolveReport* report = nullptr) {
  const std::vector<double> weights = lumped_mass(pair.fine);
  return PotentialField{solve_neumann(a, b.values, opts, weights, report)};
}

// Per fine triangle, the (constant) gradient of the P1 interpolant of u.
inline Vec2 fine_gradient(const TriMesh& fine, std::span<const double> u, int t) {
  const TriangleGeometry g = triangle_geometry(fine, t);
  const auto& tri = fine.triangle(t);
  Vec2 grad{0.0, 0.0};
  for (int i = 0; i < 3; ++i) {
    grad = grad + g.grad[static_cast<std::size_t>(i)] *
                      u[static_cast<std::size_t>(tri[static_cast<std::size_t>(i)])];
  }
  return grad;
}

// |grad u|_s = (1/|T_s|) int_{T_s} |grad u_h| dx: the area-weighted mean of
// the child gradient norms (mean of norms, not norm of the mean).
inline std::vector<double> coarse_gradient_magnitudes(const MeshPair& pair,
                                                      const PotentialField& u) {
  if (static_cast<int>(u.values.size()) != pair.fine.node_count()) {
    throw ContractError("[fem] potential size does not match the fine mesh");
  }
  std::vector<double> out(static_cast<std::size_t>(pair.coarse.triangle_count()), 0.0);
  for (int s = 0; s < pair.coarse.triangle_count(); ++s) {
    double acc = 0.0, area = 0.0;
    for (int f : pair.child[static_cast<std::size_t>(s)]) {
      const double w = pair.fine.triangle_area(f);
      acc += w * fine_gradient(pair.fine, u.values, f).norm();
      area += w;
    }
    out[static_cast<std::size_t>(s)] = acc / area;
  }
  return out;
}

// Same averaging for |grad u|^2; the second Lyapunov factor uses this.
inline std::vector<double> coarse_gradient_square_means(const MeshPair& pair,
                                                        const PotentialField& u) {
  std::vector<double> out(static_cast<std::size_t>(pair.coarse.triangle_count()), 0.0);
  for (int s = 0; s < pair.coarse.triangle_count(); ++s) {
    double acc = 0.0, area = 0.0;
    for (int f : pair.child[static_cast<std::size_t>(s)]) {
      const double w = pair.fine.triangle_area(f);
      const Vec2 g = fine_gradient(pair.fine, u.values, f);
      acc += w * g.dot(g);
      area += w;
    }
    out[static_cast<std::size_t>(s)] = acc / area;
  }
  return out;
}

// Discrete flux operator Q(mu) = mu |grad U(mu)| per coarse cell.
inline std::vector<double> flux_field(const MeshPair& pair, const DensityField& mu,
                                      const PotentialField& u) {
  std::vector<double> q = coarse_gradient_magnitudes(pair, u);
  for (std::size_t s = 0; s < q.size(); ++s) q[s] *= mu.values[s];
  return q;
}

}  // namespace mkflow
