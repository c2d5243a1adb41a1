#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mkflow/errors.hpp"

namespace mkflow {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double c) const { return {c * x, c * y}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
};

struct Rect {
  double xmin = 0.0, ymin = 0.0, xmax = 1.0, ymax = 1.0;
  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
};

inline Rect unit_square() { return {0.0, 0.0, 1.0, 1.0}; }

// Undirected mesh edge with its adjacent triangles. Boundary edges have
// tri1 < 0; interior edges have exactly two adjacent triangles.
struct Edge {
  int a = -1, b = -1;
  int tri0 = -1, tri1 = -1;
  bool boundary() const { return tri1 < 0; }
};

// Immutable conforming triangulation of a simply connected planar domain.
// All triangles are counterclockwise; the edge table is derived from the
// connectivity at construction and the Euler relation E = V + F - 1 is
// enforced.
class TriMesh {
 public:
  TriMesh() = default;

  TriMesh(std::vector<Vec2> nodes, std::vector<std::array<int, 3>> triangles)
      : nodes_(std::move(nodes)), triangles_(std::move(triangles)) {
    build();
  }

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int triangle_count() const { return static_cast<int>(triangles_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }

  std::span<const Vec2> nodes() const { return nodes_; }
  std::span<const std::array<int, 3>> triangles() const { return triangles_; }
  std::span<const Edge> edges() const { return edges_; }
  std::span<const int> boundary_edges() const { return boundary_edges_; }

  Vec2 node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const std::array<int, 3>& triangle(int t) const {
    return triangles_[static_cast<std::size_t>(t)];
  }

  double triangle_area(int t) const { return areas_[static_cast<std::size_t>(t)]; }
  std::span<const double> triangle_areas() const { return areas_; }

  double total_area() const { return total_area_; }

  Vec2 centroid(int t) const {
    const auto& tri = triangle(t);
    Vec2 c = node(tri[0]) + node(tri[1]) + node(tri[2]);
    return c * (1.0 / 3.0);
  }

 private:
  void build();

  std::vector<Vec2> nodes_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<Edge> edges_;
  std::vector<int> boundary_edges_;
  std::vector<double> areas_;
  double total_area_ = 0.0;
};

inline double signed_area(Vec2 p0, Vec2 p1, Vec2 p2) {
  return 0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
}

inline void TriMesh::build() {
  const int nv = node_count();
  const int nt = triangle_count();
  if (nv < 3 || nt < 1) {
    throw InvalidGeometryError("[mesh] triangulation needs at least 3 nodes and 1 triangle");
  }

  areas_.resize(static_cast<std::size_t>(nt));
  total_area_ = 0.0;
  for (int t = 0; t < nt; ++t) {
    const auto& tri = triangles_[static_cast<std::size_t>(t)];
    for (int k = 0; k < 3; ++k) {
      if (tri[static_cast<std::size_t>(k)] < 0 || tri[static_cast<std::size_t>(k)] >= nv) {
        throw InvalidGeometryError("[mesh] triangle " + std::to_string(t) +
                                   " references node out of range");
      }
    }
    const double a = signed_area(node(tri[0]), node(tri[1]), node(tri[2]));
    if (!(a > 0.0)) {
      throw InvalidGeometryError("[mesh] triangle " + std::to_string(t) +
                                 " has non-positive area (must be counterclockwise)");
    }
    areas_[static_cast<std::size_t>(t)] = a;
    total_area_ += a;
  }

  // Edge table keyed by sorted endpoint indices; ordering is the order of
  // first encounter while scanning triangles, which makes refinement
  // deterministic.
  auto key = [nv](int a, int b) {
    if (a > b) std::swap(a, b);
    return static_cast<long long>(a) * nv + b;
  };
  std::unordered_map<long long, int> index;
  index.reserve(static_cast<std::size_t>(3 * nt));
  edges_.clear();
  for (int t = 0; t < nt; ++t) {
    const auto& tri = triangles_[static_cast<std::size_t>(t)];
    for (int k = 0; k < 3; ++k) {
      const int a = tri[static_cast<std::size_t>(k)];
      const int b = tri[static_cast<std::size_t>((k + 1) % 3)];
      auto [it, inserted] = index.try_emplace(key(a, b), static_cast<int>(edges_.size()));
      if (inserted) {
        Edge e;
        e.a = std::min(a, b);
        e.b = std::max(a, b);
        e.tri0 = t;
        edges_.push_back(e);
      } else {
        Edge& e = edges_[static_cast<std::size_t>(it->second)];
        if (e.tri1 >= 0) {
          throw InvalidGeometryError("[mesh] edge shared by more than two triangles");
        }
        e.tri1 = t;
      }
    }
  }
  boundary_edges_.clear();
  for (int e = 0; e < edge_count(); ++e) {
    if (edges_[static_cast<std::size_t>(e)].boundary()) boundary_edges_.push_back(e);
  }

  if (edge_count() != nv + nt - 1) {
    throw InvalidGeometryError("[mesh] Euler relation E = V + F - 1 violated: domain is not "
                               "a simply connected triangulation");
  }
}

// Area and the three constant P1 basis gradients on triangle t. The third
// gradient is the negated sum of the first two, so the partition-of-unity
// identity sum(grad) = 0 holds exactly in floating point.
struct TriangleGeometry {
  double area = 0.0;
  std::array<Vec2, 3> grad{};
};

inline TriangleGeometry triangle_geometry(const TriMesh& mesh, int t) {
  if (t < 0 || t >= mesh.triangle_count()) {
    throw ContractError("[mesh] triangle index out of range");
  }
  const auto& tri = mesh.triangle(t);
  const Vec2 p0 = mesh.node(tri[0]);
  const Vec2 p1 = mesh.node(tri[1]);
  const Vec2 p2 = mesh.node(tri[2]);
  const double area = mesh.triangle_area(t);
  if (!(area > 0.0)) {
    throw InvalidGeometryError("[mesh] degenerate triangle in triangle_geometry");
  }
  const double s = 1.0 / (2.0 * area);
  TriangleGeometry g;
  g.area = area;
  g.grad[0] = Vec2{p1.y - p2.y, p2.x - p1.x} * s;
  g.grad[1] = Vec2{p2.y - p0.y, p0.x - p2.x} * s;
  g.grad[2] = Vec2{0.0, 0.0} - g.grad[0] - g.grad[1];
  return g;
}

// Structured triangulation of a rectangle: (nx+1)*(ny+1) nodes, every cell
// split along its lower-left to upper-right diagonal (fixed orientation so
// runs are reproducible).
inline TriMesh structured_rect_mesh(int nx, int ny, const Rect& bbox = unit_square()) {
  if (nx < 1 || ny < 1) {
    throw ContractError("[mesh] structured_rect_mesh requires nx, ny >= 1");
  }
  if (!(bbox.width() > 0.0) || !(bbox.height() > 0.0)) {
    throw InvalidGeometryError("[mesh] structured_rect_mesh: empty bounding box");
  }
  std::vector<Vec2> nodes;
  nodes.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      const double x = bbox.xmin + bbox.width() * (static_cast<double>(i) / nx);
      const double y = bbox.ymin + bbox.height() * (static_cast<double>(j) / ny);
      nodes.push_back({x, y});
    }
  }
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  std::vector<std::array<int, 3>> tris;
  tris.reserve(static_cast<std::size_t>(2 * nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int v00 = id(i, j), v10 = id(i + 1, j);
      const int v01 = id(i, j + 1), v11 = id(i + 1, j + 1);
      tris.push_back({v00, v10, v11});
      tris.push_back({v00, v11, v01});
    }
  }
  return TriMesh(std::move(nodes), std::move(tris));
}

// Coarse mesh plus its uniform midpoint refinement. Fine node l < N_2h is
// coarse node l; fine node N_2h + e is the midpoint of coarse edge e.
// Children of coarse triangle s are fine triangles 4s..4s+3 (three corner
// triangles in vertex order, then the central one).
struct MeshPair {
  TriMesh coarse;
  TriMesh fine;
  std::vector<int> parent;                // fine triangle -> coarse triangle
  std::vector<std::array<int, 4>> child;  // coarse triangle -> 4 fine triangles
};

inline MeshPair refine_uniform(const TriMesh& coarse) {
  const int nv = coarse.node_count();
  const int nt = coarse.triangle_count();
  const int ne = coarse.edge_count();

  std::vector<Vec2> nodes(coarse.nodes().begin(), coarse.nodes().end());
  nodes.resize(static_cast<std::size_t>(nv + ne));
  for (int e = 0; e < ne; ++e) {
    const Edge& ed = coarse.edges()[static_cast<std::size_t>(e)];
    nodes[static_cast<std::size_t>(nv + e)] =
        (coarse.node(ed.a) + coarse.node(ed.b)) * 0.5;
  }

  // Midpoint lookup by sorted endpoints.
  std::unordered_map<long long, int> mid;
  mid.reserve(static_cast<std::size_t>(ne));
  auto key = [nv](int a, int b) {
    if (a > b) std::swap(a, b);
    return static_cast<long long>(a) * nv + b;
  };
  for (int e = 0; e < ne; ++e) {
    const Edge& ed = coarse.edges()[static_cast<std::size_t>(e)];
    mid[key(ed.a, ed.b)] = nv + e;
  }

  std::vector<std::array<int, 3>> tris;
  tris.reserve(static_cast<std::size_t>(4 * nt));
  std::vector<int> parent(static_cast<std::size_t>(4 * nt));
  std::vector<std::array<int, 4>> child(static_cast<std::size_t>(nt));
  for (int s = 0; s < nt; ++s) {
    const auto& tri = coarse.triangle(s);
    const int a = tri[0], b = tri[1], c = tri[2];
    const int mab = mid.at(key(a, b));
    const int mbc = mid.at(key(b, c));
    const int mca = mid.at(key(c, a));
    const std::array<std::array<int, 3>, 4> quad = {{
        {a, mab, mca}, {mab, b, mbc}, {mca, mbc, c}, {mab, mbc, mca}}};
    for (int q = 0; q < 4; ++q) {
      const int f = static_cast<int>(tris.size());
      tris.push_back(quad[static_cast<std::size_t>(q)]);
      parent[static_cast<std::size_t>(f)] = s;
      child[static_cast<std::size_t>(s)][static_cast<std::size_t>(q)] = f;
    }
  }

  MeshPair pair;
  pair.fine = TriMesh(std::move(nodes), std::move(tris));
  pair.coarse = coarse;
  pair.parent = std::move(parent);
  pair.child = std::move(child);
  return pair;
}

}  // namespace mkflow
