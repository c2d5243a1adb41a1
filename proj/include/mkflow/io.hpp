#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mkflow/dynamics.hpp"
#include "mkflow/errors.hpp"
#include "mkflow/graph.hpp"
#include "mkflow/mesh.hpp"
#include "mkflow/scenarios.hpp"

namespace mkflow {

// 17 significant digits: enough for the decimal text to map back to the
// identical double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("[io] cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Complete-or-absent writes: fill a temporary, then rename over the target.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("[io] cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("[io] write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code drop;
    fs::remove(tmp, drop);
    throw IoError("[io] cannot rename " + tmp.string() + " to " + path.string() + ": " +
                  ec.message());
  }
}

inline std::string mesh_text(const TriMesh& mesh) {
  std::ostringstream out;
  out << "nodes " << mesh.node_count() << " triangles " << mesh.triangle_count() << "\n";
  for (const Vec2& p : mesh.nodes()) {
    out << format_double(p.x) << " " << format_double(p.y) << "\n";
  }
  for (const auto& t : mesh.triangles()) {
    out << t[0] << " " << t[1] << " " << t[2] << "\n";
  }
  return out.str();
}

inline void save_mesh(const std::filesystem::path& path, const TriMesh& mesh) {
  write_file_atomic(path, mesh_text(mesh));
}

inline TriMesh parse_mesh(const std::string& text) {
  std::istringstream in(text);
  std::string kw_nodes, kw_tris;
  int nv = 0, nt = 0;
  if (!(in >> kw_nodes >> nv >> kw_tris >> nt) || kw_nodes != "nodes" ||
      kw_tris != "triangles" || nv < 0 || nt < 0) {
    throw IoError("[io] bad mesh header, expected 'nodes <V> triangles <F>'");
  }
  std::vector<Vec2> nodes(static_cast<std::size_t>(nv));
  for (auto& p : nodes) {
    if (!(in >> p.x >> p.y)) throw IoError("[io] truncated mesh node list");
  }
  std::vector<std::array<int, 3>> tris(static_cast<std::size_t>(nt));
  for (auto& t : tris) {
    if (!(in >> t[0] >> t[1] >> t[2])) throw IoError("[io] truncated mesh triangle list");
  }
  std::string extra;
  if (in >> extra) throw IoError("[io] trailing content after mesh data");
  return TriMesh(std::move(nodes), std::move(tris));
}

inline TriMesh load_mesh(const std::filesystem::path& path) {
  try {
    return parse_mesh(read_file(path));
  } catch (const Error& e) {
    throw IoError(std::string(e.what()) + " (" + path.string() + ")");
  }
}

inline std::string graph_text(const Graph& g) {
  std::ostringstream out;
  out << "vertices " << g.vertex_count() << "\n";
  for (double f : g.source()) out << format_double(f) << "\n";
  out << "edges " << g.edge_count() << "\n";
  for (const GraphEdge& e : g.edges()) {
    out << e.u << " " << e.v << " " << format_double(e.length) << "\n";
  }
  return out.str();
}

inline void save_graph(const std::filesystem::path& path, const Graph& g) {
  write_file_atomic(path, graph_text(g));
}

inline Graph parse_graph(const std::string& text) {
  std::istringstream in(text);
  std::string kw;
  int n = 0;
  if (!(in >> kw >> n) || kw != "vertices" || n < 0) {
    throw IoError("[io] bad graph header, expected 'vertices <n>'");
  }
  std::vector<double> source(static_cast<std::size_t>(n));
  for (double& f : source) {
    if (!(in >> f)) throw IoError("[io] truncated graph source list");
  }
  int m = 0;
  if (!(in >> kw >> m) || kw != "edges" || m < 0) {
    throw IoError("[io] bad graph edge header, expected 'edges <m>'");
  }
  std::vector<GraphEdge> edges(static_cast<std::size_t>(m));
  for (GraphEdge& e : edges) {
    if (!(in >> e.u >> e.v >> e.length)) throw IoError("[io] truncated graph edge list");
  }
  std::string extra;
  if (in >> extra) throw IoError("[io] trailing content after graph data");
  return Graph(n, std::move(edges), std::move(source));
}

inline Graph load_graph(const std::filesystem::path& path) {
  try {
    return parse_graph(read_file(path));
  } catch (const Error& e) {
    throw IoError(std::string(e.what()) + " (" + path.string() + ")");
  }
}

inline GridMask load_mask(const std::filesystem::path& path) {
  try {
    return GridMask::parse(read_file(path));
  } catch (const Error& e) {
    throw IoError(std::string(e.what()) + " (" + path.string() + ")");
  }
}

inline std::string trace_csv(std::span<const TraceRecord> trace) {
  std::ostringstream out;
  out << "step,t,dt,variation,lyapunov,mass,flux_l1,min_mu,cg_iters\n";
  for (const TraceRecord& r : trace) {
    out << r.step << ',' << format_double(r.t) << ',' << format_double(r.dt) << ','
        << format_double(r.variation) << ',' << format_double(r.lyapunov) << ','
        << format_double(r.mass) << ',' << format_double(r.flux_l1) << ','
        << format_double(r.min_mu) << ',' << r.cg_iters << "\n";
  }
  return out.str();
}

inline void save_trace_csv(const std::filesystem::path& path,
                           std::span<const TraceRecord> trace) {
  write_file_atomic(path, trace_csv(trace));
}

// Everything needed to redraw one moment of a run: coarse-cell fields plus
// the fine-node potential.
struct FieldSnapshot {
  std::vector<double> mu;
  std::vector<double> k;
  std::vector<double> gradmag;
  std::vector<double> flux;
  std::vector<double> u;
};

inline std::string fields_text(const FieldSnapshot& snap) {
  const std::size_t m = snap.mu.size();
  if (snap.k.size() != m || snap.gradmag.size() != m || snap.flux.size() != m) {
    throw ContractError("[io] snapshot cell arrays have unequal sizes");
  }
  std::ostringstream out;
  out << "cells " << m << " nodes " << snap.u.size() << "\n";
  for (std::size_t s = 0; s < m; ++s) {
    out << format_double(snap.mu[s]) << " " << format_double(snap.k[s]) << " "
        << format_double(snap.gradmag[s]) << " " << format_double(snap.flux[s]) << "\n";
  }
  for (double v : snap.u) out << format_double(v) << "\n";
  return out.str();
}

inline void save_fields(const std::filesystem::path& path, const FieldSnapshot& snap) {
  write_file_atomic(path, fields_text(snap));
}

inline FieldSnapshot parse_fields(const std::string& text) {
  std::istringstream in(text);
  std::string kw_cells, kw_nodes;
  long long m = 0, n = 0;
  if (!(in >> kw_cells >> m >> kw_nodes >> n) || kw_cells != "cells" || kw_nodes != "nodes" ||
      m < 0 || n < 0) {
    throw IoError("[io] bad snapshot header, expected 'cells <M> nodes <N>'");
  }
  FieldSnapshot snap;
  snap.mu.resize(static_cast<std::size_t>(m));
  snap.k.resize(static_cast<std::size_t>(m));
  snap.gradmag.resize(static_cast<std::size_t>(m));
  snap.flux.resize(static_cast<std::size_t>(m));
  snap.u.resize(static_cast<std::size_t>(n));
  for (std::size_t s = 0; s < snap.mu.size(); ++s) {
    if (!(in >> snap.mu[s] >> snap.k[s] >> snap.gradmag[s] >> snap.flux[s])) {
      throw IoError("[io] truncated snapshot cell data");
    }
  }
  for (double& v : snap.u) {
    if (!(in >> v)) throw IoError("[io] truncated snapshot node data");
  }
  std::string extra;
  if (in >> extra) throw IoError("[io] trailing content after snapshot data");
  return snap;
}

inline FieldSnapshot load_fields(const std::filesystem::path& path) {
  try {
    return parse_fields(read_file(path));
  } catch (const Error& e) {
    throw IoError(std::string(e.what()) + " (" + path.string() + ")");
  }
}

// Named scalar fields for the VTK writer; cell arrays must match the mesh
// triangle count, point arrays the node count.
struct VtkFields {
  std::vector<std::pair<std::string, std::vector<double>>> cell_data;
  std::vector<std::pair<std::string, std::vector<double>>> point_data;
};

inline std::string vtk_text(const TriMesh& mesh, const VtkFields& fields,
                            const std::string& title = "mkflow fields") {
  for (const auto& [name, values] : fields.cell_data) {
    if (static_cast<int>(values.size()) != mesh.triangle_count()) {
      throw ContractError("[io] cell array '" + name + "' does not match the mesh");
    }
  }
  for (const auto& [name, values] : fields.point_data) {
    if (static_cast<int>(values.size()) != mesh.node_count()) {
      throw ContractError("[io] point array '" + name + "' does not match the mesh");
    }
  }
  std::ostringstream out;
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.node_count() << " double\n";
  for (const Vec2& p : mesh.nodes()) {
    out << format_double(p.x) << " " << format_double(p.y) << " 0\n";
  }
  out << "CELLS " << mesh.triangle_count() << " " << 4 * mesh.triangle_count() << "\n";
  for (const auto& t : mesh.triangles()) {
    out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
  }
  out << "CELL_TYPES " << mesh.triangle_count() << "\n";
  for (int t = 0; t < mesh.triangle_count(); ++t) out << "5\n";
  if (!fields.cell_data.empty()) {
    out << "CELL_DATA " << mesh.triangle_count() << "\n";
    for (const auto& [name, values] : fields.cell_data) {
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : values) out << format_double(v) << "\n";
    }
  }
  if (!fields.point_data.empty()) {
    out << "POINT_DATA " << mesh.node_count() << "\n";
    for (const auto& [name, values] : fields.point_data) {
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : values) out << format_double(v) << "\n";
    }
  }
  return out.str();
}

inline void write_vtk(const std::filesystem::path& path, const TriMesh& mesh,
                      const VtkFields& fields, const std::string& title = "mkflow fields") {
  write_file_atomic(path, vtk_text(mesh, fields, title));
}

}  // namespace mkflow
