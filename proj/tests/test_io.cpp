#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "mkflow/errors.hpp"
#include "mkflow/graph.hpp"
#include "mkflow/io.hpp"
#include "mkflow/mesh.hpp"
#include "mkflow/scenarios.hpp"

using namespace mkflow;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* leaf) {
  const fs::path dir = fs::temp_directory_path() / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("mesh text round-trips bit-exactly") {
  // 1/3 coordinates exercise the full double precision of the format.
  const TriMesh mesh = structured_rect_mesh(3, 2);
  const std::string text = mesh_text(mesh);
  const TriMesh back = parse_mesh(text);
  REQUIRE(back.node_count() == mesh.node_count());
  REQUIRE(back.triangle_count() == mesh.triangle_count());
  REQUIRE(mesh_text(back) == text);
  for (int v = 0; v < mesh.node_count(); ++v) {
    REQUIRE(back.node(v).x == mesh.node(v).x);
    REQUIRE(back.node(v).y == mesh.node(v).y);
  }
}

TEST_CASE("mesh parser rejects malformed input") {
  REQUIRE_THROWS_AS(parse_mesh("vertices 3 triangles 1\n"), IoError);
  REQUIRE_THROWS_AS(parse_mesh("nodes 3 triangles 1\n0 0\n1 0\n"), IoError);
  const std::string trailing = mesh_text(structured_rect_mesh(1, 1)) + "stray\n";
  REQUIRE_THROWS_AS(parse_mesh(trailing), IoError);
}

TEST_CASE("mesh files save and load through nested directories") {
  const fs::path dir = fresh_dir("mkflow_test_io_mesh");
  const fs::path path = dir / "a" / "b" / "mesh.txt";
  const TriMesh mesh = structured_rect_mesh(2, 2);
  save_mesh(path, mesh);
  REQUIRE(fs::exists(path));
  REQUIRE_FALSE(fs::exists(path.string() + ".tmp"));
  const TriMesh back = load_mesh(path);
  REQUIRE(mesh_text(back) == mesh_text(mesh));

  REQUIRE_THROWS_AS(load_mesh(dir / "missing.txt"), IoError);
}

TEST_CASE("graph text round-trips bit-exactly") {
  std::vector<GraphEdge> edges{{0, 1, 1.0 / 3.0}, {1, 2, 0.7}, {0, 2, 2.0}};
  std::vector<double> f{0.25, 0.5, -0.75};
  const Graph g(3, std::move(edges), std::move(f));
  const std::string text = graph_text(g);
  const Graph back = parse_graph(text);
  REQUIRE(graph_text(back) == text);
  REQUIRE(back.vertex_count() == 3);
  REQUIRE(back.edges()[0].length == 1.0 / 3.0);

  REQUIRE_THROWS_AS(parse_graph("nodes 2\n"), IoError);
  REQUIRE_THROWS_AS(parse_graph("vertices 2\n1\n-1\nedges 1\n0 1\n"), IoError);
  REQUIRE_THROWS_AS(parse_graph(text + "stray"), IoError);

  const fs::path dir = fresh_dir("mkflow_test_io_graph");
  save_graph(dir / "g.txt", g);
  REQUIRE(graph_text(load_graph(dir / "g.txt")) == text);
  REQUIRE_THROWS_AS(load_graph(dir / "missing.txt"), IoError);
}

TEST_CASE("grid masks load from files") {
  const fs::path dir = fresh_dir("mkflow_test_io_mask");
  write_file_atomic(dir / "m.txt", "S#\n.T\n");
  const GridMask mask = load_mask(dir / "m.txt");
  REQUIRE(mask.width() == 2);
  REQUIRE(mask.cell(0, 1) == GridMask::Cell::Source);
  REQUIRE_THROWS_AS(load_mask(dir / "missing.txt"), IoError);
}

TEST_CASE("trace csv layout") {
  std::vector<TraceRecord> trace(2);
  trace[0].step = 0;
  trace[0].dt = 0.01;
  trace[0].variation = 0.5;
  trace[0].cg_iters = 7;
  trace[1].step = 1;
  trace[1].t = 0.01;
  trace[1].dt = 0.0101;

  const std::string csv = trace_csv(trace);
  REQUIRE(csv.rfind("step,t,dt,variation,lyapunov,mass,flux_l1,min_mu,cg_iters\n", 0) == 0);
  REQUIRE(csv.find("\n0,0,0.01,0.5,") != std::string::npos);
  REQUIRE(csv.find(",7\n") != std::string::npos);
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 3);

  const fs::path dir = fresh_dir("mkflow_test_io_trace");
  save_trace_csv(dir / "trace.csv", trace);
  REQUIRE(read_file(dir / "trace.csv") == csv);
}

TEST_CASE("field snapshots round-trip bit-exactly") {
  FieldSnapshot snap;
  snap.mu = {1.0 / 3.0, 2e-7};
  snap.k = {1.0, 1000.0};
  snap.gradmag = {0.9, 1.1};
  snap.flux = {0.3, 2.2e-7};
  snap.u = {0.0, 0.125, -0.25, 1.0 / 7.0};

  const std::string text = fields_text(snap);
  const FieldSnapshot back = parse_fields(text);
  REQUIRE(fields_text(back) == text);
  REQUIRE(back.mu[0] == snap.mu[0]);
  REQUIRE(back.u[3] == snap.u[3]);

  FieldSnapshot ragged = snap;
  ragged.k.pop_back();
  REQUIRE_THROWS_AS(fields_text(ragged), ContractError);

  REQUIRE_THROWS_AS(parse_fields("cells 2 nodes 1\n1 1 1 1\n"), IoError);
  REQUIRE_THROWS_AS(parse_fields(text + "stray"), IoError);
  REQUIRE_THROWS_AS(parse_fields("points 2 nodes 1\n"), IoError);

  const fs::path dir = fresh_dir("mkflow_test_io_fields");
  save_fields(dir / "f.txt", snap);
  REQUIRE(fields_text(load_fields(dir / "f.txt")) == text);
}

TEST_CASE("vtk output for a two-triangle mesh") {
  const TriMesh mesh = structured_rect_mesh(1, 1);
  VtkFields fields;
  fields.cell_data.push_back({"mu", {1.0, 2.0}});
  fields.point_data.push_back({"u", {0.0, 0.25, 0.5, 1.0}});

  const std::string text = vtk_text(mesh, fields);
  REQUIRE(text.rfind("# vtk DataFile Version 3.0\n", 0) == 0);
  REQUIRE(text.find("DATASET UNSTRUCTURED_GRID\n") != std::string::npos);
  REQUIRE(text.find("POINTS 4 double\n") != std::string::npos);
  REQUIRE(text.find("CELLS 2 8\n") != std::string::npos);
  REQUIRE(text.find("3 0 1 3\n") != std::string::npos);
  REQUIRE(text.find("CELL_TYPES 2\n") != std::string::npos);
  REQUIRE(text.find("CELL_DATA 2\nSCALARS mu double 1\nLOOKUP_TABLE default\n1\n2\n") !=
          std::string::npos);
  REQUIRE(text.find("POINT_DATA 4\nSCALARS u double 1\n") != std::string::npos);

  VtkFields bad;
  bad.cell_data.push_back({"mu", {1.0}});
  REQUIRE_THROWS_AS(vtk_text(mesh, bad), ContractError);

  const fs::path dir = fresh_dir("mkflow_test_io_vtk");
  write_vtk(dir / "out.vtk", mesh, fields);
  REQUIRE(read_file(dir / "out.vtk") == text);
}

TEST_CASE("atomic writes replace existing files") {
  const fs::path dir = fresh_dir("mkflow_test_io_atomic");
  const fs::path path = dir / "x.txt";
  write_file_atomic(path, "first");
  write_file_atomic(path, "second");
  REQUIRE(read_file(path) == "second");
  REQUIRE_FALSE(fs::exists(path.string() + ".tmp"));
  REQUIRE_THROWS_AS(read_file(dir / "missing"), IoError);
}