#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "mkflow/config.hpp"
#include "mkflow/diagnostics.hpp"
#include "mkflow/dynamics.hpp"
#include "mkflow/errors.hpp"
#include "mkflow/io.hpp"
#include "mkflow/maze_mask.hpp"
#include "mkflow/scenarios.hpp"
#include "mkflow/solver.hpp"

namespace mkflow {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNoConvergence = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitSolverFailure = 3;

inline Scenario build_scenario(const RunConfig& cfg) {
  Scenario sc;
  if (cfg.scenario == "maze") {
    const GridMask mask = cfg.mask_path == "builtin:maze64"
                              ? GridMask::parse(kMaze64Mask)
                              : load_mask(cfg.mask_path);
    sc = maze_scenario(mask, cfg.resolution);
  } else {
    MeshPair pair = refine_uniform(structured_rect_mesh(cfg.resolution, cfg.resolution));
    sc = ot_scenario(cfg.k_e, std::move(pair), cfg.ic, cfg.geometry);
  }
  if (cfg.dt0) sc.schedule.dt0 = *cfg.dt0;
  if (cfg.dt_growth) sc.schedule.growth = *cfg.dt_growth;
  if (cfg.dt_cap) sc.schedule.dt_cap = *cfg.dt_cap;
  sc.schedule.validate();
  sc.tau = cfg.tau;
  return sc;
}

inline std::filesystem::path resolve_output_dir(const RunConfig& cfg) {
  if (const char* env = std::getenv("MKFLOW_OUTPUT_DIR")) {
    if (*env != '\0') return std::filesystem::path(env);
  }
  return std::filesystem::path(cfg.output_dir);
}

inline FieldSnapshot make_snapshot(const Scenario& sc, const DensityField& mu,
                                   const PotentialField& u) {
  FieldSnapshot snap;
  snap.mu = mu.values;
  snap.k = sc.k.values;
  snap.gradmag = coarse_gradient_magnitudes(sc.pair, u);
  snap.flux = snap.gradmag;
  for (std::size_t s = 0; s < snap.flux.size(); ++s) snap.flux[s] *= mu.values[s];
  snap.u = u.values;
  return snap;
}

// VTK on the fine mesh: coarse cell fields replicated onto the children so
// the one file carries both the cell fields and the nodal potential.
inline VtkFields fine_vtk_fields(const MeshPair& pair, const FieldSnapshot& snap) {
  const auto replicate = [&](const std::vector<double>& coarse) {
    std::vector<double> fine(static_cast<std::size_t>(pair.fine.triangle_count()));
    for (int t = 0; t < pair.fine.triangle_count(); ++t) {
      fine[static_cast<std::size_t>(t)] = coarse[static_cast<std::size_t>(
          pair.parent[static_cast<std::size_t>(t)])];
    }
    return fine;
  };
  VtkFields fields;
  fields.cell_data.emplace_back("mu", replicate(snap.mu));
  fields.cell_data.emplace_back("k", replicate(snap.k));
  fields.cell_data.emplace_back("gradmag", replicate(snap.gradmag));
  fields.cell_data.emplace_back("flux", replicate(snap.flux));
  fields.point_data.emplace_back("u", snap.u);
  return fields;
}

inline std::string threshold_label(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct RunOutcome {
  int exit_code = kExitOk;
  bool converged = false;
  std::filesystem::path output_dir;
  std::string error;
};

inline std::string summary_text(const Scenario& sc, const RunState& state,
                                const std::string& error) {
  std::ostringstream out;
  out << "scenario = " << sc.name << "\n";
  out << "converged = " << (state.converged ? "true" : "false") << "\n";
  out << "steps = " << state.step << "\n";
  out << "final_t = " << format_double(state.t) << "\n";
  out << "final_variation = " << format_double(state.last_variation) << "\n";
  if (!state.u.values.empty()) {
    const DiagnosticsRecord rec = summarize(sc.pair, state.mu, state.u, sc.k, state.t);
    out << "lyapunov = " << format_double(rec.lyapunov) << "\n";
    out << "mass = " << format_double(rec.total_mass) << "\n";
    out << "flux_l1 = " << format_double(rec.flux_l1) << "\n";
    out << "min_mu = " << format_double(rec.min_mu) << "\n";
    out << "mk_support_residual = " << format_double(rec.mk.support_residual) << "\n";
    out << "mk_constraint_violation = " << format_double(rec.mk.constraint_violation) << "\n";
  }
  double iters = 0.0;
  for (const TraceRecord& r : state.trace) iters += r.cg_iters;
  if (!state.trace.empty()) iters /= static_cast<double>(state.trace.size());
  out << "mean_cg_iters = " << format_double(iters) << "\n";
  out << "jacobi_fallbacks = " << state.jacobi_fallbacks << "\n";
  for (const std::string& w : state.warnings) out << "warning = " << w << "\n";
  if (!error.empty()) out << "error = " << error << "\n";
  return out.str();
}

// Builds the scenario, runs it to steady state, and persists mesh, trace,
// snapshots at the configured variation thresholds, and a summary.
inline RunOutcome run_command(const RunConfig& cfg, std::ostream* log = nullptr) {
  const Scenario sc = build_scenario(cfg);
  RunOutcome outcome;
  outcome.output_dir = resolve_output_dir(cfg);
  if (log) {
    *log << "scenario " << sc.name << ": " << sc.pair.coarse.triangle_count()
         << " cells, " << sc.pair.fine.node_count() << " potential nodes\n";
  }
  save_mesh(outcome.output_dir / "mesh.txt", sc.pair.coarse);

  SolveOptions solve;
  solve.rel_tol = cfg.solver_tol;
  solve.max_iter = cfg.solver_max_iter;

  std::vector<char> crossed(cfg.snapshot_vars.size(), 0);
  const StepObserver observer = [&](const RunState& state) {
    const TraceRecord& rec = state.trace.back();
    for (std::size_t i = 0; i < cfg.snapshot_vars.size(); ++i) {
      if (!crossed[i] && rec.variation <= cfg.snapshot_vars[i]) {
        crossed[i] = 1;
        const std::string label = threshold_label(cfg.snapshot_vars[i]);
        save_fields(outcome.output_dir / ("fields_var_" + label + ".txt"),
                    make_snapshot(sc, state.mu, state.u));
        if (log) {
          *log << "step " << rec.step << " t " << rec.t << ": variation crossed " << label
               << ", snapshot written\n";
        }
      }
    }
    if (log && rec.step > 0 && rec.step % 1000 == 0) {
      *log << "step " << rec.step << " t " << rec.t << " variation " << rec.variation
           << "\n";
    }
  };

  RunState state;
  std::string error;
  try {
    state = run_to_steady(sc.pair, sc.mu0, sc.k, sc.load(), sc.schedule, sc.tau,
                          cfg.max_steps, solve, observer);
    outcome.converged = true;
    outcome.exit_code = kExitOk;
  } catch (const NonConvergenceError& e) {
    state = e.state();
    error = e.what();
    outcome.exit_code = kExitNoConvergence;
  } catch (const SolverError& e) {
    outcome.exit_code = kExitSolverFailure;
    outcome.error = e.what();
    if (log) *log << "solver failure: " << e.what() << "\n";
    return outcome;
  }
  outcome.error = error;

  save_trace_csv(outcome.output_dir / "trace.csv", state.trace);
  const FieldSnapshot final_snap = make_snapshot(sc, state.mu, state.u);
  save_fields(outcome.output_dir / "fields_final.txt", final_snap);
  write_vtk(outcome.output_dir / "fields_final.vtk", sc.pair.fine,
            fine_vtk_fields(sc.pair, final_snap), sc.name);
  write_file_atomic(outcome.output_dir / "summary.txt", summary_text(sc, state, error));
  if (log) {
    *log << (state.converged ? "converged" : "stopped") << " after " << state.step
         << " steps, t " << state.t << ", variation " << state.last_variation << "\n"
         << "outputs in " << outcome.output_dir.string() << "\n";
  }
  return outcome;
}

// Rebuilds the fine mesh from the stored coarse one and renders every field
// snapshot in the directory as VTK.
inline int export_command(const std::filesystem::path& state_dir, std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  const TriMesh coarse = load_mesh(state_dir / "mesh.txt");
  const MeshPair pair = refine_uniform(coarse);
  std::vector<fs::path> snapshots;
  for (const auto& entry : fs::directory_iterator(state_dir)) {
    const fs::path& p = entry.path();
    if (p.extension() == ".txt" && p.filename().string().rfind("fields_", 0) == 0) {
      snapshots.push_back(p);
    }
  }
  std::sort(snapshots.begin(), snapshots.end());
  if (snapshots.empty()) {
    throw IoError("[runner] no fields_*.txt snapshots in " + state_dir.string());
  }
  for (const fs::path& p : snapshots) {
    const FieldSnapshot snap = load_fields(p);
    if (static_cast<int>(snap.mu.size()) != pair.coarse.triangle_count() ||
        static_cast<int>(snap.u.size()) != pair.fine.node_count()) {
      throw IoError("[runner] snapshot " + p.string() + " does not match the stored mesh");
    }
    fs::path out = p;
    out.replace_extension(".vtk");
    write_vtk(out, pair.fine, fine_vtk_fields(pair, snap), p.stem().string());
    if (log) *log << "wrote " << out.string() << "\n";
  }
  return kExitOk;
}

}  // namespace mkflow
