#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mkflow/errors.hpp"
#include "mkflow/fem.hpp"
#include "mkflow/mesh.hpp"
#include "mkflow/schedule.hpp"
#include "mkflow/solver.hpp"

namespace mkflow {

// Per-coarse-cell resistance k_s > 0.
struct ResistanceField {
  std::vector<double> values;

  static ResistanceField uniform(int cells, double value) {
    return ResistanceField{std::vector<double>(static_cast<std::size_t>(cells), value)};
  }

  void validate(int cells) const {
    if (static_cast<int>(values.size()) != cells) {
      throw ContractError("[dynamics] resistance field size does not match the coarse mesh");
    }
    for (double v : values) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw ContractError("[dynamics] resistance must be positive and finite");
      }
    }
  }
};

// One row per accepted step j. All state columns (lyapunov, mass, flux_l1,
// min_mu, cg_iters) describe mu^j / u^j; dt and variation describe the
// transition to mu^{j+1}.
struct TraceRecord {
  int step = 0;
  double t = 0.0;
  double dt = 0.0;
  double variation = 0.0;
  double lyapunov = 0.0;
  double mass = 0.0;
  double flux_l1 = 0.0;
  double min_mu = 0.0;
  int cg_iters = 0;
};

struct RunState {
  int step = 0;       // index of the next step to take
  double t = 0.0;     // sum of accepted dt
  double dt = 0.0;    // dt for the next step
  DensityField mu;
  PotentialField u;   // potential for the current mu (refreshed on convergence)
  std::vector<TraceRecord> trace;
  std::vector<std::string> warnings;
  int jacobi_fallbacks = 0;
  bool converged = false;
  double last_variation = std::numeric_limits<double>::quiet_NaN();
};

// Carries the full state so callers can inspect or persist the partial run.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& msg, RunState state)
      : Error(msg), state_(std::make_shared<RunState>(std::move(state))) {}
  const RunState& state() const { return *state_; }

 private:
  std::shared_ptr<RunState> state_;
};

// mu'_s = mu_s (1 + dt (g_s - k_s)), clamped from below at the floor.
inline DensityField euler_step(const DensityField& mu, std::span<const double> gradmag,
                               const ResistanceField& k, double dt) {
  if (!(dt > 0.0)) throw ContractError("[dynamics] euler_step requires dt > 0");
  if (gradmag.size() != mu.values.size() || k.values.size() != mu.values.size()) {
    throw ContractError("[dynamics] euler_step field sizes disagree");
  }
  DensityField next;
  next.values.resize(mu.values.size());
  for (std::size_t s = 0; s < mu.values.size(); ++s) {
    const double v = mu.values[s] * (1.0 + dt * (gradmag[s] - k.values[s]));
    if (!std::isfinite(v)) throw ContractError("[dynamics] non-finite density update");
    next.values[s] = std::max(v, kMuFloor);
  }
  return next;
}

// ||mu_new - mu_old||_L2 / (dt ||mu_old||_L2), norms area-weighted.
inline double variation(const DensityField& mu_new, const DensityField& mu_old, double dt,
                        std::span<const double> areas) {
  if (!(dt > 0.0)) throw ContractError("[dynamics] variation requires dt > 0");
  if (mu_new.values.size() != mu_old.values.size() || areas.size() != mu_old.values.size()) {
    throw ContractError("[dynamics] variation field sizes disagree");
  }
  double diff2 = 0.0, old2 = 0.0;
  for (std::size_t s = 0; s < areas.size(); ++s) {
    const double d = mu_new.values[s] - mu_old.values[s];
    diff2 += areas[s] * d * d;
    old2 += areas[s] * mu_old.values[s] * mu_old.values[s];
  }
  if (!(old2 > 0.0)) {
    throw UndefinedVariationError("[dynamics] variation undefined: previous density is zero");
  }
  return std::sqrt(diff2 / old2) / dt;
}

using StepObserver = std::function<void(const RunState&)>;

// Owns the assembled system and advances mu one forward Euler step at a
// time. run_to_steady is a loop over checked_step, so a single stepped
// record matches the first record of a full run exactly.
class Stepper {
 public:
  Stepper(const MeshPair& pair, DensityField mu0, ResistanceField k, LoadVector load,
          StepSchedule schedule = {}, SolveOptions solve = {})
      : Stepper(pair, make_initial_state(std::move(mu0), schedule), std::move(k),
                std::move(load), schedule, solve) {}

  Stepper(const MeshPair& pair, RunState state, ResistanceField k, LoadVector load,
          StepSchedule schedule = {}, SolveOptions solve = {})
      : pair_(pair),
        assembler_(pair),
        k_(std::move(k)),
        load_(std::move(load)),
        schedule_(schedule),
        solve_(solve),
        state_(std::move(state)),
        areas_(pair.coarse.triangle_areas().begin(), pair.coarse.triangle_areas().end()),
        weights_(lumped_mass(pair.fine)) {
    schedule_.validate();
    k_.validate(pair.coarse.triangle_count());
    if (static_cast<int>(load_.values.size()) != pair.fine.node_count()) {
      throw ContractError("[dynamics] load size does not match the fine mesh");
    }
    double sum = 0.0, mass = 0.0;
    for (double b : load_.values) {
      sum += b;
      mass += std::abs(b);
    }
    if (mass > 0.0 && std::abs(sum) > 1e-10 * mass) {
      throw ContractError("[dynamics] unbalanced load vector");
    }
    if (!(state_.dt > 0.0)) state_.dt = schedule_.dt0;
  }

  const RunState& state() const { return state_; }
  RunState take_state() && { return std::move(state_); }

  // One loop body: solve u at mu^j, record diagnostics, advance mu, append
  // the trace record.
  const TraceRecord& checked_step() {
    const SparseSpd& a = assembler_.assemble(state_.mu);
    SolveReport rep;
    state_.u.values = solve_neumann(a, load_.values, solve_, weights_, &rep);
    if (rep.jacobi_fallback) {
      ++state_.jacobi_fallbacks;
      warn_once(warned_fallback_, "incomplete Cholesky broke down; continuing with Jacobi");
    }

    // Single pass: per-cell mean gradient norm plus the energy and flux sums.
    std::vector<double> gradmag(areas_.size(), 0.0);
    double energy = 0.0, flux_l1 = 0.0, mass = 0.0, min_mu = state_.mu.values[0];
    for (int s = 0; s < pair_.coarse.triangle_count(); ++s) {
      double acc_norm = 0.0, acc_sq = 0.0;
      for (int f : pair_.child[static_cast<std::size_t>(s)]) {
        const double w = pair_.fine.triangle_area(f);
        const Vec2 g = fine_gradient(pair_.fine, state_.u.values, f);
        acc_norm += w * g.norm();
        acc_sq += w * g.dot(g);
      }
      const double mu_s = state_.mu.values[static_cast<std::size_t>(s)];
      gradmag[static_cast<std::size_t>(s)] = acc_norm / areas_[static_cast<std::size_t>(s)];
      energy += mu_s * acc_sq;
      flux_l1 += mu_s * acc_norm;
      mass += mu_s * areas_[static_cast<std::size_t>(s)];
      min_mu = std::min(min_mu, mu_s);
    }

    const double dt = state_.dt;
    check_guards(gradmag, dt);

    DensityField next = euler_step(state_.mu, gradmag, k_, dt);
    TraceRecord rec;
    rec.step = state_.step;
    rec.t = state_.t;
    rec.dt = dt;
    rec.variation = variation(next, state_.mu, dt, areas_);
    rec.lyapunov = 0.5 * mass * energy;
    rec.mass = mass;
    rec.flux_l1 = flux_l1;
    rec.min_mu = min_mu;
    rec.cg_iters = rep.iterations;
    state_.trace.push_back(rec);

    state_.mu = std::move(next);
    state_.t += dt;
    state_.dt = schedule_.next(dt);
    state_.step += 1;
    state_.last_variation = rec.variation;
    return state_.trace.back();
  }

  // Re-solve u for the current mu so the stored potential matches the final
  // density after the last accepted step.
  void refresh_potential() {
    const SparseSpd& a = assembler_.assemble(state_.mu);
    SolveReport rep;
    state_.u.values = solve_neumann(a, load_.values, solve_, weights_, &rep);
    if (rep.jacobi_fallback) ++state_.jacobi_fallbacks;
  }

 private:
  static RunState make_initial_state(DensityField mu0, const StepSchedule& schedule) {
    RunState st;
    st.mu = std::move(mu0);
    st.dt = schedule.dt0;
    return st;
  }

  void warn_once(bool& flag, const std::string& msg) {
    if (!flag) {
      flag = true;
      state_.warnings.push_back("[dynamics] " + msg);
    }
  }

  void check_guards(std::span<const double> gradmag, double dt) {
    double max_growth = 0.0, max_k_active = 0.0;
    for (std::size_t s = 0; s < gradmag.size(); ++s) {
      max_growth = std::max(max_growth, gradmag[s] - k_.values[s]);
      if (state_.mu.values[s] > kMuFloor) {
        max_k_active = std::max(max_k_active, k_.values[s]);
      }
    }
    if (dt * max_growth >= 1.0) {
      warn_once(warned_growth_, "dt * max(|grad u| - k) >= 1, step doubles the density");
    }
    if (dt * max_k_active >= 1.0) {
      warn_once(warned_decay_, "dt * max(k) >= 1 on active cells, decay can overshoot zero");
    }
  }

  const MeshPair& pair_;
  StiffnessAssembler assembler_;
  ResistanceField k_;
  LoadVector load_;
  StepSchedule schedule_;
  SolveOptions solve_;
  RunState state_;
  std::vector<double> areas_;
  std::vector<double> weights_;
  bool warned_growth_ = false;
  bool warned_decay_ = false;
  bool warned_fallback_ = false;
};

// Single-step API over a caller-held state. Rebuilds the assembly pattern,
// so prefer Stepper for loops.
inline RunState checked_step(const MeshPair& pair, RunState state, const ResistanceField& k,
                             const LoadVector& load, const StepSchedule& schedule = {},
                             const SolveOptions& solve = {}) {
  Stepper stepper(pair, std::move(state), k, load, schedule, solve);
  stepper.checked_step();
  return std::move(stepper).take_state();
}

inline RunState run_to_steady(const MeshPair& pair, const DensityField& mu0,
                              const ResistanceField& k, const LoadVector& load,
                              const StepSchedule& schedule = {}, double tau = 5e-9,
                              int max_steps = 50000, const SolveOptions& solve = {},
                              const StepObserver& observer = {}) {
  if (!(tau > 0.0)) throw ContractError("[dynamics] tau must be positive");
  if (max_steps < 1) throw ContractError("[dynamics] max_steps must be at least 1");
  Stepper stepper(pair, mu0, k, load, schedule, solve);
  for (int j = 0; j < max_steps; ++j) {
    const TraceRecord& rec = stepper.checked_step();
    if (observer) observer(stepper.state());
    if (rec.variation <= tau) {
      stepper.refresh_potential();
      RunState out = std::move(stepper).take_state();
      out.converged = true;
      return out;
    }
  }
  stepper.refresh_potential();
  throw NonConvergenceError(
      "[dynamics] no steady state within " + std::to_string(max_steps) + " steps",
      std::move(stepper).take_state());
}

}  // namespace mkflow
