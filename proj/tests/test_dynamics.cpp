#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mkflow/diagnostics.hpp"
#include "mkflow/dynamics.hpp"
#include "mkflow/errors.hpp"
#include "mkflow/fem.hpp"
#include "mkflow/mesh.hpp"
#include "mkflow/schedule.hpp"

using namespace mkflow;
using Catch::Approx;

namespace {

// +1 on the first coarse cell, -1 on the last. Equal areas on a structured
// mesh, so the integral balances exactly.
std::vector<double> dipole_cells(const MeshPair& pair) {
  std::vector<double> f(static_cast<std::size_t>(pair.coarse.triangle_count()), 0.0);
  f.front() = 1.0;
  f.back() = -1.0;
  return f;
}

}  // namespace

TEST_CASE("step schedule growth and cap") {
  const StepSchedule s;
  REQUIRE(s.dt0 == 0.01);
  REQUIRE(s.next(0.01) == Approx(0.0101));
  REQUIRE(s.next(0.3) == 0.25);
  s.validate();

  StepSchedule bad = s;
  bad.dt0 = 0.0;
  REQUIRE_THROWS_AS(bad.validate(), ContractError);
  bad = s;
  bad.growth = 0.5;
  REQUIRE_THROWS_AS(bad.validate(), ContractError);
  bad = s;
  bad.dt_cap = 1e-3;  // below dt0
  REQUIRE_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("euler step arithmetic, clamping and validation") {
  const DensityField mu{{2.0}};
  const ResistanceField k{{1.0}};
  const std::vector<double> g{1.5};

  const DensityField out = euler_step(mu, g, k, 0.1);
  REQUIRE(out.values[0] == Approx(2.1));

  // 1 + dt (g - k) < 0: the update would cross zero, the floor catches it.
  const ResistanceField harsh{{20.0}};
  const std::vector<double> flat{0.0};
  const DensityField clamped = euler_step(DensityField{{1.0}}, flat, harsh, 0.1);
  REQUIRE(clamped.values[0] == kMuFloor);

  REQUIRE_THROWS_AS(euler_step(mu, g, k, 0.0), ContractError);
  const std::vector<double> two{1.0, 2.0};
  REQUIRE_THROWS_AS(euler_step(mu, two, k, 0.1), ContractError);
  const std::vector<double> nan_g{std::nan("")};
  REQUIRE_THROWS_AS(euler_step(mu, nan_g, k, 0.1), ContractError);
}

TEST_CASE("variation of a uniform relative update is one") {
  // Dyadic values make mu (1 + dt) - mu == mu dt without rounding, so the
  // ratio is exactly 1; arbitrary values land within float error of 1.
  const DensityField dyadic{{2.0, 4.0}};
  DensityField dyadic_next = dyadic;
  for (double& v : dyadic_next.values) v *= 1.5;
  const std::vector<double> areas{0.2, 0.8};
  REQUIRE(variation(dyadic_next, dyadic, 0.5, areas) == 1.0);

  const DensityField old_mu{{2.0, 3.0}};
  const double dt = 0.05;
  DensityField new_mu = old_mu;
  for (double& v : new_mu.values) v *= 1.0 + dt;
  REQUIRE(variation(new_mu, old_mu, dt, areas) == Approx(1.0).epsilon(1e-12));

  const DensityField zeros{{0.0, 0.0}};
  REQUIRE_THROWS_AS(variation(new_mu, zeros, dt, areas), UndefinedVariationError);
  REQUIRE_THROWS_AS(variation(new_mu, old_mu, 0.0, areas), ContractError);
}

TEST_CASE("resistance field validation") {
  const ResistanceField with_zero{{1.0, 0.0}};
  REQUIRE_THROWS_AS(with_zero.validate(2), ContractError);
  const ResistanceField too_short{{1.0}};
  REQUIRE_THROWS_AS(too_short.validate(2), ContractError);
  ResistanceField::uniform(2, 1.0).validate(2);
}

TEST_CASE("first step records the pre-step state") {
  const MeshPair pair = refine_uniform(structured_rect_mesh(2, 2));
  const DensityField mu0 = DensityField::uniform(pair.coarse.triangle_count(), 1.0);
  const ResistanceField k = ResistanceField::uniform(pair.coarse.triangle_count(), 1.0);
  const LoadVector load = assemble_load(pair, dipole_cells(pair));

  Stepper stepper(pair, mu0, k, load);
  const TraceRecord rec = stepper.checked_step();

  REQUIRE(rec.step == 0);
  REQUIRE(rec.t == 0.0);
  REQUIRE(rec.dt == 0.01);
  REQUIRE(rec.mass == Approx(1.0));
  REQUIRE(rec.min_mu == 1.0);
  REQUIRE(rec.cg_iters > 0);
  REQUIRE(rec.variation > 0.0);

  // Cross-check lyapunov, the density update and the variation against the
  // standalone pieces evaluated at the same (mu, u).
  const PotentialField u = solve_neumann(pair, assemble_stiffness(pair, mu0), load);
  REQUIRE(rec.lyapunov == Approx(lyapunov(pair, mu0, u)).epsilon(1e-9));

  const std::vector<double> gm = coarse_gradient_magnitudes(pair, u);
  const DensityField expected = euler_step(mu0, gm, k, 0.01);
  const RunState& st = stepper.state();
  REQUIRE(st.step == 1);
  REQUIRE(st.t == Approx(0.01));
  REQUIRE(st.dt == Approx(0.0101));
  REQUIRE(st.trace.size() == 1);
  for (std::size_t s = 0; s < expected.values.size(); ++s) {
    REQUIRE(st.mu.values[s] == Approx(expected.values[s]).epsilon(1e-12));
  }
  const auto& areas = pair.coarse.triangle_areas();
  REQUIRE(rec.variation == Approx(variation(expected, mu0, 0.01, areas)).epsilon(1e-9));
}

TEST_CASE("single-step wrapper matches the stepper") {
  const MeshPair pair = refine_uniform(structured_rect_mesh(2, 2));
  const DensityField mu0 = DensityField::uniform(pair.coarse.triangle_count(), 1.0);
  const ResistanceField k = ResistanceField::uniform(pair.coarse.triangle_count(), 1.0);
  const LoadVector load = assemble_load(pair, dipole_cells(pair));

  Stepper stepper(pair, mu0, k, load);
  stepper.checked_step();
  const RunState& want = stepper.state();

  RunState init;
  init.mu = mu0;
  const RunState got = checked_step(pair, std::move(init), k, load);
  REQUIRE(got.step == want.step);
  REQUIRE(got.t == want.t);
  REQUIRE(got.dt == want.dt);
  REQUIRE(got.trace.size() == 1);
  REQUIRE(got.trace[0].lyapunov == Approx(want.trace[0].lyapunov));
  for (std::size_t s = 0; s < want.mu.values.size(); ++s) {
    REQUIRE(got.mu.values[s] == Approx(want.mu.values[s]));
  }
}

TEST_CASE("stepper rejects inconsistent inputs") {
  const MeshPair pair = refine_uniform(structured_rect_mesh(2, 2));
  const DensityField mu0 = DensityField::uniform(pair.coarse.triangle_count(), 1.0);
  const ResistanceField k = ResistanceField::uniform(pair.coarse.triangle_count(), 1.0);

  const LoadVector short_load{std::vector<double>(3, 0.0)};
  REQUIRE_THROWS_AS(Stepper(pair, mu0, k, short_load), ContractError);

  const LoadVector unbalanced{
      std::vector<double>(static_cast<std::size_t>(pair.fine.node_count()), 1.0)};
  REQUIRE_THROWS_AS(Stepper(pair, mu0, k, unbalanced), ContractError);
}

TEST_CASE("zero load decays every cell to the floor and converges") {
  const MeshPair pair = refine_uniform(structured_rect_mesh(1, 1));
  const DensityField mu0 = DensityField::uniform(pair.coarse.triangle_count(), 1.0);
  const ResistanceField k = ResistanceField::uniform(pair.coarse.triangle_count(), 1.0);
  const LoadVector zero{std::vector<double>(static_cast<std::size_t>(pair.fine.node_count()), 0.0)};

  int seen = 0;
  const RunState out = run_to_steady(pair, mu0, k, zero, StepSchedule{}, 5e-9, 2000,
                                     SolveOptions{}, [&](const RunState&) { ++seen; });
  REQUIRE(out.converged);
  REQUIRE(seen == static_cast<int>(out.trace.size()));
  for (double v : out.mu.values) REQUIRE(v == kMuFloor);
  for (double v : out.u.values) REQUIRE(v == 0.0);
  REQUIRE(out.trace.back().flux_l1 == 0.0);
  REQUIRE(out.trace.back().lyapunov == 0.0);

  // t and dt chain through the schedule.
  for (std::size_t j = 0; j + 1 < out.trace.size(); ++j) {
    REQUIRE(out.trace[j + 1].t == Approx(out.trace[j].t + out.trace[j].dt));
    REQUIRE(out.trace[j + 1].dt == Approx(std::min(1.01 * out.trace[j].dt, 0.25)));
  }
}

TEST_CASE("non-convergence carries the final state") {
  const MeshPair pair = refine_uniform(structured_rect_mesh(2, 2));
  const DensityField mu0 = DensityField::uniform(pair.coarse.triangle_count(), 1.0);
  const ResistanceField k = ResistanceField::uniform(pair.coarse.triangle_count(), 1.0);
  const LoadVector load = assemble_load(pair, dipole_cells(pair));

  try {
    run_to_steady(pair, mu0, k, load, StepSchedule{}, 5e-9, 3);
    FAIL("expected NonConvergenceError");
  } catch (const NonConvergenceError& e) {
    const RunState& st = e.state();
    REQUIRE_FALSE(st.converged);
    REQUIRE(st.step == 3);
    REQUIRE(st.trace.size() == 3);
    REQUIRE(st.u.values.size() == static_cast<std::size_t>(pair.fine.node_count()));
    REQUIRE(std::isfinite(st.last_variation));
  }
}

namespace {

int warnings_containing(const std::vector<std::string>& warnings, const char* needle) {
  int n = 0;
  for (const auto& w : warnings) {
    if (w.find(needle) != std::string::npos) ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("step guards warn once about overshooting rates") {
  const MeshPair pair = refine_uniform(structured_rect_mesh(2, 2));
  const DensityField mu0 = DensityField::uniform(pair.coarse.triangle_count(), 1.0);
  const LoadVector load = assemble_load(pair, dipole_cells(pair));

  SECTION("decay guard: dt * k >= 1 on live cells") {
    const ResistanceField k = ResistanceField::uniform(pair.coarse.triangle_count(), 200.0);
    Stepper stepper(pair, mu0, k, load);
    stepper.checked_step();
    stepper.checked_step();
    REQUIRE(warnings_containing(stepper.state().warnings, "overshoot") == 1);
  }

  SECTION("growth guard: dt * (|grad u| - k) >= 1") {
    const ResistanceField k = ResistanceField::uniform(pair.coarse.triangle_count(), 1e-3);
    // Size dt off the actual first-step gradient so the guard has to fire.
    const PotentialField u = solve_neumann(pair, assemble_stiffness(pair, mu0), load);
    const std::vector<double> gm = coarse_gradient_magnitudes(pair, u);
    const double gmax = *std::max_element(gm.begin(), gm.end());
    REQUIRE(gmax > 2e-3);
    const double dt = 1.0 / (gmax - 1e-3) + 1.0;
    const StepSchedule schedule{dt, 1.0, dt};
    Stepper stepper(pair, mu0, k, load, schedule);
    stepper.checked_step();
    stepper.checked_step();
    REQUIRE(warnings_containing(stepper.state().warnings, "doubles") == 1);
  }
}
