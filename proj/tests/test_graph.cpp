#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mkflow/errors.hpp"
#include "mkflow/graph.hpp"
#include "mkflow/schedule.hpp"

using namespace mkflow;
using Catch::Approx;

namespace {

// Two parallel routes from 0 to 2: the short one through 1 (length 2) and
// the long one through 3 (length 3).
Graph diamond() {
  std::vector<GraphEdge> edges{{0, 1, 1.0}, {1, 2, 1.0}, {0, 3, 1.5}, {3, 2, 1.5}};
  std::vector<double> f{1.0, 0.0, -1.0, 0.0};
  return Graph(4, std::move(edges), std::move(f));
}

std::vector<double> net_outflow(const Graph& g, const std::vector<double>& flux) {
  std::vector<double> out(static_cast<std::size_t>(g.vertex_count()), 0.0);
  for (std::size_t e = 0; e < flux.size(); ++e) {
    out[static_cast<std::size_t>(g.edges()[e].u)] += flux[e];
    out[static_cast<std::size_t>(g.edges()[e].v)] -= flux[e];
  }
  return out;
}

}  // namespace

TEST_CASE("single resistor obeys Ohm's law") {
  std::vector<GraphEdge> edges{{0, 1, 2.0}};
  std::vector<double> f{1.0, -1.0};
  const Graph g(2, std::move(edges), std::move(f));

  const FlowSolution sol = kirchhoff_solve(g, Conductivities{{4.0}});
  REQUIRE(sol.pressure[0] == Approx(0.25));
  REQUIRE(sol.pressure[1] == Approx(-0.25));
  REQUIRE(sol.flux[0] == Approx(1.0));
  REQUIRE(transport_cost(g, sol.flux) == Approx(2.0));
}

TEST_CASE("Kirchhoff solve conserves mass at every vertex") {
  const Graph g = diamond();
  Conductivities d{{1.0, 0.5, 2.0, 0.25}};
  const FlowSolution sol = kirchhoff_solve(g, d);

  const std::vector<double> out = net_outflow(g, sol.flux);
  REQUIRE(out[0] == Approx(1.0).epsilon(1e-10));
  REQUIRE(out[1] == Approx(0.0).margin(1e-10));
  REQUIRE(out[2] == Approx(-1.0).epsilon(1e-10));
  REQUIRE(out[3] == Approx(0.0).margin(1e-10));

  double mean = 0.0;
  for (double p : sol.pressure) mean += p;
  REQUIRE(mean == Approx(0.0).margin(1e-12));
}

TEST_CASE("parallel-path current split at uniform conductivity") {
  const Graph g = diamond();
  const FlowSolution sol = kirchhoff_solve(g, Conductivities::uniform(4, 1.0));
  // Path conductances 1/2 and 1/3 -> split 0.6 / 0.4.
  REQUIRE(sol.flux[0] == Approx(0.6));
  REQUIRE(sol.flux[1] == Approx(0.6));
  REQUIRE(sol.flux[2] == Approx(0.4));
  REQUIRE(sol.flux[3] == Approx(0.4));
  REQUIRE(transport_cost(g, sol.flux) == Approx(2.4));
}

TEST_CASE("evolution concentrates on the shorter path") {
  const Graph g = diamond();
  const EvolveResult res = evolve(g, Conductivities::uniform(4, 1.0));

  REQUIRE(res.converged);
  REQUIRE(res.trace.front().step == 0);
  REQUIRE(res.trace.front().t == 0.0);
  REQUIRE(res.trace.front().dt == 0.01);
  REQUIRE(res.trace.front().cost == Approx(2.4));

  // Steady state: unit flux along 0-1-2, nothing along 0-3-2.
  REQUIRE(transport_cost(g, res.flux) == Approx(2.0).margin(1e-6));
  const double dmax = *std::max_element(res.d.values.begin(), res.d.values.end());
  std::vector<int> support;
  for (std::size_t e = 0; e < res.d.values.size(); ++e) {
    if (res.d.values[e] > 1e-6 * dmax) support.push_back(static_cast<int>(e));
  }
  const std::vector<int> want{0, 1};
  REQUIRE(support == want);

  // Cost is non-increasing along the whole trajectory.
  for (std::size_t j = 0; j + 1 < res.trace.size(); ++j) {
    REQUIRE(res.trace[j + 1].cost <= res.trace[j].cost * (1.0 + 1e-10));
    REQUIRE(res.trace[j + 1].t == Approx(res.trace[j].t + res.trace[j].dt));
  }
}

TEST_CASE("floored conductivities can disconnect the source") {
  std::vector<GraphEdge> edges{{0, 1, 1.0}, {1, 2, 1.0}};
  std::vector<double> f{1.0, 0.0, -1.0};
  const Graph g(3, std::move(edges), std::move(f));

  const Conductivities d{{1.0, 1e-12}};
  REQUIRE_THROWS_AS(kirchhoff_solve(g, d), SingularSystemError);
}

TEST_CASE("graph construction validates its input") {
  const std::vector<GraphEdge> one_edge{{0, 1, 1.0}};
  const std::vector<double> balanced{1.0, -1.0};

  const std::vector<double> empty_f{0.0};
  REQUIRE_THROWS_AS(Graph(1, {}, empty_f), ContractError);

  const std::vector<double> short_f{1.0};
  REQUIRE_THROWS_AS(Graph(2, one_edge, short_f), ContractError);

  const std::vector<double> unbalanced{1.0, -0.5};
  REQUIRE_THROWS_AS(Graph(2, one_edge, unbalanced), ContractError);

  const std::vector<GraphEdge> out_of_range{{0, 5, 1.0}};
  REQUIRE_THROWS_AS(Graph(2, out_of_range, balanced), ContractError);

  const std::vector<GraphEdge> self_loop{{1, 1, 1.0}};
  REQUIRE_THROWS_AS(Graph(2, self_loop, balanced), ContractError);

  const std::vector<GraphEdge> zero_length{{0, 1, 0.0}};
  REQUIRE_THROWS_AS(Graph(2, zero_length, balanced), ContractError);

  const std::vector<double> three_f{1.0, -1.0, 0.0};
  REQUIRE_THROWS_AS(Graph(3, one_edge, three_f), ContractError);
}

TEST_CASE("conductivity and cost validation") {
  const Graph g = diamond();
  const Conductivities wrong_size{{1.0}};
  REQUIRE_THROWS_AS(kirchhoff_solve(g, wrong_size), ContractError);
  const Conductivities negative{{1.0, -1.0, 1.0, 1.0}};
  REQUIRE_THROWS_AS(kirchhoff_solve(g, negative), ContractError);
  const std::vector<double> short_flux{1.0};
  REQUIRE_THROWS_AS(transport_cost(g, short_flux), ContractError);
}

TEST_CASE("evolution reports non-convergence with partial results") {
  const Graph g = diamond();
  try {
    evolve(g, Conductivities::uniform(4, 1.0), StepSchedule{}, 5e-9, 2);
    FAIL("expected EvolveNonConvergenceError");
  } catch (const EvolveNonConvergenceError& e) {
    REQUIRE(e.result().steps == 2);
    REQUIRE(e.result().trace.size() == 2);
    REQUIRE_FALSE(e.result().converged);
    for (double v : e.result().d.values) REQUIRE(v > 0.0);
  }

  REQUIRE_THROWS_AS(evolve(g, Conductivities::uniform(4, 1.0), StepSchedule{}, -1.0),
                    ContractError);
  REQUIRE_THROWS_AS(evolve(g, Conductivities::uniform(4, 1.0), StepSchedule{}, 5e-9, 0),
                    ContractError);
}
