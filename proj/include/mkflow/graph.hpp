#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "mkflow/errors.hpp"
#include "mkflow/schedule.hpp"

namespace mkflow {

// Lower clamp on edge conductivities. Keeps the weighted Laplacian
// invertible on the zero-mean space while an edge dies out.
inline constexpr double kConductivityFloor = 1e-12;

struct GraphEdge {
  int u = 0;
  int v = 0;
  double length = 1.0;
};

// Undirected network with per-vertex source terms summing to zero.
class Graph {
 public:
  Graph(int vertices, std::vector<GraphEdge> edges, std::vector<double> source)
      : n_(vertices), edges_(std::move(edges)), source_(std::move(source)) {
    if (n_ < 2) throw ContractError("[graph] need at least two vertices");
    if (static_cast<int>(source_.size()) != n_) {
      throw ContractError("[graph] source size does not match vertex count");
    }
    double sum = 0.0, mass = 0.0;
    for (double f : source_) {
      if (!std::isfinite(f)) throw ContractError("[graph] non-finite source");
      sum += f;
      mass += std::abs(f);
    }
    if (mass > 0.0 && std::abs(sum) > 1e-12 * mass) {
      throw ContractError("[graph] source terms must sum to zero");
    }
    for (const GraphEdge& e : edges_) {
      if (e.u < 0 || e.u >= n_ || e.v < 0 || e.v >= n_) {
        throw ContractError("[graph] edge endpoint out of range");
      }
      if (e.u == e.v) throw ContractError("[graph] self-loops are not allowed");
      if (!(e.length > 0.0) || !std::isfinite(e.length)) {
        throw ContractError("[graph] edge lengths must be positive");
      }
    }
    if (!connected()) throw ContractError("[graph] graph must be connected");
  }

  int vertex_count() const { return n_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  const std::vector<double>& source() const { return source_; }

 private:
  bool connected() const {
    std::vector<char> seen(static_cast<std::size_t>(n_), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n_));
    for (const GraphEdge& e : edges_) {
      adj[static_cast<std::size_t>(e.u)].push_back(e.v);
      adj[static_cast<std::size_t>(e.v)].push_back(e.u);
    }
    int reached = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : adj[static_cast<std::size_t>(v)]) {
        if (!seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = 1;
          ++reached;
          stack.push_back(w);
        }
      }
    }
    return reached == n_;
  }

  int n_;
  std::vector<GraphEdge> edges_;
  std::vector<double> source_;
};

struct Conductivities {
  std::vector<double> values;

  static Conductivities uniform(int edges, double value) {
    return Conductivities{std::vector<double>(static_cast<std::size_t>(edges), value)};
  }

  void validate(int edges) const {
    if (static_cast<int>(values.size()) != edges) {
      throw ContractError("[graph] conductivity size does not match edge count");
    }
    for (double d : values) {
      if (!(d > 0.0) || !std::isfinite(d)) {
        throw ContractError("[graph] conductivities must be positive");
      }
    }
  }
};

struct FlowSolution {
  std::vector<double> pressure;  // zero mean
  std::vector<double> flux;      // per edge, oriented u -> v
};

// J(Q) = sum_e |Q_e| L_e.
inline double transport_cost(const Graph& g, const std::vector<double>& flux) {
  if (flux.size() != g.edges().size()) {
    throw ContractError("[graph] flux size does not match edge count");
  }
  double j = 0.0;
  for (std::size_t e = 0; e < flux.size(); ++e) {
    j += std::abs(flux[e]) * g.edges()[e].length;
  }
  return j;
}

// Solves the weighted Laplacian system L p = f with weights D_e / L_e and
// zero-mean pressure, then Q_e = D_e (p_u - p_v) / L_e. Graphs here are
// small, so a dense factorization of the rank-one shifted matrix is enough:
// (L + c 11^T) p = f has 1^T p = 0 when 1^T f = 0, and then L p = f.
inline FlowSolution kirchhoff_solve(const Graph& g, const Conductivities& d) {
  d.validate(g.edge_count());
  const int n = g.vertex_count();
  const std::vector<double>& f = g.source();

  // A vertex with nonzero source cut off by floored edges makes the live
  // part of the system inconsistent; detect it before factorizing.
  {
    std::vector<int> comp(static_cast<std::size_t>(n));
    std::iota(comp.begin(), comp.end(), 0);
    const auto root = [&](int v) {
      while (comp[static_cast<std::size_t>(v)] != v) {
        comp[static_cast<std::size_t>(v)] =
            comp[static_cast<std::size_t>(comp[static_cast<std::size_t>(v)])];
        v = comp[static_cast<std::size_t>(v)];
      }
      return v;
    };
    for (std::size_t e = 0; e < d.values.size(); ++e) {
      if (d.values[e] > kConductivityFloor) {
        comp[static_cast<std::size_t>(root(g.edges()[e].u))] = root(g.edges()[e].v);
      }
    }
    std::vector<double> comp_sum(static_cast<std::size_t>(n), 0.0);
    double mass = 0.0;
    for (int v = 0; v < n; ++v) {
      comp_sum[static_cast<std::size_t>(root(v))] += f[static_cast<std::size_t>(v)];
      mass += std::abs(f[static_cast<std::size_t>(v)]);
    }
    for (double s : comp_sum) {
      if (std::abs(s) > 1e-12 * mass) {
        throw SingularSystemError(
            "[graph] source is cut off by floored conductivities; system is "
            "effectively singular");
      }
    }
  }

  std::vector<double> a(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
  const auto at = [&](int i, int j) -> double& {
    return a[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
             static_cast<std::size_t>(j)];
  };
  double trace = 0.0;
  for (std::size_t e = 0; e < d.values.size(); ++e) {
    const GraphEdge& ed = g.edges()[e];
    const double w = d.values[e] / ed.length;
    at(ed.u, ed.u) += w;
    at(ed.v, ed.v) += w;
    at(ed.u, ed.v) -= w;
    at(ed.v, ed.u) -= w;
    trace += 2.0 * w;
  }
  const double shift = trace / (static_cast<double>(n) * static_cast<double>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) at(i, j) += shift;
  }

  // In-place Cholesky, lower triangle.
  for (int j = 0; j < n; ++j) {
    double diag = at(j, j);
    for (int s = 0; s < j; ++s) diag -= at(j, s) * at(j, s);
    if (!(diag > 0.0)) {
      throw SingularSystemError("[graph] Laplacian factorization broke down");
    }
    at(j, j) = std::sqrt(diag);
    for (int i = j + 1; i < n; ++i) {
      double v = at(i, j);
      for (int s = 0; s < j; ++s) v -= at(i, s) * at(j, s);
      at(i, j) = v / at(j, j);
    }
  }
  std::vector<double> p(f.begin(), f.end());
  for (int i = 0; i < n; ++i) {
    double v = p[static_cast<std::size_t>(i)];
    for (int s = 0; s < i; ++s) v -= at(i, s) * p[static_cast<std::size_t>(s)];
    p[static_cast<std::size_t>(i)] = v / at(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    double v = p[static_cast<std::size_t>(i)];
    for (int s = i + 1; s < n; ++s) v -= at(s, i) * p[static_cast<std::size_t>(s)];
    p[static_cast<std::size_t>(i)] = v / at(i, i);
  }
  const double mean = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(n);
  for (double& v : p) v -= mean;

  FlowSolution sol;
  sol.pressure = std::move(p);
  sol.flux.resize(d.values.size());
  std::vector<double> residual(f.begin(), f.end());
  for (std::size_t e = 0; e < d.values.size(); ++e) {
    const GraphEdge& ed = g.edges()[e];
    sol.flux[e] = d.values[e] *
                  (sol.pressure[static_cast<std::size_t>(ed.u)] -
                   sol.pressure[static_cast<std::size_t>(ed.v)]) /
                  ed.length;
    residual[static_cast<std::size_t>(ed.u)] -= sol.flux[e];
    residual[static_cast<std::size_t>(ed.v)] += sol.flux[e];
  }
  double rnorm = 0.0, fnorm = 0.0;
  for (int v = 0; v < n; ++v) {
    rnorm += std::abs(residual[static_cast<std::size_t>(v)]);
    fnorm += std::abs(f[static_cast<std::size_t>(v)]);
  }
  if (fnorm > 0.0 && rnorm > 1e-10 * fnorm) {
    throw SolverError("[graph] Kirchhoff balance residual too large", rnorm / fnorm, n);
  }
  return sol;
}

struct GraphTraceRecord {
  int step = 0;
  double t = 0.0;
  double dt = 0.0;
  double variation = 0.0;
  double cost = 0.0;
};

struct EvolveResult {
  Conductivities d;
  std::vector<double> flux;
  std::vector<double> pressure;
  std::vector<GraphTraceRecord> trace;
  bool converged = false;
  int steps = 0;
};

class EvolveNonConvergenceError : public Error {
 public:
  EvolveNonConvergenceError(const std::string& msg, EvolveResult result)
      : Error(msg), result_(std::make_shared<EvolveResult>(std::move(result))) {}
  const EvolveResult& result() const { return *result_; }

 private:
  std::shared_ptr<EvolveResult> result_;
};

// Forward Euler on D' = |Q| - D with the adaptive step schedule; stops when
// the length-weighted relative D-variation drops below tau.
inline EvolveResult evolve(const Graph& g, const Conductivities& d0,
                           const StepSchedule& schedule = {}, double tau = 5e-9,
                           int max_steps = 50000) {
  schedule.validate();
  d0.validate(g.edge_count());
  if (!(tau > 0.0)) throw ContractError("[graph] tau must be positive");
  if (max_steps < 1) throw ContractError("[graph] max_steps must be at least 1");

  EvolveResult res;
  res.d = d0;
  double t = 0.0;
  double dt = schedule.dt0;
  for (int j = 0; j < max_steps; ++j) {
    FlowSolution sol = kirchhoff_solve(g, res.d);
    double diff2 = 0.0, old2 = 0.0;
    std::vector<double> next(res.d.values.size());
    for (std::size_t e = 0; e < next.size(); ++e) {
      const double cand =
          res.d.values[e] + dt * (std::abs(sol.flux[e]) - res.d.values[e]);
      next[e] = std::max(cand, kConductivityFloor);
      const double delta = next[e] - res.d.values[e];
      const double len = g.edges()[e].length;
      diff2 += len * delta * delta;
      old2 += len * res.d.values[e] * res.d.values[e];
    }
    if (!(old2 > 0.0)) {
      throw UndefinedVariationError("[graph] variation undefined: conductivities are zero");
    }
    GraphTraceRecord rec;
    rec.step = j;
    rec.t = t;
    rec.dt = dt;
    rec.variation = std::sqrt(diff2 / old2) / dt;
    rec.cost = transport_cost(g, sol.flux);
    res.trace.push_back(rec);

    res.d.values = std::move(next);
    res.flux = std::move(sol.flux);
    res.pressure = std::move(sol.pressure);
    t += dt;
    dt = schedule.next(dt);
    res.steps = j + 1;
    if (rec.variation <= tau) {
      FlowSolution fin = kirchhoff_solve(g, res.d);
      res.flux = std::move(fin.flux);
      res.pressure = std::move(fin.pressure);
      res.converged = true;
      return res;
    }
  }
  throw EvolveNonConvergenceError(
      "[graph] no steady state within " + std::to_string(max_steps) + " steps",
      std::move(res));
}

}  // namespace mkflow
