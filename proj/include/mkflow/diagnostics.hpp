#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mkflow/dynamics.hpp"
#include "mkflow/errors.hpp"
#include "mkflow/fem.hpp"
#include "mkflow/mesh.hpp"

namespace mkflow {

inline constexpr double kSupportFrac = 0.01;

// L(mu) = 1/2 (integral of mu) * (integral of mu |grad U(mu)|^2). Scale
// invariant: U(c mu) = U(mu)/c cancels the mass factor.
inline double lyapunov(const MeshPair& pair, const DensityField& mu, const PotentialField& u) {
  const std::vector<double> sq = coarse_gradient_square_means(pair, u);
  double mass = 0.0, energy = 0.0;
  for (int s = 0; s < pair.coarse.triangle_count(); ++s) {
    const double w = mu.values[static_cast<std::size_t>(s)] * pair.coarse.triangle_area(s);
    mass += w;
    energy += w * sq[static_cast<std::size_t>(s)];
  }
  return 0.5 * mass * energy;
}

struct BoundViolation {
  int step = 0;
  double value = 0.0;
  double bound = 0.0;
};

struct CheckReport {
  std::vector<BoundViolation> violations;
  bool ok() const { return violations.empty(); }
};

// Flags steps where the Lyapunov value rises by more than rel_tol relative
// to the previous value.
inline CheckReport check_lyapunov_descent(std::span<const TraceRecord> trace,
                                          double rel_tol = 1e-10) {
  if (trace.size() < 2) {
    throw ContractError("[diagnostics] descent check needs at least two records");
  }
  CheckReport report;
  for (std::size_t j = 1; j < trace.size(); ++j) {
    const double prev = trace[j - 1].lyapunov;
    const double bound = prev + rel_tol * std::abs(prev);
    if (trace[j].lyapunov > bound) {
      report.violations.push_back({trace[j].step, trace[j].lyapunov, bound});
    }
  }
  return report;
}

struct MassBoundReport {
  std::vector<BoundViolation> mass_violations;
  std::vector<BoundViolation> flux_violations;
  bool ok() const { return mass_violations.empty() && flux_violations.empty(); }
};

// Checks the a priori bounds: total mass never exceeds its initial value
// plus sqrt(L0), and the L1 flux never exceeds sqrt(L0).
inline MassBoundReport check_mass_bound(std::span<const TraceRecord> trace,
                                        double initial_mass, double initial_lyapunov,
                                        double rel_tol = 1e-8) {
  if (!(initial_lyapunov >= 0.0)) {
    throw ContractError("[diagnostics] initial Lyapunov value must be nonnegative");
  }
  const double root = std::sqrt(initial_lyapunov);
  const double mass_bound = initial_mass + root;
  MassBoundReport report;
  for (const TraceRecord& rec : trace) {
    if (rec.mass > mass_bound * (1.0 + rel_tol)) {
      report.mass_violations.push_back({rec.step, rec.mass, mass_bound});
    }
    if (rec.flux_l1 > root * (1.0 + rel_tol) + rel_tol) {
      report.flux_violations.push_back({rec.step, rec.flux_l1, root});
    }
  }
  return report;
}

// Discrete positivity estimate for k = 1: the minimum density at step j
// stays above lambda(mu0) * prod_{i<j} (1 - dt_i). Records whose minimum
// sits at the clamp are exempt, the clamp already guarantees them.
inline CheckReport check_positivity_decay(std::span<const TraceRecord> trace,
                                          const DensityField& mu0, double tol = 1e-12) {
  if (mu0.values.empty()) throw ContractError("[diagnostics] empty initial density");
  const double lambda0 = *std::min_element(mu0.values.begin(), mu0.values.end());
  CheckReport report;
  double product = 1.0;
  for (const TraceRecord& rec : trace) {
    const double bound = lambda0 * product;
    const bool clamped = rec.min_mu <= kMuFloor * (1.0 + 1e-12);
    if (!clamped && rec.min_mu < bound - tol) {
      report.violations.push_back({rec.step, rec.min_mu, bound});
    }
    product *= std::max(1.0 - rec.dt, 0.0);
  }
  return report;
}

struct MkResidual {
  // max over support cells of | |grad u|_s - k_s |
  double support_residual = 0.0;
  // max over all cells of (|grad u|_s - k_s)_+
  double constraint_violation = 0.0;
};

// Measures how well a (steady) pair mu, u satisfies the transport
// optimality system: gradient magnitude equal to k on the support of mu and
// at most k everywhere.
inline MkResidual mk_residual(const MeshPair& pair, const DensityField& mu,
                              const PotentialField& u, const ResistanceField& k,
                              double support_frac = kSupportFrac) {
  k.validate(pair.coarse.triangle_count());
  if (mu.values.size() != k.values.size()) {
    throw ContractError("[diagnostics] density and resistance sizes disagree");
  }
  const double max_mu = *std::max_element(mu.values.begin(), mu.values.end());
  const double threshold = support_frac * max_mu;
  const std::vector<double> gradmag = coarse_gradient_magnitudes(pair, u);

  MkResidual res;
  bool any_support = false;
  for (std::size_t s = 0; s < mu.values.size(); ++s) {
    const double excess = gradmag[s] - k.values[s];
    res.constraint_violation = std::max(res.constraint_violation, excess);
    if (mu.values[s] > threshold) {
      any_support = true;
      res.support_residual = std::max(res.support_residual, std::abs(excess));
    }
  }
  res.constraint_violation = std::max(res.constraint_violation, 0.0);
  if (!any_support) {
    throw DegenerateStateError("[diagnostics] density support is empty");
  }
  return res;
}

struct DiagnosticsRecord {
  double t = 0.0;
  double lyapunov = 0.0;
  double total_mass = 0.0;
  double flux_l1 = 0.0;
  double min_mu = 0.0;
  MkResidual mk;
};

inline DiagnosticsRecord summarize(const MeshPair& pair, const DensityField& mu,
                                   const PotentialField& u, const ResistanceField& k,
                                   double t, double support_frac = kSupportFrac) {
  DiagnosticsRecord rec;
  rec.t = t;
  rec.lyapunov = lyapunov(pair, mu, u);
  const std::vector<double> flux = flux_field(pair, mu, u);
  for (int s = 0; s < pair.coarse.triangle_count(); ++s) {
    rec.total_mass += mu.values[static_cast<std::size_t>(s)] * pair.coarse.triangle_area(s);
    rec.flux_l1 += flux[static_cast<std::size_t>(s)] * pair.coarse.triangle_area(s);
  }
  rec.min_mu = *std::min_element(mu.values.begin(), mu.values.end());
  rec.mk = mk_residual(pair, mu, u, k, support_frac);
  if (!(rec.total_mass > 0.0) || !std::isfinite(rec.lyapunov) || !std::isfinite(rec.flux_l1)) {
    throw DegenerateStateError("[diagnostics] non-finite or massless state");
  }
  return rec;
}

}  // namespace mkflow
