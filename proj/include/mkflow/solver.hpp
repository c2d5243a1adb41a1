#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mkflow/errors.hpp"
#include "mkflow/sparse.hpp"

namespace mkflow {

// Zero fill-in incomplete Cholesky A ~ L L^T on the lower-triangular pattern
// of A. compute() reports breakdown (non-positive pivot) instead of throwing;
// the solver then falls back to the diagonal preconditioner.
struct Ic0Factorization {
  int n = 0;
  std::vector<int> row_ptr;
  std::vector<int> col;     // strictly lower entries, sorted
  std::vector<double> val;  // matching entries of L
  std::vector<double> diag; // L_ii
  bool valid = false;

  static Ic0Factorization compute(const SparseSpd& a) {
    Ic0Factorization f;
    f.n = a.n;
    f.row_ptr.assign(static_cast<std::size_t>(a.n) + 1, 0);
    f.col.reserve(a.nnz() / 2);
    f.val.reserve(a.nnz() / 2);
    f.diag.assign(static_cast<std::size_t>(a.n), 0.0);

    std::vector<double> rhs_diag(static_cast<std::size_t>(a.n), 0.0);
    for (int i = 0; i < a.n; ++i) {
      for (int k = a.row_ptr[static_cast<std::size_t>(i)];
           k < a.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
        const int j = a.col[static_cast<std::size_t>(k)];
        if (j < i) {
          f.col.push_back(j);
          f.val.push_back(a.val[static_cast<std::size_t>(k)]);
        } else if (j == i) {
          rhs_diag[static_cast<std::size_t>(i)] = a.val[static_cast<std::size_t>(k)];
        }
      }
      f.row_ptr[static_cast<std::size_t>(i) + 1] = static_cast<int>(f.col.size());
    }

    for (int i = 0; i < f.n; ++i) {
      const int ib = f.row_ptr[static_cast<std::size_t>(i)];
      const int ie = f.row_ptr[static_cast<std::size_t>(i) + 1];
      for (int k = ib; k < ie; ++k) {
        const int j = f.col[static_cast<std::size_t>(k)];
        // L_ij = (A_ij - sum_{m<j} L_im L_jm) / L_jj, restricted to the pattern.
        double s = f.val[static_cast<std::size_t>(k)];
        const int jb = f.row_ptr[static_cast<std::size_t>(j)];
        const int je = f.row_ptr[static_cast<std::size_t>(j) + 1];
        int p = ib, q = jb;
        while (p < k && q < je) {
          const int cp = f.col[static_cast<std::size_t>(p)];
          const int cq = f.col[static_cast<std::size_t>(q)];
          if (cp == cq) {
            s -= f.val[static_cast<std::size_t>(p)] * f.val[static_cast<std::size_t>(q)];
            ++p;
            ++q;
          } else if (cp < cq) {
            ++p;
          } else {
            ++q;
          }
        }
        f.val[static_cast<std::size_t>(k)] = s / f.diag[static_cast<std::size_t>(j)];
      }
      double d = rhs_diag[static_cast<std::size_t>(i)];
      for (int k = ib; k < ie; ++k) {
        d -= f.val[static_cast<std::size_t>(k)] * f.val[static_cast<std::size_t>(k)];
      }
      if (!(d > 1e-14 * rhs_diag[static_cast<std::size_t>(i)]) || !std::isfinite(d)) {
        f.valid = false;
        return f;
      }
      f.diag[static_cast<std::size_t>(i)] = std::sqrt(d);
    }
    f.valid = true;
    return f;
  }

  // z = (L L^T)^{-1} r.
  void apply(std::span<const double> r, std::span<double> z) const {
    for (int i = 0; i < n; ++i) {
      double s = r[static_cast<std::size_t>(i)];
      for (int k = row_ptr[static_cast<std::size_t>(i)];
           k < row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
        s -= val[static_cast<std::size_t>(k)] *
             z[static_cast<std::size_t>(col[static_cast<std::size_t>(k)])];
      }
      z[static_cast<std::size_t>(i)] = s / diag[static_cast<std::size_t>(i)];
    }
    for (int i = n - 1; i >= 0; --i) {
      const double zi = z[static_cast<std::size_t>(i)] / diag[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(i)] = zi;
      for (int k = row_ptr[static_cast<std::size_t>(i)];
           k < row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
        z[static_cast<std::size_t>(col[static_cast<std::size_t>(k)])] -=
            val[static_cast<std::size_t>(k)] * zi;
      }
    }
  }
};

struct SolveOptions {
  double rel_tol = 1e-10;
  long max_iter = 0;  // 0 -> 10 n
};

struct SolveReport {
  long iterations = 0;
  double rel_residual = 0.0;
  bool jacobi_fallback = false;
};

// Preconditioned CG for the consistent semidefinite Neumann system A u = b
// with nullspace span{1}. The constant component is projected out of the
// iterate and the residual every iteration; on return the solution is
// shifted to zero weighted mean (weights default to uniform).
//
// Throws SolverError when max_iter is exceeded.
inline std::vector<double> solve_neumann(const SparseSpd& a, std::span<const double> b,
                                         const SolveOptions& opts = {},
                                         std::span<const double> mean_weights = {},
                                         SolveReport* report = nullptr) {
  const int n = a.n;
  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  SolveReport rep;

  auto shift_to_weighted_mean = [&]() {
    double wsum = 0.0, xw = 0.0;
    if (mean_weights.empty()) {
      for (double v : x) xw += v;
      wsum = static_cast<double>(n);
    } else {
      for (int i = 0; i < n; ++i) {
        wsum += mean_weights[static_cast<std::size_t>(i)];
        xw += mean_weights[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
      }
    }
    const double shift = xw / wsum;
    for (double& v : x) v -= shift;
  };

  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    if (report) *report = rep;
    return x;
  }

  Ic0Factorization ic0 = Ic0Factorization::compute(a);
  std::vector<double> inv_diag;
  if (!ic0.valid) {
    rep.jacobi_fallback = true;
    inv_diag = a.diagonal();
    for (double& d : inv_diag) d = d > 0.0 ? 1.0 / d : 1.0;
  }
  auto precondition = [&](std::span<const double> r, std::span<double> z) {
    if (ic0.valid) {
      ic0.apply(r, z);
    } else {
      for (int i = 0; i < n; ++i) {
        z[static_cast<std::size_t>(i)] =
            inv_diag[static_cast<std::size_t>(i)] * r[static_cast<std::size_t>(i)];
      }
    }
  };

  const long max_iter = opts.max_iter > 0 ? opts.max_iter : 10L * n;
  std::vector<double> r(b.begin(), b.end());
  project_out_constant(r);
  std::vector<double> z(static_cast<std::size_t>(n));
  std::vector<double> p(static_cast<std::size_t>(n));
  std::vector<double> q(static_cast<std::size_t>(n));

  double rnorm = norm2(r);
  if (rnorm <= opts.rel_tol * bnorm) {
    shift_to_weighted_mean();
    rep.rel_residual = rnorm / bnorm;
    if (report) *report = rep;
    return x;
  }

  precondition(r, z);
  p = z;
  double rz = dot(r, z);

  for (long it = 1; it <= max_iter; ++it) {
    a.multiply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) {
      throw SolverError("[fem] CG breakdown: direction with non-positive curvature",
                        rnorm / bnorm, it);
    }
    const double alpha = rz / pq;
    for (int i = 0; i < n; ++i) {
      x[static_cast<std::size_t>(i)] += alpha * p[static_cast<std::size_t>(i)];
      r[static_cast<std::size_t>(i)] -= alpha * q[static_cast<std::size_t>(i)];
    }
    project_out_constant(x);
    project_out_constant(r);
    rnorm = norm2(r);
    rep.iterations = it;
    if (rnorm <= opts.rel_tol * bnorm) {
      rep.rel_residual = rnorm / bnorm;
      shift_to_weighted_mean();
      if (report) *report = rep;
      return x;
    }
    precondition(r, z);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int i = 0; i < n; ++i) {
      p[static_cast<std::size_t>(i)] =
          z[static_cast<std::size_t>(i)] + beta * p[static_cast<std::size_t>(i)];
    }
  }
  throw SolverError("[fem] CG did not converge within " + std::to_string(max_iter) +
                        " iterations (relative residual " + std::to_string(rnorm / bnorm) + ")",
                    rnorm / bnorm, max_iter);
}

}  // namespace mkflow
