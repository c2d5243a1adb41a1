#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace mkflow {

// Symmetric sparse matrix in compressed-row form. Both triangles are stored;
// column indices are sorted within each row. For the pure Neumann stiffness
// the row sums vanish (constants span the nullspace).
struct SparseSpd {
  int n = 0;
  std::vector<int> row_ptr;  // size n+1
  std::vector<int> col;
  std::vector<double> val;

  std::size_t nnz() const { return col.size(); }

  void multiply(std::span<const double> x, std::span<double> y) const {
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int k = row_ptr[static_cast<std::size_t>(i)];
           k < row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
        s += val[static_cast<std::size_t>(k)] *
             x[static_cast<std::size_t>(col[static_cast<std::size_t>(k)])];
      }
      y[static_cast<std::size_t>(i)] = s;
    }
  }

  std::vector<double> multiply(std::span<const double> x) const {
    std::vector<double> y(static_cast<std::size_t>(n));
    multiply(x, y);
    return y;
  }

  // Index into val of entry (i, j), or -1 if outside the pattern.
  int find(int i, int j) const {
    const int lo = row_ptr[static_cast<std::size_t>(i)];
    const int hi = row_ptr[static_cast<std::size_t>(i) + 1];
    auto begin = col.begin() + lo;
    auto end = col.begin() + hi;
    auto it = std::lower_bound(begin, end, j);
    if (it == end || *it != j) return -1;
    return static_cast<int>(lo + (it - begin));
  }

  double at(int i, int j) const {
    const int k = find(i, j);
    return k < 0 ? 0.0 : val[static_cast<std::size_t>(k)];
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = at(i, i);
    return d;
  }

  // max_i |sum_j A_ij| / max_i sum_j |A_ij|, the relative deviation from the
  // zero-row-sum (Neumann compatibility) property.
  double max_relative_row_sum() const {
    double worst = 0.0;
    double scale = 0.0;
    for (int i = 0; i < n; ++i) {
      double s = 0.0, a = 0.0;
      for (int k = row_ptr[static_cast<std::size_t>(i)];
           k < row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
        s += val[static_cast<std::size_t>(k)];
        a += std::abs(val[static_cast<std::size_t>(k)]);
      }
      worst = std::max(worst, std::abs(s));
      scale = std::max(scale, a);
    }
    return scale > 0.0 ? worst / scale : 0.0;
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Remove the Euclidean-constant component: v <- v - mean(v).
inline void project_out_constant(std::span<double> v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  for (double& x : v) x -= m;
}

}  // namespace mkflow
