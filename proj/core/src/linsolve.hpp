#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace marlab::detail {

// Dense Ax = b via Gaussian elimination with partial pivoting. `a` is n x n
// row-major and consumed in place. The systems solved here are (I - gamma*P)
// with P substochastic, which are strictly diagonally dominant.
inline std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  if (a.size() != n * n) throw std::invalid_argument("solve_dense: shape mismatch");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    double best = std::abs(a[col * n + col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double v = std::abs(a[r * n + col]);
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best == 0.0) throw std::runtime_error("solve_dense: singular matrix");
    if (pivot != col) {
      for (std::size_t k = col; k < n; ++k) std::swap(a[pivot * n + k], a[col * n + k]);
      std::swap(b[pivot], b[col]);
    }
    const double inv = 1.0 / a[col * n + col];
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] * inv;
      if (f == 0.0) continue;
      a[r * n + col] = 0.0;
      for (std::size_t k = col + 1; k < n; ++k) a[r * n + k] -= f * a[col * n + k];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    double acc = b[r];
    for (std::size_t k = r + 1; k < n; ++k) acc -= a[r * n + k] * x[k];
    x[r] = acc / a[r * n + r];
  }
  return x;
}

}  // namespace marlab::detail
