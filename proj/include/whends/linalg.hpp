#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "whends/matrix.hpp"

namespace whends {

// Numerical policy shared by the SPD machinery.
inline constexpr double kPivotFloor = 1e-12;    // Cholesky pivot below this => not PD
inline constexpr double kEigenFloor = 1e-10;    // eigenvalue clamp when forming Sigma^{-1/2}
inline constexpr double kCovJitter = 1e-6;      // jitter added to covariances before factorizing
inline constexpr double kSymmetryTol = 1e-10;

inline void require_symmetric(const Matrix& a, const char* where) {
  if (a.rows() != a.cols()) throw ShapeMismatch(std::string(where) + ": matrix not square");
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      if (std::abs(a(i, j) - a(j, i)) > kSymmetryTol)
        throw ShapeMismatch(std::string(where) + ": matrix not symmetric");
}

// Lower-triangular Cholesky factor L with L*L^T = sigma.
inline Matrix cholesky(const Matrix& sigma) {
  require_symmetric(sigma, "cholesky");
  const std::size_t n = sigma.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = sigma(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (diag <= kPivotFloor)
      throw NotPositiveDefinite("cholesky: pivot " + std::to_string(diag) + " at column " +
                                std::to_string(j));
    l(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = sigma(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

// Cyclic Jacobi eigensolver for symmetric matrices. Returns eigenvalues in
// descending order with matching orthonormal eigenvector columns.
inline std::pair<Vec, Matrix> sym_eig(const Matrix& sigma) {
  require_symmetric(sigma, "sym_eig");
  const std::size_t n = sigma.rows();
  Matrix a = sigma;
  Matrix v = Matrix::identity(n);
  const int max_sweeps = 100;
  const double scale = std::max(frobenius_norm(a), 1e-300);
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
    if (std::sqrt(off) <= 1e-14 * scale) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (sweep == max_sweeps) throw NoConvergence("sym_eig: Jacobi sweep limit reached");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  Vec eigvals(n);
  Matrix eigvecs(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    eigvals[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) eigvecs(i, j) = v(i, order[j]);
  }
  return {eigvals, eigvecs};
}

// Symmetric inverse square root: S with S*sigma*S^T = I, computed via the
// eigendecomposition with eigenvalues clamped at kEigenFloor.
inline Matrix inv_sqrt(const Matrix& sigma) {
  auto [eigvals, eigvecs] = sym_eig(sigma);
  const std::size_t n = sigma.rows();
  if (!eigvals.empty() && eigvals.back() <= kPivotFloor)
    throw NotPositiveDefinite("inv_sqrt: min eigenvalue " + std::to_string(eigvals.back()));
  Matrix scaled = eigvecs;  // columns scaled by lambda^{-1/2}
  for (std::size_t j = 0; j < n; ++j) {
    const double inv = 1.0 / std::sqrt(std::max(eigvals[j], kEigenFloor));
    for (std::size_t i = 0; i < n; ++i) scaled(i, j) *= inv;
  }
  return matmul(scaled, transpose(eigvecs));
}

// Row-major traversal of the lower triangle (j <= i) of a d x d matrix.
inline Vec flatten_lower(const Matrix& l) {
  if (l.rows() != l.cols()) throw ShapeMismatch("flatten_lower: matrix not square");
  const std::size_t d = l.rows();
  Vec out;
  out.reserve(d * (d + 1) / 2);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) out.push_back(l(i, j));
  return out;
}

inline Matrix unflatten_lower(const Vec& flat, std::size_t d) {
  if (flat.size() != d * (d + 1) / 2)
    throw ShapeMismatch("unflatten_lower: length " + std::to_string(flat.size()) +
                        " for dim " + std::to_string(d));
  Matrix l(d, d);
  std::size_t k = 0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) l(i, j) = flat[k++];
  return l;
}

}  // namespace whends
