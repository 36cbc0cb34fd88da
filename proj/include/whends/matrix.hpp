#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "whends/common.hpp"

namespace whends {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Vectors that participate in matrix
// expressions are represented as n-by-1 matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix from_vec(const Vec& v) {
    Matrix m(v.size(), 1);
    m.data_ = v;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator[](std::size_t k) { return data_[k]; }
  double operator[](std::size_t k) const { return data_[k]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  Vec to_vec() const { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  void fill(double v) { data_.assign(data_.size(), v); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* where) {
  if (!a.same_shape(b))
    throw ShapeMismatch(std::string(where) + ": " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
}

// C = A * B with ikj loop order for cache friendliness.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw ShapeMismatch("matmul: " + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()));
  Matrix c(a.rows(), b.cols());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) c(i, j) += aip * b(p, j);
    }
  }
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix c = a;
  for (std::size_t k = 0; k < c.size(); ++k) c[k] += b[k];
  return c;
}

inline Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sub");
  Matrix c = a;
  for (std::size_t k = 0; k < c.size(); ++k) c[k] -= b[k];
  return c;
}

inline Matrix scale(const Matrix& a, double s) {
  Matrix c = a;
  for (std::size_t k = 0; k < c.size(); ++k) c[k] *= s;
  return c;
}

inline double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * a[k];
  return std::sqrt(s);
}

inline double max_abs(const Matrix& a) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s = std::max(s, std::abs(a[k]));
  return s;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s = std::max(s, std::abs(a[k] - b[k]));
  return s;
}

inline bool all_finite(const Matrix& a) {
  for (std::size_t k = 0; k < a.size(); ++k)
    if (!std::isfinite(a[k])) return false;
  return true;
}

}  // namespace whends
