#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "edsh/errors.hpp"

namespace edsh {

// Row-major dense matrix of doubles; the single carrier type for features,
// factor matrices and codes-in-training.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  DenseMatrix() = default;

  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  DenseMatrix(std::size_t r, std::size_t c, std::vector<double> vals)
      : rows(r), cols(c), values(std::move(vals)) {
    if (values.size() != rows * cols)
      throw ShapeError("matrix literal holds " + std::to_string(values.size()) +
                       " values, expected " + std::to_string(rows * cols));
  }

  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

  bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }

  std::string shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

// Each output entry accumulates a(i,k)*b(k,j) over ascending k into one
// partial sum, so results are reproducible run to run; keep it that way.
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.rows)
    throw ShapeError("matmul: " + a.shape_str() + " * " + b.shape_str());
  DenseMatrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = &a.values[i * a.cols];
    double* crow = &c.values[i * b.cols];
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      const double* brow = &b.values[k * b.cols];
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

inline DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b))
    throw ShapeError("subtract: " + a.shape_str() + " vs " + b.shape_str());
  DenseMatrix c = a;
  for (std::size_t i = 0; i < c.values.size(); ++i) c.values[i] -= b.values[i];
  return c;
}

// y += s * x
inline void add_scaled(DenseMatrix& y, double s, const DenseMatrix& x) {
  if (!y.same_shape(x))
    throw ShapeError("add_scaled: " + y.shape_str() + " vs " + x.shape_str());
  for (std::size_t i = 0; i < y.values.size(); ++i) y.values[i] += s * x.values[i];
}

inline void scale_in_place(DenseMatrix& a, double s) {
  for (double& v : a.values) v *= s;
}

// Squared Frobenius norm.
inline double frob_sq(const DenseMatrix& a) {
  double s = 0.0;
  for (double v : a.values) s += v * v;
  return s;
}

inline double frob_norm(const DenseMatrix& a) { return std::sqrt(frob_sq(a)); }

// ||a - b||_F^2 without materializing the difference.
inline double frob_sq_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b))
    throw ShapeError("frob_sq_diff: " + a.shape_str() + " vs " + b.shape_str());
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    s += d * d;
  }
  return s;
}

}  // namespace edsh
