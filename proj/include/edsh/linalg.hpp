#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "edsh/matrix.hpp"

namespace edsh {

namespace detail {

inline double max_abs(const DenseMatrix& a) {
  double m = 0.0;
  for (double v : a.values) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace detail

// Solves a * x = b for symmetric positive definite a via Cholesky (L L^T).
// Asymmetry beyond tolerance and non-positive pivots are caller bugs and
// are reported as errors rather than patched over.
inline DenseMatrix spd_solve(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows != a.cols)
    throw ShapeError("spd_solve: matrix must be square, got " + a.shape_str());
  if (b.rows != a.rows)
    throw ShapeError("spd_solve: rhs rows " + std::to_string(b.rows) +
                     " do not match system size " + std::to_string(a.rows));
  const std::size_t n = a.rows;
  const double sym_tol = 1e-10 * (1.0 + detail::max_abs(a));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(a(i, j) - a(j, i)) > sym_tol)
        throw ArgumentError("spd_solve: matrix is not symmetric at (" +
                            std::to_string(i) + ", " + std::to_string(j) + ")");

  DenseMatrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d))
      throw SingularError("spd_solve: matrix is not positive definite", j);
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }

  DenseMatrix x = b;
  // forward substitution: L z = b
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      const double lik = l(i, k);
      for (std::size_t c = 0; c < x.cols; ++c) x(i, c) -= lik * x(k, c);
    }
    const double inv = 1.0 / l(i, i);
    for (std::size_t c = 0; c < x.cols; ++c) x(i, c) *= inv;
  }
  // back substitution: L^T x = z
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) {
      const double lki = l(k, i);
      for (std::size_t c = 0; c < x.cols; ++c) x(i, c) -= lki * x(k, c);
    }
    const double inv = 1.0 / l(i, i);
    for (std::size_t c = 0; c < x.cols; ++c) x(i, c) *= inv;
  }
  return x;
}

struct SvdResult {
  DenseMatrix u;              // left singular vectors, orthogonal
  std::vector<double> sigma;  // singular values, descending
  DenseMatrix v;              // right singular vectors, orthogonal
};

// One-sided Jacobi SVD for small square matrices (code-length scale):
// a = u * diag(sigma) * v^T. Plane rotations orthogonalize the columns of a
// working copy; the accumulated rotations form v and the normalized columns
// form u. Zero columns of the converged copy get u columns completed to an
// orthonormal basis so u stays orthogonal even for rank-deficient input.
inline SvdResult svd_small(const DenseMatrix& a) {
  if (a.rows != a.cols)
    throw ShapeError("svd_small: matrix must be square, got " + a.shape_str());
  const std::size_t n = a.rows;
  DenseMatrix w = a;
  DenseMatrix v = DenseMatrix::identity(n);
  const double tol = 1e-15;
  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          app += wp * wp;
          aqq += wq * wq;
          apq += wp * wq;
        }
        if (apq == 0.0 || std::abs(apq) <= tol * std::sqrt(app * aqq)) continue;
        rotated = true;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t =
            (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < n; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          w(i, p) = c * wp - s * wq;
          w(i, q) = s * wp + c * wq;
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> norms(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += w(i, j) * w(i, j);
    norms[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  SvdResult out{DenseMatrix(n, n), std::vector<double>(n, 0.0), DenseMatrix(n, n)};
  const double sigma_max = n ? norms[order[0]] : 0.0;
  const double drop = sigma_max * double(n) * std::numeric_limits<double>::epsilon();
  std::vector<bool> filled(n, false);
  std::vector<std::size_t> deficient;
  for (std::size_t jj = 0; jj < n; ++jj) {
    const std::size_t j = order[jj];
    out.sigma[jj] = norms[j];
    for (std::size_t i = 0; i < n; ++i) out.v(i, jj) = v(i, j);
    if (norms[j] > drop) {
      for (std::size_t i = 0; i < n; ++i) out.u(i, jj) = w(i, j) / norms[j];
      filled[jj] = true;
    } else {
      deficient.push_back(jj);
    }
  }

  // Complete u for (near-)zero singular values: take the unit basis vector
  // with the largest residual after projecting out placed columns; two
  // Gram-Schmidt passes keep the result orthogonal to working precision.
  std::vector<double> cand(n), best(n);
  for (std::size_t jj : deficient) {
    double best_norm = -1.0;
    for (std::size_t e = 0; e < n; ++e) {
      std::fill(cand.begin(), cand.end(), 0.0);
      cand[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t m = 0; m < n; ++m) {
          if (!filled[m]) continue;
          double dot = 0.0;
          for (std::size_t i = 0; i < n; ++i) dot += cand[i] * out.u(i, m);
          for (std::size_t i = 0; i < n; ++i) cand[i] -= dot * out.u(i, m);
        }
      }
      double s = 0.0;
      for (double x : cand) s += x * x;
      if (s > best_norm) {
        best_norm = s;
        best = cand;
      }
    }
    const double inv = 1.0 / std::sqrt(best_norm);
    for (std::size_t i = 0; i < n; ++i) out.u(i, jj) = best[i] * inv;
    filled[jj] = true;
  }
  return out;
}

// Modified Gram-Schmidt on the columns of a, in place. Returns false when a
// column collapses (rank deficiency) and leaves a unspecified in that case.
inline bool orthonormalize_columns(DenseMatrix& a) {
  for (std::size_t j = 0; j < a.cols; ++j) {
    for (std::size_t m = 0; m < j; ++m) {
      double dot = 0.0;
      for (std::size_t i = 0; i < a.rows; ++i) dot += a(i, j) * a(i, m);
      for (std::size_t i = 0; i < a.rows; ++i) a(i, j) -= dot * a(i, m);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) s += a(i, j) * a(i, j);
    if (s < 1e-24) return false;
    const double inv = 1.0 / std::sqrt(s);
    for (std::size_t i = 0; i < a.rows; ++i) a(i, j) *= inv;
  }
  return true;
}

}  // namespace edsh
