#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "errors.hpp"
#include "geometry.hpp"

namespace krigmorph {

/// Lower-triangular L with L * L^T = A + jitter * I.
struct CholeskyFactor {
  RowMatrix L;
  double jitter = 0.0;

  Eigen::Index size() const { return L.rows(); }
};

/// Relative diagonal shifts tried in order by factorize().
inline constexpr std::array<double, 4> kJitterLadder = {0.0, 1e-12, 1e-10,
                                                        1e-8};

namespace detail {

// Plain left-looking Cholesky on the lower triangle of `a` plus `shift` on the
// diagonal. Returns false on a non-positive (or non-finite) pivot.
inline bool cholesky_lower(const Matrix &a, double shift, RowMatrix &l) {
  const Eigen::Index n = a.rows();
  l.setZero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double s = a(j, j) + shift;
    for (Eigen::Index k = 0; k < j; ++k) {
      s -= l(j, k) * l(j, k);
    }
    if (!(s > 0.0) || !std::isfinite(s)) {
      return false;
    }
    const double pivot = std::sqrt(s);
    l(j, j) = pivot;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double v = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) {
        v -= l(i, k) * l(j, k);
      }
      l(i, j) = v / pivot;
    }
  }
  return true;
}

} // namespace detail

/// Cholesky factor of a symmetric matrix, reading only its lower triangle.
/// On failure the diagonal is shifted by kJitterLadder[k] * max(diag A) for
/// increasing k; the shift that succeeded is recorded in `jitter`.
inline CholeskyFactor factorize(const Matrix &a) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch("factorize: matrix must be square");
  }
  if (a.rows() == 0) {
    throw DomainError("factorize: empty matrix");
  }
  const double scale = a.diagonal().maxCoeff();
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw SingularMatrixError(
        "factorize: matrix has no positive diagonal entry");
  }
  CholeskyFactor f;
  for (double rel : kJitterLadder) {
    const double shift = rel * scale;
    if (detail::cholesky_lower(a, shift, f.L)) {
      f.jitter = shift;
      return f;
    }
  }
  throw SingularMatrixError(
      "factorize: matrix is singular even with relative jitter 1e-8 "
      "(duplicated morphing nodes or a node inside the fixed region?)");
}

/// L^{-1} B.
inline Matrix forward_substitute(const CholeskyFactor &f, const Matrix &b) {
  if (b.rows() != f.size()) {
    throw DimensionMismatch("forward_substitute: expected " +
                            std::to_string(f.size()) + " rows, got " +
                            std::to_string(b.rows()));
  }
  return f.L.triangularView<Eigen::Lower>().solve(b);
}

/// X with (A + jitter I) X = B.
inline Matrix solve(const CholeskyFactor &f, const Matrix &b) {
  Matrix y = forward_substitute(f, b);
  f.L.transpose().triangularView<Eigen::Upper>().solveInPlace(y);
  return y;
}

/// Factor of the bordered matrix [[A, col], [col^T, diag]] from the factor of
/// A. A jitter already present in `f` is applied to the new diagonal entry as
/// well so the result stays a factor of (bordered + jitter I).
inline CholeskyFactor extend(const CholeskyFactor &f, const Vector &col,
                             double diag) {
  if (col.size() != f.size()) {
    throw DimensionMismatch("extend: column length " +
                            std::to_string(col.size()) +
                            " does not match factor size " +
                            std::to_string(f.size()));
  }
  if (!(diag > 0.0)) {
    throw DomainError("extend: diagonal entry must be positive");
  }
  const Eigen::Index m = f.size();
  Vector w = col;
  if (m > 0) {
    f.L.triangularView<Eigen::Lower>().solveInPlace(w);
  }
  const double pivot_sq = diag + f.jitter - w.squaredNorm();
  if (!(pivot_sq > 0.0)) {
    throw NonPositivePivot(
        "extend: new point has no remaining variance given the others");
  }
  CholeskyFactor out;
  out.jitter = f.jitter;
  out.L.setZero(m + 1, m + 1);
  out.L.topLeftCorner(m, m) = f.L;
  out.L.block(m, 0, 1, m) = w.transpose();
  out.L(m, m) = std::sqrt(pivot_sq);
  return out;
}

} // namespace krigmorph
