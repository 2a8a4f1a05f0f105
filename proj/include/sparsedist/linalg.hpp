// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <initializer_list>

#include "sparsedist/error.hpp"

namespace sparsedist {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Largest dimension accepted for scale matrices.
inline constexpr int kMaxSpdDim = 8;

class SpdMatrix;
SpdMatrix spd_decompose(const Matrix& m);

/// Small symmetric positive-definite matrix with its determinant, inverse and
/// principal square root computed once from a symmetric eigendecomposition.
class SpdMatrix {
 public:
  int dim() const { return static_cast<int>(entries_.rows()); }
  const Matrix& matrix() const { return entries_; }
  const Matrix& inverse() const { return inverse_; }
  const Matrix& sqrt() const { return sqrt_; }
  const Matrix& inv_sqrt() const { return inv_sqrt_; }
  const Vector& eigenvalues() const { return eigenvalues_; }
  double det() const { return det_; }
  double log_det() const { return log_det_; }

  /// x^T M^{-1} x
  double inv_quad(const Vector& x) const { return x.dot(inverse_ * x); }

  SpdMatrix scaled(double c) const { return spd_decompose(entries_ * c); }

  static SpdMatrix identity(int n) {
    return spd_decompose(Matrix::Identity(n, n));
  }
  static SpdMatrix scalar(double v) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return spd_decompose(m);
  }
  /// Row-major construction, e.g. from_rows(2, {.6, .4, .4, .48}).
  static SpdMatrix from_rows(int n, std::initializer_list<double> values) {
    detail::require(static_cast<int>(values.size()) == n * n,
                    Errc::shape_mismatch, "from_rows needs n*n values",
                    "SpdMatrix::from_rows");
    Matrix m(n, n);
    auto it = values.begin();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = *it++;
    return spd_decompose(m);
  }

 private:
  friend SpdMatrix spd_decompose(const Matrix& m);
  Matrix entries_, inverse_, sqrt_, inv_sqrt_;
  Vector eigenvalues_;
  double det_ = 1.0;
  double log_det_ = 0.0;
};

/// Validates symmetry and positive definiteness, then caches derived
/// quantities. Throws Errc::not_spd when the smallest eigenvalue is at most
/// 1e-12 times the largest.
inline SpdMatrix spd_decompose(const Matrix& m) {
  constexpr const char* kCtx = "spd_decompose";
  detail::require(m.rows() == m.cols() && m.rows() >= 1, Errc::shape_mismatch,
                  "matrix must be square and non-empty", kCtx);
  detail::require(m.rows() <= kMaxSpdDim, Errc::unsupported,
                  "matrix dimension exceeds 8", kCtx);
  detail::require(m.allFinite(), Errc::domain, "matrix has non-finite entries",
                  kCtx);
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  detail::require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale,
                  Errc::not_spd, "matrix is not symmetric", kCtx);

  SpdMatrix out;
  out.entries_ = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(out.entries_);
  const Vector& w = eig.eigenvalues();
  const double wmax = w.maxCoeff();
  detail::require(wmax > 0.0 && w.minCoeff() > 1e-12 * wmax, Errc::not_spd,
                  "matrix is not positive definite", kCtx);
  const Matrix& q = eig.eigenvectors();
  out.eigenvalues_ = w;
  out.sqrt_ = q * w.cwiseSqrt().asDiagonal() * q.transpose();
  out.inv_sqrt_ = q * w.cwiseSqrt().cwiseInverse().asDiagonal() * q.transpose();
  out.inverse_ = q * w.cwiseInverse().asDiagonal() * q.transpose();
  out.log_det_ = w.array().log().sum();
  out.det_ = std::exp(out.log_det_);
  return out;
}

/// Squared Bures distance Tr(A + B - 2 (A^{1/2} B A^{1/2})^{1/2}).
inline double bures_squared(const SpdMatrix& a, const SpdMatrix& b) {
  detail::require(a.dim() == b.dim(), Errc::shape_mismatch,
                  "Bures distance needs equal dimensions", "bures_squared");
  const Matrix inner = a.sqrt() * b.matrix() * a.sqrt();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (inner + inner.transpose()));
  const double cross = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return std::max(0.0, a.matrix().trace() + b.matrix().trace() - 2.0 * cross);
}

}  // namespace sparsedist
