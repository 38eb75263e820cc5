// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace proteus {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Cholesky factor of a symmetric positive definite matrix together with its
/// log-determinant. Construction throws NumericalError if the matrix is not SPD.
class Cholesky {
 public:
  Cholesky() = default;
  explicit Cholesky(const Matrix& spd);

  const Matrix& lower() const { return lower_; }
  double log_det() const { return log_det_; }
  Eigen::Index dim() const { return lower_.rows(); }

  /// xᵀ Σ⁻¹ x via one forward substitution.
  double quadratic_form(const Vector& x) const;
  /// Σ⁻¹ b via forward and back substitution.
  Vector solve(const Vector& b) const;

 private:
  Matrix lower_;
  double log_det_ = 0.0;
};

/// True when the matrix factors as L Lᵀ with a strictly positive diagonal.
/// Exact element-wise equality that treats differing shapes as unequal.
template <typename A, typename B>
bool same_values(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

bool is_spd(const Matrix& m);

/// Largest absolute asymmetry |m(i,j) - m(j,i)|.
double asymmetry(const Matrix& m);

/// Orthonormal basis of the column span of `columns`. Columns whose residual
/// norm falls below `tolerance` (relative to the largest column norm) are
/// treated as dependent and dropped. Returns a q×k matrix, k may be zero.
Matrix orthonormal_basis(const Matrix& columns, double tolerance = 1e-10);

/// Horizontally concatenate matrices with equal row counts.
Matrix hstack(std::span<const Matrix> blocks, Eigen::Index rows);

/// Sum of vectors in index order. Fixed order keeps results bit-reproducible.
Vector ordered_sum(std::span<const Vector> xs, Eigen::Index dim);

}  // namespace proteus
