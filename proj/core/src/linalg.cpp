// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#include "proteus/linalg.hpp"

#include "proteus/error.hpp"

#include <cmath>

namespace proteus {

Cholesky::Cholesky(const Matrix& spd) {
  if (spd.rows() != spd.cols()) throw ShapeError("cholesky: matrix is not square");
  Eigen::LLT<Matrix> llt(spd);
  if (llt.info() != Eigen::Success) throw NumericalError("cholesky: matrix is not positive definite");
  lower_ = llt.matrixL();
  log_det_ = 0.0;
  for (Eigen::Index i = 0; i < lower_.rows(); ++i) {
    const double diag = lower_(i, i);
    if (!(diag > 0.0) || !std::isfinite(diag))
      throw NumericalError("cholesky: non-positive pivot");
    log_det_ += 2.0 * std::log(diag);
  }
}

double Cholesky::quadratic_form(const Vector& x) const {
  if (x.size() != lower_.rows()) throw ShapeError("cholesky: dimension mismatch");
  const Vector y = lower_.triangularView<Eigen::Lower>().solve(x);
  return y.squaredNorm();
}

Vector Cholesky::solve(const Vector& b) const {
  if (b.size() != lower_.rows()) throw ShapeError("cholesky: dimension mismatch");
  const Vector y = lower_.triangularView<Eigen::Lower>().solve(b);
  return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

bool is_spd(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) return false;
  const Matrix l = llt.matrixL();
  for (Eigen::Index i = 0; i < l.rows(); ++i)
    if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i))) return false;
  return true;
}

double asymmetry(const Matrix& m) {
  if (m.rows() != m.cols()) return INFINITY;
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

Matrix orthonormal_basis(const Matrix& columns, double tolerance) {
  const Eigen::Index q = columns.rows();
  if (columns.cols() == 0) return Matrix(q, 0);
  double scale = 0.0;
  for (Eigen::Index j = 0; j < columns.cols(); ++j) scale = std::max(scale, columns.col(j).norm());
  if (scale == 0.0) return Matrix(q, 0);

  // Modified Gram-Schmidt with one reorthogonalization pass.
  std::vector<Vector> kept;
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    Vector v = columns.col(j);
    for (int pass = 0; pass < 2; ++pass)
      for (const Vector& u : kept) v -= u.dot(v) * u;
    const double n = v.norm();
    if (n > tolerance * scale) kept.push_back(v / n);
    if (static_cast<Eigen::Index>(kept.size()) == q) break;
  }
  Matrix basis(q, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) basis.col(static_cast<Eigen::Index>(j)) = kept[j];
  return basis;
}

Matrix hstack(std::span<const Matrix> blocks, Eigen::Index rows) {
  Eigen::Index cols = 0;
  for (const Matrix& b : blocks) {
    if (b.rows() != rows) throw ShapeError("hstack: row mismatch");
    cols += b.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Matrix& b : blocks) {
    out.middleCols(at, b.cols()) = b;
    at += b.cols();
  }
  return out;
}

Vector ordered_sum(std::span<const Vector> xs, Eigen::Index dim) {
  Vector acc = Vector::Zero(dim);
  for (const Vector& x : xs) acc += x;
  return acc;
}

}  // namespace proteus
