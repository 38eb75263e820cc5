// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#include "proteus/serialize.hpp"

#include "proteus/error.hpp"

#include <cmath>

namespace proteus {

namespace {

double finite_or_throw(double v) {
  if (!std::isfinite(v)) throw NumericalError("serialize: refusing to write a non-finite value");
  return v;
}

double number_or_throw(const Json& j, const std::string& what) {
  if (!j.is_number()) throw ValidationError(what + ": expected a number");
  return j.get<double>();
}

}  // namespace

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(finite_or_throw(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(finite_or_throw(v(i)));
  return out;
}

Matrix matrix_from_json(const Json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + ": expected a nested list");
  const auto r = static_cast<Eigen::Index>(j.size());
  if (rows >= 0 && r != rows)
    throw ValidationError(what + ": expected " + std::to_string(rows) + " rows, found " + std::to_string(r));
  Eigen::Index c = cols;
  if (c < 0) c = r > 0 && j[0].is_array() ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const Json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c)
      throw ValidationError(what + ": row " + std::to_string(i) + " has the wrong length");
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = number_or_throw(row[static_cast<std::size_t>(k)], what);
  }
  return m;
}

Vector vector_from_json(const Json& j, Eigen::Index size, const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + ": expected a list");
  const auto n = static_cast<Eigen::Index>(j.size());
  if (size >= 0 && n != size)
    throw ValidationError(what + ": expected length " + std::to_string(size) + ", found " + std::to_string(n));
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = number_or_throw(j[static_cast<std::size_t>(i)], what);
  return v;
}

const Json& require(const Json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(what + ": missing key '" + key + "'");
  return j.at(key);
}

}  // namespace proteus
