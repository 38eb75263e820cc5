// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "proteus/linalg.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace proteus {

using Json = nlohmann::json;

/// Row-major nested list. Non-finite values are rejected.
Json matrix_to_json(const Matrix& m);
Json vector_to_json(const Vector& v);

/// Throws ValidationError when the shape differs from the expectation
/// (pass -1 to accept any extent) or an element is not a number.
Matrix matrix_from_json(const Json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what);
Vector vector_from_json(const Json& j, Eigen::Index size, const std::string& what);

/// Looks up a required key, throwing ValidationError naming `what` if absent.
const Json& require(const Json& j, const char* key, const std::string& what);

}  // namespace proteus
