// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "proteus/serialize.hpp"

#include <optional>
#include <span>
#include <vector>

namespace proteus {

/// Lower-triangular accuracy matrix: acc(τ, κ) is the accuracy on task τ after
/// training through task κ, defined for 1 <= τ <= κ <= m.
class AccMatrix {
 public:
  explicit AccMatrix(int tasks);

  int tasks() const { return tasks_; }
  /// Throws ConfigError outside τ <= κ or a value outside [0, 1].
  void set(int tau, int kappa, double value);
  /// Throws DataError when the entry has not been set.
  double at(int tau, int kappa) const;
  bool has(int tau, int kappa) const;

  Json to_json() const;
  /// Inverse of to_json. Throws ValidationError on a malformed matrix.
  static AccMatrix from_json(const Json& j);

 private:
  std::size_t index(int tau, int kappa) const;

  int tasks_;
  std::vector<std::optional<double>> values_;
};

/// (1/κ) Σ_{τ<=κ} acc(τ, κ).
double average_accuracy(const AccMatrix& m, int kappa);

/// (1/(κ−1)) Σ_{τ<κ} (max_{τ<=τ'<=κ−1} acc(τ, τ') − acc(τ, κ)). Unclamped, so
/// backward transfer yields negative values. Throws ConfigError for κ < 2.
double forgetting(const AccMatrix& m, int kappa);

/// Fraction of exact matches. Throws DataError on empty or unequal inputs.
double retrieval_accuracy(std::span<const int> predicted, std::span<const int> truth);

/// (acc_a − acc_b) / (time_a − time_b). Throws ConfigError for equal times.
double retrieval_accuracy_gain(double acc_a, double acc_b, double time_a, double time_b);

}  // namespace proteus
