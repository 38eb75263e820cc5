// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#include "proteus/metrics.hpp"

#include "proteus/error.hpp"

#include <algorithm>
#include <string>

namespace proteus {

AccMatrix::AccMatrix(int tasks) : tasks_(tasks) {
  if (tasks < 1) throw ConfigError("accuracy matrix needs at least one task");
  values_.resize(static_cast<std::size_t>(tasks) * static_cast<std::size_t>(tasks + 1) / 2);
}

std::size_t AccMatrix::index(int tau, int kappa) const {
  if (tau < 1 || kappa < tau || kappa > tasks_)
    throw ConfigError("acc(" + std::to_string(tau) + ", " + std::to_string(kappa) + ") is outside the triangle");
  // Column-major packing of the upper triangle in (τ, κ).
  return static_cast<std::size_t>(kappa - 1) * static_cast<std::size_t>(kappa) / 2 +
         static_cast<std::size_t>(tau - 1);
}

void AccMatrix::set(int tau, int kappa, double value) {
  if (!(value >= 0.0 && value <= 1.0)) throw ConfigError("accuracy must lie in [0, 1]");
  values_[index(tau, kappa)] = value;
}

double AccMatrix::at(int tau, int kappa) const {
  const auto& v = values_[index(tau, kappa)];
  if (!v) throw DataError("acc(" + std::to_string(tau) + ", " + std::to_string(kappa) + ") is missing");
  return *v;
}

bool AccMatrix::has(int tau, int kappa) const { return values_[index(tau, kappa)].has_value(); }

Json AccMatrix::to_json() const {
  Json rows = Json::array();
  for (int tau = 1; tau <= tasks_; ++tau) {
    Json row = Json::array();
    for (int kappa = 1; kappa <= tasks_; ++kappa) {
      if (kappa >= tau && has(tau, kappa))
        row.push_back(at(tau, kappa));
      else
        row.push_back(nullptr);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

AccMatrix AccMatrix::from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ValidationError("accuracy matrix must be a non-empty array");
  const int m = static_cast<int>(j.size());
  AccMatrix out(m);
  for (int tau = 1; tau <= m; ++tau) {
    const Json& row = j[static_cast<std::size_t>(tau - 1)];
    if (!row.is_array() || static_cast<int>(row.size()) != m) throw ValidationError("accuracy matrix must be square");
    for (int kappa = 1; kappa <= m; ++kappa) {
      const Json& v = row[static_cast<std::size_t>(kappa - 1)];
      if (v.is_null()) continue;
      if (!v.is_number() || kappa < tau) throw ValidationError("accuracy matrix entry out of place");
      const double x = v.get<double>();
      if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("accuracy outside [0, 1]");
      out.set(tau, kappa, x);
    }
  }
  return out;
}

double average_accuracy(const AccMatrix& m, int kappa) {
  if (kappa < 1 || kappa > m.tasks()) throw ConfigError("average_accuracy: κ out of range");
  double sum = 0.0;
  for (int tau = 1; tau <= kappa; ++tau) sum += m.at(tau, kappa);
  return sum / kappa;
}

double forgetting(const AccMatrix& m, int kappa) {
  if (kappa < 2) throw ConfigError("forgetting is defined for κ >= 2");
  if (kappa > m.tasks()) throw ConfigError("forgetting: κ out of range");
  double sum = 0.0;
  for (int tau = 1; tau < kappa; ++tau) {
    double best = m.at(tau, tau);
    for (int prev = tau + 1; prev < kappa; ++prev) best = std::max(best, m.at(tau, prev));
    sum += best - m.at(tau, kappa);
  }
  return sum / (kappa - 1);
}

double retrieval_accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw DataError("retrieval_accuracy: length mismatch");
  if (predicted.empty()) throw DataError("retrieval_accuracy: no predictions");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double retrieval_accuracy_gain(double acc_a, double acc_b, double time_a, double time_b) {
  if (time_a == time_b) throw ConfigError("retrieval_accuracy_gain: equal times give an undefined ratio");
  return (acc_a - acc_b) / (time_a - time_b);
}

}  // namespace proteus
