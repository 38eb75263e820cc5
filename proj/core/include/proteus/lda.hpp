// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "proteus/linalg.hpp"

#include <map>
#include <span>
#include <utility>
#include <vector>

namespace proteus {

/// Streaming statistics for the ridge LDA prediction rule:
///   G   = Σ h hᵀ over every training sample seen,
///   e(c) = Σ h / (m · |D_τ|) over samples of class c.
struct LdaStats {
  Matrix gram;
  std::map<int, Vector> class_sums;
  std::map<int, long> class_counts;
  int tasks = 0;         // m
  double gamma = 1e-2;   // default ridge for predict

  explicit LdaStats(Eigen::Index d = 0) : gram(Matrix::Zero(d, d)) {}

  Eigen::Index dim() const { return gram.rows(); }
  bool operator==(const LdaStats& o) const {
    if (!same_values(gram, o.gram) || class_counts != o.class_counts || tasks != o.tasks || gamma != o.gamma ||
        class_sums.size() != o.class_sums.size())
      return false;
    for (auto a = class_sums.begin(), b = o.class_sums.begin(); a != class_sums.end(); ++a, ++b)
      if (a->first != b->first || !same_values(a->second, b->second)) return false;
    return true;
  }
};

/// Adds class `c` with a zero vector. Registering twice is a no-op.
void register_class(LdaStats& stats, int c);

/// G += h hᵀ; e(c) += h / (m |D_τ|). Throws LabelError for an unregistered
/// label and DataError for a non-positive task size or m.
void accumulate(LdaStats& stats, const Vector& h, int c, long task_size, int m);

/// Direct double-sum evaluation over a dataset whose samples are grouped by
/// task. `task_sizes[i]` is |D_τ| for sample i. Batch oracle for accumulate.
struct LabeledEmbedding {
  Vector h;
  int label = 0;
  long task_size = 1;
};
LdaStats batch_stats(std::span<const LabeledEmbedding> data, int m);

/// argmax_c hᵀ (G + γI)⁻¹ e(c); ties go to the lowest class id.
/// Throws ConfigError for γ <= 0 and DataError when no class is registered.
int predict(const LdaStats& stats, const Vector& h, double gamma);

/// Per-class discriminant scores, keyed by class id.
std::map<int, double> discriminant_scores(const LdaStats& stats, const Vector& h, double gamma);

/// Pre-solved form of predict for repeated queries against fixed statistics:
/// stores (G + γI)⁻¹ e(c) for every class once.
class LdaClassifier {
 public:
  LdaClassifier(const LdaStats& stats, double gamma);
  int predict(const Vector& h) const;

 private:
  std::vector<int> classes_;
  Matrix weights_;  // d × classes
};

}  // namespace proteus
