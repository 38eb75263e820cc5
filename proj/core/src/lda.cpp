// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#include "proteus/lda.hpp"

#include "proteus/error.hpp"

#include <string>

namespace proteus {

void register_class(LdaStats& stats, int c) {
  stats.class_sums.try_emplace(c, Vector::Zero(stats.dim()));
  stats.class_counts.try_emplace(c, 0);
}

void accumulate(LdaStats& stats, const Vector& h, int c, long task_size, int m) {
  if (h.size() != stats.dim()) throw ShapeError("lda accumulate: embedding dimension mismatch");
  auto it = stats.class_sums.find(c);
  if (it == stats.class_sums.end())
    throw LabelError("lda accumulate: class " + std::to_string(c) + " is not registered");
  if (task_size <= 0) throw DataError("lda accumulate: task size must be positive");
  if (m <= 0) throw DataError("lda accumulate: task count must be positive");
  stats.gram.selfadjointView<Eigen::Lower>().rankUpdate(h);
  stats.gram.triangularView<Eigen::StrictlyUpper>() = stats.gram.transpose();
  it->second += h / (static_cast<double>(m) * static_cast<double>(task_size));
  ++stats.class_counts[c];
}

LdaStats batch_stats(std::span<const LabeledEmbedding> data, int m) {
  if (data.empty()) throw DataError("lda batch_stats: empty dataset");
  const Eigen::Index d = data.front().h.size();
  LdaStats stats(d);
  stats.tasks = m;
  for (const LabeledEmbedding& s : data) register_class(stats, s.label);
  // Plain double sum, entry by entry.
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      double acc = 0.0;
      for (const LabeledEmbedding& s : data) acc += s.h(i) * s.h(j);
      stats.gram(i, j) = acc;
    }
  for (auto& [c, e] : stats.class_sums) {
    for (const LabeledEmbedding& s : data)
      if (s.label == c) {
        e += s.h / (static_cast<double>(m) * static_cast<double>(s.task_size));
        ++stats.class_counts[c];
      }
  }
  return stats;
}

std::map<int, double> discriminant_scores(const LdaStats& stats, const Vector& h, double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("lda predict: gamma must be > 0");
  if (stats.class_sums.empty()) throw DataError("lda predict: no classes registered");
  if (h.size() != stats.dim()) throw ShapeError("lda predict: embedding dimension mismatch");
  Matrix reg = stats.gram;
  reg.diagonal().array() += gamma;
  const Cholesky chol(reg);
  const Vector z = chol.solve(h);
  std::map<int, double> scores;
  for (const auto& [c, e] : stats.class_sums) scores.emplace(c, z.dot(e));
  return scores;
}

int predict(const LdaStats& stats, const Vector& h, double gamma) {
  const std::map<int, double> scores = discriminant_scores(stats, h, gamma);
  int best = scores.begin()->first;
  double best_score = scores.begin()->second;
  for (const auto& [c, s] : scores)
    if (s > best_score) {
      best = c;
      best_score = s;
    }
  return best;
}

LdaClassifier::LdaClassifier(const LdaStats& stats, double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("lda predict: gamma must be > 0");
  if (stats.class_sums.empty()) throw DataError("lda predict: no classes registered");
  Matrix reg = stats.gram;
  reg.diagonal().array() += gamma;
  const Cholesky chol(reg);
  weights_.resize(stats.dim(), static_cast<Eigen::Index>(stats.class_sums.size()));
  Eigen::Index j = 0;
  for (const auto& [c, e] : stats.class_sums) {
    classes_.push_back(c);
    weights_.col(j++) = chol.solve(e);
  }
}

int LdaClassifier::predict(const Vector& h) const {
  if (h.size() != weights_.rows()) throw ShapeError("lda predict: embedding dimension mismatch");
  const Vector scores = weights_.transpose() * h;
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < scores.size(); ++j)
    if (scores(j) > scores(best)) best = j;
  return classes_[static_cast<std::size_t>(best)];
}

}  // namespace proteus
