// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "proteus/linalg.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace proteus {

/// One Gaussian key: weight, mean, covariance and its cached Cholesky factor.
class GaussianComponent {
 public:
  GaussianComponent() = default;
  /// Symmetrizes `cov` and factors it. Throws NumericalError if not SPD.
  GaussianComponent(double weight, Vector mean, Matrix cov);

  double weight() const { return weight_; }
  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }
  const Cholesky& chol() const { return chol_; }
  Eigen::Index dim() const { return mean_.size(); }
  void set_weight(double w) { weight_ = w; }

  bool operator==(const GaussianComponent& o) const {
    return weight_ == o.weight_ && same_values(mean_, o.mean_) && same_values(cov_, o.cov_);
  }

 private:
  double weight_ = 1.0;
  Vector mean_;
  Matrix cov_;
  Cholesky chol_;
};

/// Definition-style multi-key signature: τ Gaussian components for one task.
struct MultiKeySignature {
  int task = 0;
  std::vector<GaussianComponent> components;

  bool operator==(const MultiKeySignature&) const = default;
};

/// Default ridge: 1e-6 · tr(Λ)/d, floored so degenerate clouds stay SPD.
double default_ridge(const Matrix& cov);

/// MLE mean and covariance (1/N normalization) plus ε I. Uses default_ridge
/// when `ridge` is empty. Throws InsufficientDataError for fewer than 2 points.
GaussianComponent fit_gaussian(std::span<const Vector> embeddings,
                               std::optional<double> ridge = std::nullopt);

/// (h − m)ᵀ Λ⁻¹ (h − m), via triangular solves against the cached factor.
double signature_score(const Vector& h, const GaussianComponent& c);

/// log N(h; m, Λ), without the mixture weight.
double gaussian_log_density(const Vector& h, const GaussianComponent& c);

/// log |Λ| from the cached factor.
double log_volume(const GaussianComponent& c);

enum class MixtureStrategy { em_bic };

struct MultiKeyOptions {
  int max_components = 20;
  std::optional<double> ridge;  // empty: scale-aware default
  std::uint64_t seed = 0;
  MixtureStrategy strategy = MixtureStrategy::em_bic;
  int max_iterations = 200;
  double tolerance = 1e-6;  // stop once the log-likelihood gain falls below this
  int restarts = 2;         // seeded initializations per candidate τ
};

MixtureStrategy parse_mixture_strategy(const std::string& name);

/// Per-candidate record kept for inspection and tests.
struct MixtureCandidate {
  int requested = 0;   // τ′ asked for
  int components = 0;  // after empty-component collapse
  double log_likelihood = 0.0;
  double bic = 0.0;
  std::vector<double> trace;  // data log-likelihood after every EM iteration
};

struct MultiKeyFit {
  MultiKeySignature signature;
  std::vector<MixtureCandidate> candidates;
  std::size_t selected = 0;  // index into candidates
};

/// EM with k-means++ seeding, full covariances and ridge, for τ′ = 1..T;
/// the model with minimum BIC wins. All-identical input yields a single
/// ridge-covariance component. Throws InsufficientDataError below 2 points
/// and ConfigError for T < 1.
MultiKeyFit fit_multikey_detailed(std::span<const Vector> embeddings, const MultiKeyOptions& options);

inline MultiKeySignature fit_multikey(std::span<const Vector> embeddings, const MultiKeyOptions& options) {
  return fit_multikey_detailed(embeddings, options).signature;
}

/// Σ_i log Σ_t w_t N(h_i; m_t, Λ_t).
double mixture_log_likelihood(std::span<const Vector> embeddings, const MultiKeySignature& sig);

/// Hard attribution: index of the component with the largest weighted density.
std::vector<int> assign_components(const MultiKeySignature& sig, std::span<const Vector> embeddings);

}  // namespace proteus
