// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "proteus/linalg.hpp"
#include "proteus/serialize.hpp"
#include "proteus/signature.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace proteus {

/// Inputs of the retrieval error bound. `tasks` is n, `components` is τ.
struct BoundParams {
  int d = 1;
  double delta = 0.0;
  double kappa = 0.0;
  double sigma2 = 1.0;
  int tasks = 1;
  int components = 1;

  /// (n − 1) τ + 1: the true component plus every false one.
  long candidates() const { return static_cast<long>(tasks - 1) * components + 1; }
};

struct BoundValue {
  double value = 1.0;             // clamped to [0, 1]
  double unclamped = 1.0;
  bool premise_violated = false;  // δ < max(0, −2κ/d)
};

/// exp(−dδ²/(4δ+16)) + (n−1)τ exp(−(dδ/2+κ)² / (2σ²d + (2/3)(dδ/2+κ))).
/// Violated premises return 1 with the flag set instead of throwing.
/// Throws ConfigError only for d, n, τ < 1 or σ² <= 0.
BoundValue error_bound(const BoundParams& p);

/// Smallest separation factor that keeps the bound at or below ε:
///   δ = (2/d) max{¼(M + √(M² − 24dσ²κ)) − κ, L(1 + √(1 + 4d/L))},
/// with M = 3dσ² − κ and L = log(N/ε). A negative discriminant makes the
/// first branch non-binding. The result is floored at max(0, −2κ/d) and
/// rounded outward by a relative 1e-12.
/// Throws ConfigError for ε ∉ (0, 1), N < 1, d < 1 or σ² <= 0.
double min_delta(double epsilon, int d, double kappa, double sigma2, long candidates);

/// mean((h − m)ᵀ Λ⁻¹ (h − m)) / d − 1 over embeddings measured under the
/// false component's own adapter. May be negative.
double empirical_separation(std::span<const Vector> cross_embeddings, const GaussianComponent& false_component);

/// min over others of log|Λ_other| − log|Λ_true|. Throws DataError when empty.
double empirical_kappa(const GaussianComponent& truth, std::span<const GaussianComponent> others);

/// Unbiased sample variance of the Mahalanobis quadratic form, divided by d.
double empirical_sigma2(std::span<const Vector> cross_embeddings, const GaussianComponent& component);

/// Floor substituted for a zero σ² so the bound stays defined.
inline constexpr double kSigma2Floor = 1e-12;

struct McConfig {
  int d = 16;
  double delta = 4.0;
  int tasks = 5;
  int components = 2;
  long samples = 100000;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct McReport {
  McConfig config;
  long false_components = 0;
  long misretrievals = 0;
  double empirical_error = 0.0;
  double standard_error = 0.0;
  double sigma2 = 0.0;           // 2 + 4δ, analytic
  double measured_delta = 0.0;   // min over false components
  double measured_sigma2 = 0.0;  // max over false components
  BoundValue bound;
  bool within_bound = true;      // empirical ≤ bound + 3 SE
};

/// Assumption-exact world: every component has Λ = I (κ = 0), the true mean
/// is the origin and each of the (n−1)τ false means sits at distance √(δd)
/// in a seeded random direction. Samples are drawn from the true component
/// and matched by the nearest-signature rule (ties favour the true one).
/// Work is split into fixed shards with derived seeds, so the result does not
/// depend on `threads`. Throws ConfigError for d < 1 or samples < 1.
McReport mc_validate(const McConfig& cfg);

Json to_json(const McReport& r);
std::string mc_csv(std::span<const McReport> reports);

/// One row per (task, component) of a trained pipeline.
struct BoundRow {
  int task = 0;
  int component = 0;
  long samples = 0;
  double delta = 0.0;         // min over false components
  double kappa = 0.0;
  double sigma2 = 0.0;        // max over false components, floored
  bool sigma2_floored = false;
  long candidates = 0;        // N
  double min_delta = 0.0;
  double bound = 1.0;         // error_bound at the measured δ
  bool premise_violated = false;
  double retrieval_error = 0.0;
  bool exceeds = false;       // delta > min_delta
};

struct BoundReport {
  double epsilon = 0.05;
  std::vector<BoundRow> rows;

  bool all_exceed() const;
};

Json to_json(const BoundReport& r);
std::string to_csv(const BoundReport& r);

}  // namespace proteus
