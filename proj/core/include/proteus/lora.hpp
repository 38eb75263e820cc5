// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "proteus/backbone.hpp"
#include "proteus/linalg.hpp"
#include "proteus/lora_types.hpp"
#include "proteus/sample.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace proteus {

/// Δω = Σ_τ B_τ S_τ A_τᵀ + B_new A_newᵀ per layer, materialized densely.
/// Throws ShapeError when `s` does not carry one block per past unit with the
/// unit's rank, or when layer shapes disagree.
LoraOverlay compose_update(std::span<const LoraUnit> past, const TransferCoefficients& s,
                           const LoraUnit& fresh);

/// Per-layer ⟨B_u A_uᵀ, B_v A_vᵀ⟩ = tr((A_uᵀ A_v)(B_vᵀ B_u)), never forming p×q.
std::vector<double> lora_inner_product(const LoraUnit& u, const LoraUnit& v);

/// Per-layer Frobenius norm of B Aᵀ, via the same factored identity.
std::vector<double> lora_norm(const LoraUnit& u);

/// a′ = a − Q Qᵀ a for each column. `basis` must have orthonormal columns
/// (it may have zero columns). No renormalization; zero columns may result.
Matrix project_new_directions(const Matrix& a_columns, const Matrix& basis);

/// Orthonormal basis of all past A columns at one layer.
Matrix past_input_basis(std::span<const LoraUnit> past, std::size_t layer, Eigen::Index q);

/// Transfer coefficients with one zero (or one-valued) block per past unit.
TransferCoefficients make_transfer(std::span<const LoraUnit> past, double fill);

struct ElasticNet {
  double penalty = 0.0;
  TransferCoefficients subgradient;
};

/// λ Σ_layers (α‖s‖₁ + (1−α)‖s‖₂) with ‖·‖₂ the plain Euclidean norm of the
/// layer's diagonal entries. Subgradient takes sign(0) = 0 and 0 at ‖s‖ = 0.
ElasticNet elastic_net(const TransferCoefficients& s, double lambda, double alpha);

/// max(1, round(r₀ · exp(−α_decay (m − 1)))) for task index m ≥ 1.
int rank_schedule(int r0, double alpha_decay, int m);

enum class TransferMode { learned, zero, identity };

std::string to_string(TransferMode mode);
TransferMode parse_transfer_mode(const std::string& name);

struct TrainConfig {
  double lambda0 = 0.006;     // elastic-net weight for the first task
  double lambda_decay = 0.8;  // multiplier applied after every task
  double alpha = 0.8;         // ℓ1 share of the elastic net
  int rank = 4;
  double rank_decay = 0.0;    // exponential rank schedule; 0 keeps `rank`
  int epochs = 50;
  double learning_rate = 0.05;
  int batch_size = 32;
  std::uint64_t seed = 0;
  TransferMode transfer = TransferMode::learned;
  bool ortho = true;

  /// Throws ConfigError on λ < 0, α ∉ [0,1], r < 1 and similar.
  void validate() const;
  /// λ used when `past_tasks` units are already committed.
  double lambda_for(int past_tasks) const;
  /// Rank for 1-based task index m.
  int rank_for(int m) const;
};

struct TaskTrainLog {
  int task = 0;
  int rank = 0;
  double lambda = 0.0;
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
  double train_accuracy = 0.0;     // temporary head, after the last epoch
  double penalty = 0.0;            // final elastic-net value
  double sparsity = 0.0;           // fraction of |s| < 1e-3 (learned entries)
  double max_ortho_cosine = 0.0;   // worst |cos| against any past unit
  std::vector<std::size_t> degenerate_layers;
};

struct TrainedAdapter {
  LoraUnit unit;
  TransferCoefficients transfer;
  TaskTrainLog log;
};

/// Mini-batch projected gradient descent on the task loss plus the
/// elastic-net penalty on S. After every step the new A columns are projected
/// onto the orthogonal complement of all past A columns (when cfg.ortho).
/// Deterministic for a fixed (data, past, cfg.seed, task_id).
TrainedAdapter train_task(std::span<const LabeledSample> data, std::span<const LoraUnit> past,
                          const BackboneWeights& backbone, const TrainConfig& cfg, int task_id);

/// Fraction of transfer entries with magnitude below `threshold`.
double transfer_sparsity(const TransferCoefficients& s, double threshold = 1e-3);

}  // namespace proteus
