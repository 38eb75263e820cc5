// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "proteus/linalg.hpp"
#include "proteus/lora_types.hpp"
#include "proteus/sample.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace proteus {

struct DenseLayer {
  Matrix weight;  // out × in
  Vector bias;    // out

  bool operator==(const DenseLayer& o) const { return same_values(weight, o.weight) && same_values(bias, o.bias); }
};

/// Frozen feature extractor h(x; ω₀). Hidden layers use tanh, the final layer
/// is linear. Nothing in the library mutates a BackboneWeights after
/// init_backbone returns; callers pass it by const reference.
struct BackboneWeights {
  std::vector<int> dims;  // input, hidden..., embedding
  std::vector<DenseLayer> layers;

  int input_dim() const { return dims.front(); }
  int embedding_dim() const { return dims.back(); }
  std::size_t num_layers() const { return layers.size(); }

  bool operator==(const BackboneWeights&) const = default;
};

/// Seeded zero-mean Gaussian weights with standard deviation 1/√fan-in and
/// zero biases. Throws ConfigError for fewer than two dims or a dim below 1.
BackboneWeights init_backbone(std::span<const int> dims, std::uint64_t seed);

/// Forward pass through (W_l + Δω_l). `overlay` may be null.
Vector embed(const Vector& x, const BackboneWeights& weights, const LoraOverlay* overlay = nullptr);

/// Throws ShapeError unless every overlay layer matches its backbone layer.
void check_overlay(const BackboneWeights& weights, const LoraOverlay& overlay);

/// Learnable state for one task plus the frozen context it is composed from.
struct AdapterState {
  std::span<const LoraUnit> past;   // frozen
  const TransferCoefficients* transfer = nullptr;
  const LoraUnit* fresh = nullptr;  // B_new, A_new
  const TaskHead* head = nullptr;
};

/// Gradients of the mean cross-entropy with respect to the learnable blocks.
/// There are deliberately no slots for past B_τ, A_τ or for ω₀.
struct AdapterGradients {
  double loss = 0.0;
  TransferCoefficients transfer;
  std::vector<LowRankFactors> fresh;
  Matrix head_weight;
  Vector head_bias;
};

/// `labels` are head-local indices in [0, classes).
struct LocalBatch {
  std::span<const Vector> inputs;
  std::span<const int> labels;
};

/// Mean cross-entropy of the temporary head over the batch.
double task_loss(const LocalBatch& batch, const BackboneWeights& weights, const AdapterState& state);

/// Exact analytic gradients of task_loss. Throws LabelError for labels outside
/// the head range and DataError for an empty batch.
AdapterGradients backprop(const LocalBatch& batch, const BackboneWeights& weights,
                          const AdapterState& state);

}  // namespace proteus
