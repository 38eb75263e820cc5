// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "proteus/linalg.hpp"

#include <vector>

namespace proteus {

/// Rank-r factors of one weight-matrix update: Δω⊥ = b · aᵀ.
/// `b` is p×r (output side), `a` is q×r (input side). Column i of each pair
/// forms the rank-1 tuning direction b_i a_iᵀ.
struct LowRankFactors {
  Matrix b;
  Matrix a;

  Eigen::Index rank() const { return b.cols(); }
  Matrix dense() const { return b * a.transpose(); }
  bool operator==(const LowRankFactors& o) const { return same_values(b, o.b) && same_values(a, o.a); }
};

/// One task's new tuning directions, one factor pair per backbone layer.
/// Frozen once committed to the knowledge base.
struct LoraUnit {
  int task = 0;
  std::vector<LowRankFactors> layers;

  bool operator==(const LoraUnit&) const = default;
};

/// Diagonal transfer weights over frozen past directions. Indexed
/// [layer][past task]; each vector holds s_{τ,1..r_τ}. Off-diagonal
/// entries of the block-diagonal S are structurally absent.
struct TransferCoefficients {
  std::vector<std::vector<Vector>> layers;

  std::size_t num_past() const { return layers.empty() ? 0 : layers.front().size(); }
  bool operator==(const TransferCoefficients& o) const {
    if (layers.size() != o.layers.size()) return false;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].size() != o.layers[l].size()) return false;
      for (std::size_t t = 0; t < layers[l].size(); ++t)
        if (!same_values(layers[l][t], o.layers[l][t])) return false;
    }
    return true;
  }
};

/// Dense per-layer additive weight update applied on top of the backbone.
struct LoraOverlay {
  int task = -1;
  std::vector<Matrix> delta;
};

/// Temporary linear classifier used only for the training loss of one task.
struct TaskHead {
  Matrix weight;  // classes × d
  Vector bias;    // classes
};

}  // namespace proteus
