// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#include "proteus/backbone.hpp"

#include "proteus/error.hpp"
#include "proteus/lora.hpp"
#include "proteus/random.hpp"

#include <cmath>
#include <string>

namespace proteus {

BackboneWeights init_backbone(std::span<const int> dims, std::uint64_t seed) {
  if (dims.size() < 2)
    throw ConfigError("init_backbone: need an input and an embedding dimension, got " +
                      std::to_string(dims.size()) + " dims");
  for (int d : dims)
    if (d < 1) throw ConfigError("init_backbone: dimensions must be >= 1");

  BackboneWeights w;
  w.dims.assign(dims.begin(), dims.end());
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l];
    const int out = dims[l + 1];
    DenseLayer layer;
    layer.weight = gaussian_matrix(out, in, 1.0 / std::sqrt(static_cast<double>(in)), rng);
    layer.bias = Vector::Zero(out);
    w.layers.push_back(std::move(layer));
  }
  return w;
}

void check_overlay(const BackboneWeights& weights, const LoraOverlay& overlay) {
  if (overlay.delta.size() != weights.layers.size())
    throw ShapeError("overlay: layer count " + std::to_string(overlay.delta.size()) +
                     " does not match backbone (" + std::to_string(weights.layers.size()) + ")");
  for (std::size_t l = 0; l < overlay.delta.size(); ++l) {
    const Matrix& w = weights.layers[l].weight;
    const Matrix& d = overlay.delta[l];
    if (d.rows() != w.rows() || d.cols() != w.cols())
      throw ShapeError("overlay: layer " + std::to_string(l) + " shape mismatch");
  }
}

Vector embed(const Vector& x, const BackboneWeights& weights, const LoraOverlay* overlay) {
  if (x.size() != weights.input_dim())
    throw ShapeError("embed: input has dim " + std::to_string(x.size()) + ", backbone expects " +
                     std::to_string(weights.input_dim()));
  if (overlay) check_overlay(weights, *overlay);

  Vector z = x;
  const std::size_t n = weights.layers.size();
  for (std::size_t l = 0; l < n; ++l) {
    const DenseLayer& layer = weights.layers[l];
    Vector pre = layer.weight * z + layer.bias;
    if (overlay) pre.noalias() += overlay->delta[l] * z;
    z = (l + 1 < n) ? Vector(pre.array().tanh()) : pre;
  }
  return z;
}

namespace {

struct ForwardTrace {
  std::vector<Vector> activations;  // z_0 = x, ..., z_L = h
  Vector probs;
};

void check_state(const BackboneWeights& weights, const AdapterState& state) {
  if (!state.transfer || !state.fresh || !state.head)
    throw ConfigError("adapter state: transfer, fresh unit and head are required");
  if (state.head->weight.cols() != weights.embedding_dim() ||
      state.head->bias.size() != state.head->weight.rows())
    throw ShapeError("adapter state: head does not match embedding dimension");
}

void check_batch(const LocalBatch& batch, Eigen::Index classes) {
  if (batch.inputs.empty()) throw DataError("backprop: empty batch");
  if (batch.inputs.size() != batch.labels.size())
    throw ShapeError("backprop: inputs and labels differ in length");
  for (int y : batch.labels)
    if (y < 0 || y >= classes)
      throw LabelError("backprop: label " + std::to_string(y) + " outside head range [0, " +
                       std::to_string(classes) + ")");
}

ForwardTrace forward(const Vector& x, const std::vector<Matrix>& effective,
                     const BackboneWeights& weights, const TaskHead& head) {
  ForwardTrace t;
  t.activations.reserve(effective.size() + 1);
  t.activations.push_back(x);
  const std::size_t n = effective.size();
  for (std::size_t l = 0; l < n; ++l) {
    Vector pre = effective[l] * t.activations.back() + weights.layers[l].bias;
    t.activations.push_back((l + 1 < n) ? Vector(pre.array().tanh()) : pre);
  }
  Vector logits = head.weight * t.activations.back() + head.bias;
  const double shift = logits.maxCoeff();
  t.probs = (logits.array() - shift).exp();
  t.probs /= t.probs.sum();
  return t;
}

std::vector<Matrix> effective_weights(const BackboneWeights& weights, const AdapterState& state) {
  const LoraOverlay overlay = compose_update(state.past, *state.transfer, *state.fresh);
  check_overlay(weights, overlay);
  std::vector<Matrix> eff;
  eff.reserve(weights.layers.size());
  for (std::size_t l = 0; l < weights.layers.size(); ++l)
    eff.push_back(weights.layers[l].weight + overlay.delta[l]);
  return eff;
}

}  // namespace

double task_loss(const LocalBatch& batch, const BackboneWeights& weights, const AdapterState& state) {
  check_state(weights, state);
  check_batch(batch, state.head->weight.rows());
  const std::vector<Matrix> eff = effective_weights(weights, state);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
    const ForwardTrace t = forward(batch.inputs[i], eff, weights, *state.head);
    loss -= std::log(t.probs(batch.labels[i]));
  }
  return loss / static_cast<double>(batch.inputs.size());
}

AdapterGradients backprop(const LocalBatch& batch, const BackboneWeights& weights,
                          const AdapterState& state) {
  check_state(weights, state);
  const TaskHead& head = *state.head;
  check_batch(batch, head.weight.rows());
  const std::vector<Matrix> eff = effective_weights(weights, state);
  const std::size_t n_layers = eff.size();

  std::vector<Matrix> dense_grad;
  for (const Matrix& w : eff) dense_grad.push_back(Matrix::Zero(w.rows(), w.cols()));

  AdapterGradients g;
  g.head_weight = Matrix::Zero(head.weight.rows(), head.weight.cols());
  g.head_bias = Vector::Zero(head.bias.size());

  for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
    const ForwardTrace t = forward(batch.inputs[i], eff, weights, head);
    const int y = batch.labels[i];
    g.loss -= std::log(t.probs(y));

    Vector dlogits = t.probs;
    dlogits(y) -= 1.0;
    const Vector& h = t.activations.back();
    g.head_weight.noalias() += dlogits * h.transpose();
    g.head_bias += dlogits;

    Vector upstream = head.weight.transpose() * dlogits;
    for (std::size_t l = n_layers; l-- > 0;) {
      Vector dpre = upstream;
      if (l + 1 < n_layers)
        dpre.array() *= (1.0 - t.activations[l + 1].array().square());
      dense_grad[l].noalias() += dpre * t.activations[l].transpose();
      if (l > 0) upstream = eff[l].transpose() * dpre;
    }
  }

  const double inv_n = 1.0 / static_cast<double>(batch.inputs.size());
  g.loss *= inv_n;
  g.head_weight *= inv_n;
  g.head_bias *= inv_n;
  for (Matrix& m : dense_grad) m *= inv_n;

  // Chain dL/dΔω_l into the factored parameters:
  //   ∂/∂s_{τ,i} = b_{τ,i}ᵀ G a_{τ,i},  ∂/∂B = G A,  ∂/∂A = Gᵀ B.
  g.transfer.layers.resize(n_layers);
  g.fresh.resize(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Matrix& G = dense_grad[l];
    for (std::size_t tau = 0; tau < state.past.size(); ++tau) {
      const LowRankFactors& f = state.past[tau].layers[l];
      const Matrix ga = G * f.a;
      Vector ds(f.rank());
      for (Eigen::Index r = 0; r < f.rank(); ++r) ds(r) = f.b.col(r).dot(ga.col(r));
      g.transfer.layers[l].push_back(std::move(ds));
    }
    const LowRankFactors& fresh = state.fresh->layers[l];
    g.fresh[l].b = G * fresh.a;
    g.fresh[l].a = G.transpose() * fresh.b;
  }
  return g;
}

}  // namespace proteus
