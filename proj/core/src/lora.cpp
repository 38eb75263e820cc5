// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#include "proteus/lora.hpp"

#include "proteus/error.hpp"
#include "proteus/random.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace proteus {

LoraOverlay compose_update(std::span<const LoraUnit> past, const TransferCoefficients& s,
                           const LoraUnit& fresh) {
  const std::size_t n_layers = fresh.layers.size();
  if (s.layers.size() != n_layers && !(past.empty() && s.layers.empty()))
    throw ShapeError("compose_update: transfer has " + std::to_string(s.layers.size()) +
                     " layers, unit has " + std::to_string(n_layers));

  LoraOverlay out;
  out.task = fresh.task;
  out.delta.reserve(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const LowRankFactors& f = fresh.layers[l];
    if (f.a.cols() != f.b.cols()) throw ShapeError("compose_update: B and A ranks differ");
    Matrix delta = f.b * f.a.transpose();
    if (!past.empty() && s.layers[l].size() != past.size())
      throw ShapeError("compose_update: transfer blocks do not match past units");
    for (std::size_t tau = 0; tau < past.size(); ++tau) {
      if (past[tau].layers.size() != n_layers)
        throw ShapeError("compose_update: past unit layer count mismatch");
      const LowRankFactors& p = past[tau].layers[l];
      const Vector& diag = s.layers[l][tau];
      if (diag.size() != p.rank() || p.a.cols() != p.rank())
        throw ShapeError("compose_update: transfer block rank mismatch");
      if (p.b.rows() != delta.rows() || p.a.rows() != delta.cols())
        throw ShapeError("compose_update: past unit shape mismatch");
      delta.noalias() += p.b * diag.asDiagonal() * p.a.transpose();
    }
    out.delta.push_back(std::move(delta));
  }
  return out;
}

std::vector<double> lora_inner_product(const LoraUnit& u, const LoraUnit& v) {
  if (u.layers.size() != v.layers.size()) throw ShapeError("lora_inner_product: layer count mismatch");
  std::vector<double> out;
  out.reserve(u.layers.size());
  for (std::size_t l = 0; l < u.layers.size(); ++l) {
    const LowRankFactors& a = u.layers[l];
    const LowRankFactors& b = v.layers[l];
    if (a.b.rows() != b.b.rows() || a.a.rows() != b.a.rows())
      throw ShapeError("lora_inner_product: layer " + std::to_string(l) + " shape mismatch");
    const Matrix aa = a.a.transpose() * b.a;  // r_u × r_v
    const Matrix bb = b.b.transpose() * a.b;  // r_v × r_u
    out.push_back((aa * bb).trace());
  }
  return out;
}

std::vector<double> lora_norm(const LoraUnit& u) {
  std::vector<double> sq = lora_inner_product(u, u);
  for (double& x : sq) x = std::sqrt(std::max(0.0, x));
  return sq;
}

Matrix project_new_directions(const Matrix& a_columns, const Matrix& basis) {
  if (basis.cols() == 0) return a_columns;
  if (basis.rows() != a_columns.rows()) throw ShapeError("project_new_directions: dimension mismatch");
  Matrix out = a_columns - basis * (basis.transpose() * a_columns);
  // Second pass removes the rounding residue of the first.
  out -= basis * (basis.transpose() * out);
  return out;
}

Matrix past_input_basis(std::span<const LoraUnit> past, std::size_t layer, Eigen::Index q) {
  std::vector<Matrix> blocks;
  blocks.reserve(past.size());
  for (const LoraUnit& u : past) {
    if (layer >= u.layers.size()) throw ShapeError("past_input_basis: layer out of range");
    blocks.push_back(u.layers[layer].a);
  }
  if (blocks.empty()) return Matrix(q, 0);
  return orthonormal_basis(hstack(blocks, q));
}

TransferCoefficients make_transfer(std::span<const LoraUnit> past, double fill) {
  TransferCoefficients s;
  if (past.empty()) return s;
  const std::size_t n_layers = past.front().layers.size();
  s.layers.resize(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l)
    for (const LoraUnit& u : past) s.layers[l].push_back(Vector::Constant(u.layers[l].rank(), fill));
  return s;
}

ElasticNet elastic_net(const TransferCoefficients& s, double lambda, double alpha) {
  ElasticNet out;
  out.subgradient.layers.resize(s.layers.size());
  for (std::size_t l = 0; l < s.layers.size(); ++l) {
    double l1 = 0.0;
    double sq = 0.0;
    for (const Vector& block : s.layers[l]) {
      l1 += block.cwiseAbs().sum();
      sq += block.squaredNorm();
    }
    const double l2 = std::sqrt(sq);
    out.penalty += lambda * (alpha * l1 + (1.0 - alpha) * l2);
    for (const Vector& block : s.layers[l]) {
      Vector g(block.size());
      for (Eigen::Index i = 0; i < block.size(); ++i) {
        const double v = block(i);
        const double sign = (v > 0.0) ? 1.0 : ((v < 0.0) ? -1.0 : 0.0);
        const double radial = (l2 > 0.0) ? v / l2 : 0.0;
        g(i) = lambda * (alpha * sign + (1.0 - alpha) * radial);
      }
      out.subgradient.layers[l].push_back(std::move(g));
    }
  }
  return out;
}

int rank_schedule(int r0, double alpha_decay, int m) {
  if (r0 < 1) throw ConfigError("rank_schedule: r0 must be >= 1");
  if (m < 1) throw ConfigError("rank_schedule: task index must be >= 1");
  if (alpha_decay < 0.0) throw ConfigError("rank_schedule: decay must be >= 0");
  const double r = static_cast<double>(r0) * std::exp(-alpha_decay * static_cast<double>(m - 1));
  return std::max(1, static_cast<int>(std::lround(r)));
}

std::string to_string(TransferMode mode) {
  switch (mode) {
    case TransferMode::learned: return "learned";
    case TransferMode::zero: return "zero";
    case TransferMode::identity: return "identity";
  }
  return "learned";
}

TransferMode parse_transfer_mode(const std::string& name) {
  if (name == "learned") return TransferMode::learned;
  if (name == "zero") return TransferMode::zero;
  if (name == "identity") return TransferMode::identity;
  throw ConfigError("unknown transfer_mode '" + name + "' (expected learned|zero|identity)");
}

void TrainConfig::validate() const {
  if (!(lambda0 >= 0.0)) throw ConfigError("train config: lambda must be >= 0");
  if (!(lambda_decay >= 0.0)) throw ConfigError("train config: lambda_decay must be >= 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("train config: alpha must lie in [0, 1]");
  if (rank < 1) throw ConfigError("train config: rank must be >= 1");
  if (!(rank_decay >= 0.0)) throw ConfigError("train config: rank_decay must be >= 0");
  if (epochs < 0) throw ConfigError("train config: epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("train config: learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
}

double TrainConfig::lambda_for(int past_tasks) const {
  return lambda0 * std::pow(lambda_decay, static_cast<double>(past_tasks));
}

int TrainConfig::rank_for(int m) const { return rank_schedule(rank, rank_decay, m); }

double transfer_sparsity(const TransferCoefficients& s, double threshold) {
  std::size_t total = 0;
  std::size_t small = 0;
  for (const auto& layer : s.layers)
    for (const Vector& block : layer)
      for (Eigen::Index i = 0; i < block.size(); ++i) {
        ++total;
        if (std::abs(block(i)) < threshold) ++small;
      }
  return total == 0 ? 0.0 : static_cast<double>(small) / static_cast<double>(total);
}

namespace {

double max_cosine(const LoraUnit& fresh, std::span<const LoraUnit> past) {
  double worst = 0.0;
  const std::vector<double> nf = lora_norm(fresh);
  for (const LoraUnit& p : past) {
    const std::vector<double> ip = lora_inner_product(fresh, p);
    const std::vector<double> np = lora_norm(p);
    for (std::size_t l = 0; l < ip.size(); ++l) {
      const double denom = nf[l] * np[l];
      if (denom > 0.0) worst = std::max(worst, std::abs(ip[l]) / denom);
    }
  }
  return worst;
}

}  // namespace

TrainedAdapter train_task(std::span<const LabeledSample> data, std::span<const LoraUnit> past,
                          const BackboneWeights& backbone, const TrainConfig& cfg, int task_id) {
  cfg.validate();
  if (data.empty()) throw DataError("train_task: empty dataset for task " + std::to_string(task_id));

  const std::size_t n_layers = backbone.layers.size();
  const int past_count = static_cast<int>(past.size());
  const int rank = cfg.rank_for(past_count + 1);

  // Global labels → head-local indices, in ascending label order.
  std::map<int, int> local;
  for (const LabeledSample& s : data) local.emplace(s.label, 0);
  int next = 0;
  for (auto& [label, idx] : local) idx = next++;
  std::vector<Vector> inputs;
  std::vector<int> labels;
  inputs.reserve(data.size());
  labels.reserve(data.size());
  for (const LabeledSample& s : data) {
    if (s.x.size() != backbone.input_dim()) throw ShapeError("train_task: input dimension mismatch");
    inputs.push_back(s.x);
    labels.push_back(local.at(s.label));
  }

  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(task_id)));

  TrainedAdapter out;
  LoraUnit& fresh = out.unit;
  fresh.task = task_id;
  std::vector<Matrix> bases;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Matrix& w = backbone.layers[l].weight;
    LowRankFactors f;
    f.b = gaussian_matrix(w.rows(), rank, 1.0 / std::sqrt(static_cast<double>(rank)), rng);
    f.a = gaussian_matrix(w.cols(), rank, 1.0 / std::sqrt(static_cast<double>(w.cols())), rng);
    bases.push_back(cfg.ortho ? past_input_basis(past, l, w.cols()) : Matrix(w.cols(), 0));
    f.a = project_new_directions(f.a, bases.back());
    fresh.layers.push_back(std::move(f));
  }

  const double fill = (cfg.transfer == TransferMode::identity) ? 1.0 : 0.0;
  TransferCoefficients& s = out.transfer;
  s = make_transfer(past, fill);
  if (past.empty()) s.layers.assign(n_layers, {});
  const bool learn_s = cfg.transfer == TransferMode::learned && past_count > 0;

  TaskHead head;
  const int classes = next;
  head.weight = gaussian_matrix(classes, backbone.embedding_dim(),
                                1.0 / std::sqrt(static_cast<double>(backbone.embedding_dim())), rng);
  head.bias = Vector::Zero(classes);

  const double lambda = cfg.lambda_for(past_count);
  const double lr = cfg.learning_rate;
  TaskTrainLog& log = out.log;
  log.task = task_id;
  log.rank = rank;
  log.lambda = lambda;

  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Vector> batch_x;
  std::vector<int> batch_y;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch_x.clear();
      batch_y.clear();
      for (std::size_t i = start; i < stop; ++i) {
        batch_x.push_back(inputs[order[i]]);
        batch_y.push_back(labels[order[i]]);
      }
      const AdapterState state{past, &s, &fresh, &head};
      const AdapterGradients g = backprop({batch_x, batch_y}, backbone, state);
      epoch_loss += g.loss * static_cast<double>(stop - start);

      head.weight -= lr * g.head_weight;
      head.bias -= lr * g.head_bias;
      for (std::size_t l = 0; l < n_layers; ++l) {
        fresh.layers[l].b -= lr * g.fresh[l].b;
        fresh.layers[l].a -= lr * g.fresh[l].a;
        if (cfg.ortho) fresh.layers[l].a = project_new_directions(fresh.layers[l].a, bases[l]);
      }
      if (learn_s) {
        const ElasticNet reg = elastic_net(s, lambda, cfg.alpha);
        for (std::size_t l = 0; l < n_layers; ++l)
          for (std::size_t tau = 0; tau < s.layers[l].size(); ++tau)
            s.layers[l][tau] -= lr * (g.transfer.layers[l][tau] + reg.subgradient.layers[l][tau]);
      }
    }
    log.epoch_loss.push_back(epoch_loss / static_cast<double>(inputs.size()));
  }

  // Final bookkeeping on the committed state.
  // A layer whose input span is exhausted keeps only projection round-off;
  // commit it as an exact zero block.
  for (std::size_t l = 0; l < n_layers; ++l) {
    Matrix& a = fresh.layers[l].a;
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if (a.size() == 0 || a.cwiseAbs().maxCoeff() <= 1e-12 * scale) {
      log.degenerate_layers.push_back(l);
      a.setZero();
    }
  }
  const LoraOverlay overlay = compose_update(past, s, fresh);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Vector h = embed(inputs[i], backbone, &overlay);
    Eigen::Index arg = 0;
    (head.weight * h + head.bias).maxCoeff(&arg);
    if (arg == labels[i]) ++correct;
  }
  log.train_accuracy = static_cast<double>(correct) / static_cast<double>(inputs.size());
  log.penalty = elastic_net(s, lambda, cfg.alpha).penalty;
  log.sparsity = transfer_sparsity(s);
  log.max_ortho_cosine = max_cosine(fresh, past);
  return out;
}

}  // namespace proteus
