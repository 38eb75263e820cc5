// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#include "proteus/signature.hpp"

#include "proteus/error.hpp"
#include "proteus/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace proteus {

GaussianComponent::GaussianComponent(double weight, Vector mean, Matrix cov)
    : weight_(weight), mean_(std::move(mean)), cov_(std::move(cov)) {
  if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size())
    throw ShapeError("gaussian component: covariance does not match mean dimension");
  cov_ = 0.5 * (cov_ + cov_.transpose());
  chol_ = Cholesky(cov_);
}

double default_ridge(const Matrix& cov) {
  const double d = static_cast<double>(std::max<Eigen::Index>(1, cov.rows()));
  return std::max(1e-6 * cov.trace() / d, 1e-10);
}

namespace {

void check_points(std::span<const Vector> pts, std::size_t minimum) {
  if (pts.size() < minimum)
    throw InsufficientDataError("signature fit needs at least " + std::to_string(minimum) +
                                " embeddings, got " + std::to_string(pts.size()));
  const Eigen::Index d = pts.front().size();
  for (const Vector& p : pts)
    if (p.size() != d) throw ShapeError("signature fit: embeddings differ in dimension");
}

Vector sample_mean(std::span<const Vector> pts) {
  return ordered_sum(pts, pts.front().size()) / static_cast<double>(pts.size());
}

Matrix scatter(std::span<const Vector> pts, const Vector& mean) {
  const Eigen::Index d = mean.size();
  Matrix s = Matrix::Zero(d, d);
  for (const Vector& p : pts) {
    const Vector c = p - mean;
    s.selfadjointView<Eigen::Lower>().rankUpdate(c);
  }
  s.triangularView<Eigen::StrictlyUpper>() = s.transpose();
  return s;
}

double log_sum_exp(const Vector& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

struct Mixture {
  std::vector<GaussianComponent> comps;
};

/// Weighted log densities log w_t + log N(h | t), one column per component.
Matrix weighted_log_densities(std::span<const Vector> pts, const Mixture& mix) {
  Matrix out(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(mix.comps.size()));
  for (std::size_t t = 0; t < mix.comps.size(); ++t) {
    const GaussianComponent& c = mix.comps[t];
    const double lw = std::log(c.weight());
    for (std::size_t i = 0; i < pts.size(); ++i)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = lw + gaussian_log_density(pts[i], c);
  }
  return out;
}

/// k-means++ seeding followed by a few Lloyd rounds; returns hard labels.
std::vector<int> kmeans_init(std::span<const Vector> pts, int k, Rng& rng) {
  const std::size_t n = pts.size();
  std::vector<Vector> centers;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  centers.push_back(pts[pick(rng)]);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (pts[i] - centers.back()).squaredNorm());
      total += d2[i];
    }
    if (!(total > 0.0)) break;  // fewer distinct points than k
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng);
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= d2[i];
      if (target <= 0.0 && d2[i] > 0.0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(pts[chosen]);
  }

  std::vector<int> label(n, 0);
  for (int round = 0; round < 10; ++round) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < centers.size(); ++c) {
        const double dd = (pts[i] - centers[c]).squaredNorm();
        if (dd < best_d) {
          best_d = dd;
          best = static_cast<int>(c);
        }
      }
      if (label[i] != best) changed = true;
      label[i] = best;
    }
    std::vector<Vector> sums(centers.size(), Vector::Zero(pts.front().size()));
    std::vector<int> counts(centers.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[static_cast<std::size_t>(label[i])] += pts[i];
      ++counts[static_cast<std::size_t>(label[i])];
    }
    for (std::size_t c = 0; c < centers.size(); ++c)
      if (counts[c] > 0) centers[c] = sums[c] / counts[c];
    if (!changed && round > 0) break;
  }
  return label;
}

/// M-step from responsibilities (n × τ). Components with effective count
/// below one point are dropped.
Mixture m_step(std::span<const Vector> pts, const Matrix& resp, double ridge) {
  const Eigen::Index d = pts.front().size();
  const double n = static_cast<double>(pts.size());
  Mixture mix;
  for (Eigen::Index t = 0; t < resp.cols(); ++t) {
    const double nt = resp.col(t).sum();
    if (nt < 1.0) continue;
    Vector mean = Vector::Zero(d);
    for (std::size_t i = 0; i < pts.size(); ++i) mean += resp(static_cast<Eigen::Index>(i), t) * pts[i];
    mean /= nt;
    Matrix cov = Matrix::Zero(d, d);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double r = resp(static_cast<Eigen::Index>(i), t);
      if (r == 0.0) continue;
      const Vector c = pts[i] - mean;
      cov.selfadjointView<Eigen::Lower>().rankUpdate(c, r);
    }
    cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
    cov /= nt;
    cov.diagonal().array() += ridge;
    mix.comps.emplace_back(nt / n, std::move(mean), std::move(cov));
  }
  return mix;
}

struct EmRun {
  Mixture mix;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  std::vector<double> trace;
};

EmRun run_em(std::span<const Vector> pts, int k, double ridge, const MultiKeyOptions& opt, Rng& rng) {
  const std::vector<int> labels = kmeans_init(pts, k, rng);
  Matrix resp = Matrix::Zero(static_cast<Eigen::Index>(pts.size()), k);
  for (std::size_t i = 0; i < pts.size(); ++i) resp(static_cast<Eigen::Index>(i), labels[i]) = 1.0;

  EmRun run;
  run.mix = m_step(pts, resp, ridge);
  for (int iter = 0; iter <= opt.max_iterations; ++iter) {
    const Matrix lw = weighted_log_densities(pts, run.mix);
    double ll = 0.0;
    resp.resize(lw.rows(), lw.cols());
    for (Eigen::Index i = 0; i < lw.rows(); ++i) {
      const double norm = log_sum_exp(lw.row(i).transpose());
      ll += norm;
      resp.row(i) = (lw.row(i).array() - norm).exp();
    }
    run.trace.push_back(ll);
    const double previous = run.log_likelihood;
    run.log_likelihood = ll;
    if (iter == opt.max_iterations) break;
    if (iter > 0 && ll - previous < opt.tolerance) break;
    Mixture next = m_step(pts, resp, ridge);
    if (next.comps.empty()) break;
    run.mix = std::move(next);
  }
  return run;
}

double bic(double log_likelihood, int components, Eigen::Index d, std::size_t n) {
  const double dd = static_cast<double>(d);
  const double params = components * (dd + dd * (dd + 1.0) / 2.0) + (components - 1);
  return -2.0 * log_likelihood + params * std::log(static_cast<double>(n));
}

}  // namespace

GaussianComponent fit_gaussian(std::span<const Vector> embeddings, std::optional<double> ridge) {
  check_points(embeddings, 2);
  const Vector mean = sample_mean(embeddings);
  Matrix cov = scatter(embeddings, mean) / static_cast<double>(embeddings.size());
  const double eps = ridge.value_or(default_ridge(cov));
  if (eps < 0.0) throw ConfigError("fit_gaussian: ridge must be >= 0");
  cov.diagonal().array() += eps;
  return GaussianComponent(1.0, mean, std::move(cov));
}

double signature_score(const Vector& h, const GaussianComponent& c) {
  if (h.size() != c.dim()) throw ShapeError("signature_score: dimension mismatch");
  return c.chol().quadratic_form(h - c.mean());
}

double gaussian_log_density(const Vector& h, const GaussianComponent& c) {
  const double d = static_cast<double>(c.dim());
  return -0.5 * (signature_score(h, c) + c.chol().log_det() + d * std::log(2.0 * std::numbers::pi));
}

double log_volume(const GaussianComponent& c) { return c.chol().log_det(); }

MixtureStrategy parse_mixture_strategy(const std::string& name) {
  if (name == "em-bic") return MixtureStrategy::em_bic;
  throw ConfigError("unknown signature strategy '" + name + "' (expected em-bic)");
}

MultiKeyFit fit_multikey_detailed(std::span<const Vector> embeddings, const MultiKeyOptions& options) {
  if (options.max_components < 1) throw ConfigError("fit_multikey: max_components must be >= 1");
  if (options.restarts < 1) throw ConfigError("fit_multikey: restarts must be >= 1");
  check_points(embeddings, 2);

  const Vector mean = sample_mean(embeddings);
  const Matrix global_cov = scatter(embeddings, mean) / static_cast<double>(embeddings.size());
  const double ridge = options.ridge.value_or(default_ridge(global_cov));
  if (ridge < 0.0) throw ConfigError("fit_multikey: ridge must be >= 0");

  MultiKeyFit fit;
  bool all_identical = true;
  for (const Vector& p : embeddings)
    if (p != embeddings.front()) {
      all_identical = false;
      break;
    }
  if (all_identical) {
    const Eigen::Index d = mean.size();
    Matrix cov = Matrix::Identity(d, d) * ridge;
    fit.signature.components.emplace_back(1.0, mean, cov);
    MixtureCandidate only;
    only.requested = 1;
    only.components = 1;
    only.log_likelihood = mixture_log_likelihood(embeddings, fit.signature);
    only.bic = bic(only.log_likelihood, 1, d, embeddings.size());
    only.trace = {only.log_likelihood};
    fit.candidates.push_back(std::move(only));
    return fit;
  }

  const int max_k = std::min<int>(options.max_components, static_cast<int>(embeddings.size()));
  const Eigen::Index d = mean.size();
  double best_bic = std::numeric_limits<double>::infinity();
  Mixture best_mix;
  for (int k = 1; k <= max_k; ++k) {
    EmRun best_run;
    for (int r = 0; r < options.restarts; ++r) {
      Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(k) * 64u + static_cast<std::uint64_t>(r)));
      EmRun run = run_em(embeddings, k, ridge, options, rng);
      if (run.log_likelihood > best_run.log_likelihood) best_run = std::move(run);
    }
    MixtureCandidate cand;
    cand.requested = k;
    cand.components = static_cast<int>(best_run.mix.comps.size());
    cand.log_likelihood = best_run.log_likelihood;
    cand.bic = bic(cand.log_likelihood, cand.components, d, embeddings.size());
    cand.trace = std::move(best_run.trace);
    if (cand.bic < best_bic) {
      best_bic = cand.bic;
      best_mix = std::move(best_run.mix);
      fit.selected = fit.candidates.size();
    }
    fit.candidates.push_back(std::move(cand));
  }

  double total = 0.0;
  for (const GaussianComponent& c : best_mix.comps) total += c.weight();
  for (GaussianComponent& c : best_mix.comps) c.set_weight(c.weight() / total);
  fit.signature.components = std::move(best_mix.comps);
  return fit;
}

double mixture_log_likelihood(std::span<const Vector> embeddings, const MultiKeySignature& sig) {
  Mixture mix{sig.components};
  const Matrix lw = weighted_log_densities(embeddings, mix);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < lw.rows(); ++i) ll += log_sum_exp(lw.row(i).transpose());
  return ll;
}

std::vector<int> assign_components(const MultiKeySignature& sig, std::span<const Vector> embeddings) {
  Mixture mix{sig.components};
  const Matrix lw = weighted_log_densities(embeddings, mix);
  std::vector<int> out(embeddings.size(), 0);
  for (Eigen::Index i = 0; i < lw.rows(); ++i) {
    Eigen::Index arg = 0;
    lw.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

}  // namespace proteus
