// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#include "proteus/theory.hpp"

#include "proteus/error.hpp"
#include "proteus/random.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

namespace proteus {

BoundValue error_bound(const BoundParams& p) {
  if (p.d < 1 || p.tasks < 1 || p.components < 1) throw ConfigError("error_bound: d, n and τ must be >= 1");
  if (!(p.sigma2 > 0.0)) throw ConfigError("error_bound: σ² must be > 0");
  BoundValue out;
  const double d = p.d;
  const double floor = std::max(0.0, -2.0 * p.kappa / d);
  if (p.delta < floor) {
    out.premise_violated = true;
    out.value = out.unclamped = 1.0;
    return out;
  }
  double value = std::exp(-d * p.delta * p.delta / (4.0 * p.delta + 16.0));
  const double weight = static_cast<double>(p.tasks - 1) * p.components;
  if (weight > 0.0) {
    const double a = d * p.delta / 2.0 + p.kappa;
    value += weight * std::exp(-a * a / (2.0 * p.sigma2 * d + (2.0 / 3.0) * a));
  }
  out.unclamped = value;
  out.value = std::clamp(value, 0.0, 1.0);
  return out;
}

double min_delta(double epsilon, int d, double kappa, double sigma2, long candidates) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("min_delta: ε must lie in (0, 1)");
  if (candidates < 1) throw ConfigError("min_delta: N must be >= 1");
  if (d < 1) throw ConfigError("min_delta: d must be >= 1");
  if (!(sigma2 > 0.0)) throw ConfigError("min_delta: σ² must be > 0");
  const double dd = d;
  const double m = 3.0 * dd * sigma2 - kappa;
  const double disc = m * m - 24.0 * dd * sigma2 * kappa;
  const double quadratic = disc < 0.0 ? -std::numeric_limits<double>::infinity()
                                      : 0.25 * (m + std::sqrt(disc)) - kappa;
  const double l = std::log(static_cast<double>(candidates) / epsilon);
  const double tail = l * (1.0 + std::sqrt(1.0 + 4.0 * dd / l));
  const double delta = std::max((2.0 / dd) * std::max(quadratic, tail), std::max(0.0, -2.0 * kappa / dd));
  return delta * (1.0 + 1e-12);
}

namespace {

void check_cross(std::span<const Vector> xs, const GaussianComponent& c, std::size_t minimum, const char* what) {
  if (xs.size() < minimum)
    throw DataError(std::string(what) + ": needs at least " + std::to_string(minimum) + " embeddings");
  for (const Vector& x : xs)
    if (x.size() != c.dim()) throw ShapeError(std::string(what) + ": dimension mismatch");
}

}  // namespace

double empirical_separation(std::span<const Vector> cross_embeddings, const GaussianComponent& false_component) {
  check_cross(cross_embeddings, false_component, 1, "empirical_separation");
  double sum = 0.0;
  for (const Vector& h : cross_embeddings) sum += signature_score(h, false_component);
  const double mean = sum / static_cast<double>(cross_embeddings.size());
  return mean / static_cast<double>(false_component.dim()) - 1.0;
}

double empirical_kappa(const GaussianComponent& truth, std::span<const GaussianComponent> others) {
  if (others.empty()) throw DataError("empirical_kappa: no false components");
  double best = std::numeric_limits<double>::infinity();
  for (const GaussianComponent& o : others) best = std::min(best, log_volume(o) - log_volume(truth));
  return best;
}

double empirical_sigma2(std::span<const Vector> cross_embeddings, const GaussianComponent& component) {
  check_cross(cross_embeddings, component, 2, "empirical_sigma2");
  const double n = static_cast<double>(cross_embeddings.size());
  double mean = 0.0;
  std::vector<double> q;
  q.reserve(cross_embeddings.size());
  for (const Vector& h : cross_embeddings) {
    q.push_back(signature_score(h, component));
    mean += q.back();
  }
  mean /= n;
  double ss = 0.0;
  for (double v : q) ss += (v - mean) * (v - mean);
  return ss / (n - 1.0) / static_cast<double>(component.dim());
}

namespace {

constexpr int kMcShards = 16;

struct ShardResult {
  long misses = 0;
  std::vector<double> sum;
  std::vector<double> sum_sq;
};

ShardResult run_shard(const McConfig& cfg, const Matrix& means, const Vector& mean_sq, long count, int shard) {
  Rng rng(derive_seed(cfg.seed, 1000u + static_cast<std::uint64_t>(shard)));
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index k = means.cols();
  ShardResult r;
  r.sum.assign(static_cast<std::size_t>(k), 0.0);
  r.sum_sq.assign(static_cast<std::size_t>(k), 0.0);
  Vector x(cfg.d);
  for (long s = 0; s < count; ++s) {
    for (int i = 0; i < cfg.d; ++i) x(i) = normal(rng);
    const double true_score = x.squaredNorm();
    bool miss = false;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double q = true_score - 2.0 * x.dot(means.col(j)) + mean_sq(j);
      if (q < true_score) miss = true;
      r.sum[static_cast<std::size_t>(j)] += q;
      r.sum_sq[static_cast<std::size_t>(j)] += q * q;
    }
    if (miss) ++r.misses;
  }
  return r;
}

}  // namespace

McReport mc_validate(const McConfig& cfg) {
  if (cfg.d < 1) throw ConfigError("mc_validate: d must be >= 1");
  if (cfg.tasks < 1 || cfg.components < 1) throw ConfigError("mc_validate: tasks and components must be >= 1");
  if (cfg.samples < 1) throw ConfigError("mc_validate: samples must be >= 1");
  if (!(cfg.delta >= 0.0)) throw ConfigError("mc_validate: δ must be >= 0");

  McReport rep;
  rep.config = cfg;
  rep.false_components = static_cast<long>(cfg.tasks - 1) * cfg.components;
  rep.sigma2 = 2.0 + 4.0 * cfg.delta;

  Rng placement(derive_seed(cfg.seed, 0));
  const double radius = std::sqrt(cfg.delta * cfg.d);
  Matrix means(cfg.d, rep.false_components);
  for (long j = 0; j < rep.false_components; ++j) {
    Vector u = gaussian_vector(cfg.d, 1.0, placement);
    while (u.norm() == 0.0) u = gaussian_vector(cfg.d, 1.0, placement);
    means.col(j) = radius * u / u.norm();
  }
  Vector mean_sq(rep.false_components);
  for (long j = 0; j < rep.false_components; ++j) mean_sq(j) = means.col(j).squaredNorm();

  std::vector<long> counts(kMcShards, cfg.samples / kMcShards);
  for (long i = 0; i < cfg.samples % kMcShards; ++i) ++counts[static_cast<std::size_t>(i)];
  std::vector<ShardResult> shards(kMcShards);
  const int threads = std::clamp(cfg.threads, 1, kMcShards);
  if (threads == 1) {
    for (int s = 0; s < kMcShards; ++s) shards[s] = run_shard(cfg, means, mean_sq, counts[s], s);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (int s = t; s < kMcShards; s += threads) shards[s] = run_shard(cfg, means, mean_sq, counts[s], s);
      });
    for (std::thread& th : pool) th.join();
  }

  // Fixed-order reduction.
  std::vector<double> sum(static_cast<std::size_t>(rep.false_components), 0.0);
  std::vector<double> sum_sq(sum.size(), 0.0);
  for (const ShardResult& s : shards) {
    rep.misretrievals += s.misses;
    for (std::size_t j = 0; j < sum.size(); ++j) {
      sum[j] += s.sum[j];
      sum_sq[j] += s.sum_sq[j];
    }
  }
  const double n = static_cast<double>(cfg.samples);
  rep.empirical_error = static_cast<double>(rep.misretrievals) / n;
  rep.standard_error = std::sqrt(rep.empirical_error * (1.0 - rep.empirical_error) / n);
  if (!sum.empty()) {
    rep.measured_delta = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < sum.size(); ++j) {
      const double mean = sum[j] / n;
      const double var = n > 1.0 ? (sum_sq[j] - n * mean * mean) / (n - 1.0) : 0.0;
      rep.measured_delta = std::min(rep.measured_delta, mean / cfg.d - 1.0);
      rep.measured_sigma2 = std::max(rep.measured_sigma2, var / cfg.d);
    }
  }
  rep.bound = error_bound({cfg.d, cfg.delta, 0.0, rep.sigma2, cfg.tasks, cfg.components});
  rep.within_bound = rep.empirical_error <= rep.bound.value + 3.0 * rep.standard_error;
  return rep;
}

Json to_json(const McReport& r) {
  return {{"d", r.config.d},
          {"delta", r.config.delta},
          {"tasks", r.config.tasks},
          {"components", r.config.components},
          {"samples", r.config.samples},
          {"seed", r.config.seed},
          {"false_components", r.false_components},
          {"misretrievals", r.misretrievals},
          {"empirical_error", r.empirical_error},
          {"standard_error", r.standard_error},
          {"sigma2", r.sigma2},
          {"measured_delta", r.measured_delta},
          {"measured_sigma2", r.measured_sigma2},
          {"bound", r.bound.value},
          {"bound_unclamped", r.bound.unclamped},
          {"premise_violated", r.bound.premise_violated},
          {"within_bound", r.within_bound}};
}

std::string mc_csv(std::span<const McReport> reports) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "d,delta,tasks,components,samples,seed,empirical_error,standard_error,bound,premise_violated,within_bound\n";
  for (const McReport& r : reports)
    os << r.config.d << ',' << r.config.delta << ',' << r.config.tasks << ',' << r.config.components << ','
       << r.config.samples << ',' << r.config.seed << ',' << r.empirical_error << ',' << r.standard_error << ','
       << r.bound.value << ',' << (r.bound.premise_violated ? 1 : 0) << ',' << (r.within_bound ? 1 : 0) << '\n';
  return os.str();
}

bool BoundReport::all_exceed() const {
  return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const BoundRow& r) { return r.exceeds; });
}

Json to_json(const BoundReport& r) {
  Json rows = Json::array();
  for (const BoundRow& b : r.rows)
    rows.push_back({{"task", b.task},
                    {"component", b.component},
                    {"samples", b.samples},
                    {"delta", b.delta},
                    {"kappa", b.kappa},
                    {"sigma2", b.sigma2},
                    {"sigma2_floored", b.sigma2_floored},
                    {"N", b.candidates},
                    {"min_delta", b.min_delta},
                    {"bound", b.bound},
                    {"premise_violated", b.premise_violated},
                    {"retrieval_error", b.retrieval_error},
                    {"exceeds", b.exceeds}});
  return {{"epsilon", r.epsilon}, {"all_exceed", r.all_exceed()}, {"rows", std::move(rows)}};
}

std::string to_csv(const BoundReport& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "task,component,samples,delta,kappa,sigma2,N,min_delta,bound,premise_violated,retrieval_error,exceeds\n";
  for (const BoundRow& b : r.rows)
    os << b.task << ',' << b.component << ',' << b.samples << ',' << b.delta << ',' << b.kappa << ',' << b.sigma2
       << ',' << b.candidates << ',' << b.min_delta << ',' << b.bound << ',' << (b.premise_violated ? 1 : 0) << ','
       << b.retrieval_error << ',' << (b.exceeds ? 1 : 0) << '\n';
  return os.str();
}

}  // namespace proteus
