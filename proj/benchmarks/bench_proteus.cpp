// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#include "proteus/backbone.hpp"
#include "proteus/kb.hpp"
#include "proteus/lda.hpp"
#include "proteus/lora.hpp"
#include "proteus/random.hpp"
#include "proteus/theory.hpp"

#include <benchmark/benchmark.h>

#include <vector>

namespace {

using namespace proteus;

constexpr int kDim = 16;
constexpr int kHidden = 64;

BackboneWeights bench_backbone() { return init_backbone(std::vector<int>{kDim, kHidden, kDim}, 1); }

LoraUnit unit_for(const BackboneWeights& w, int rank, int task, Rng& rng) {
  LoraUnit u;
  u.task = task;
  for (const DenseLayer& l : w.layers)
    u.layers.push_back({gaussian_matrix(l.weight.rows(), rank, 0.1, rng), gaussian_matrix(l.weight.cols(), rank, 0.1, rng)});
  return u;
}

KnowledgeBase bench_kb(int tasks, int components) {
  Rng rng(7);
  KnowledgeBase kb(bench_backbone());
  for (int t = 1; t <= tasks; ++t) {
    const std::vector<LoraUnit> past = kb.units();
    MultiKeySignature sig;
    sig.task = t;
    for (int c = 0; c < components; ++c) {
      const Matrix g = gaussian_matrix(kDim, kDim, 1.0, rng);
      sig.components.emplace_back(1.0 / components, gaussian_vector(kDim, 1.0, rng),
                                  g * g.transpose() / kDim + 0.5 * Matrix::Identity(kDim, kDim));
    }
    kb.commit(std::move(sig), unit_for(kb.backbone(), 1, t, rng), make_transfer(past, 0.5));
  }
  return kb;
}

void BM_Embed(benchmark::State& state) {
  const BackboneWeights w = bench_backbone();
  Rng rng(2);
  const LoraUnit u = unit_for(w, 4, 0, rng);
  const LoraOverlay overlay = compose_update({}, TransferCoefficients{}, u);
  const Vector x = gaussian_vector(kDim, 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(embed(x, w, &overlay));
}
BENCHMARK(BM_Embed);

void BM_Backprop(benchmark::State& state) {
  const BackboneWeights w = bench_backbone();
  Rng rng(3);
  std::vector<LoraUnit> past;
  for (int t = 0; t < 4; ++t) past.push_back(unit_for(w, 4, t, rng));
  TransferCoefficients s = make_transfer(past, 0.5);
  LoraUnit fresh = unit_for(w, 4, 4, rng);
  TaskHead head{gaussian_matrix(4, kDim, 0.25, rng), Vector::Zero(4)};
  std::vector<Vector> xs;
  std::vector<int> ys;
  for (int i = 0; i < state.range(0); ++i) {
    xs.push_back(gaussian_vector(kDim, 1.0, rng));
    ys.push_back(i % 4);
  }
  const AdapterState st{past, &s, &fresh, &head};
  for (auto _ : state) benchmark::DoNotOptimize(backprop({xs, ys}, w, st));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Backprop)->Arg(32)->Arg(128);

void BM_Retrieve(benchmark::State& state) {
  const KnowledgeBase kb = bench_kb(static_cast<int>(state.range(0)), 4);
  Rng rng(4);
  const Vector x = gaussian_vector(kDim, 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(retrieve(kb, x));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Retrieve)->RangeMultiplier(2)->Range(1, 32)->Complexity(benchmark::oN);

void BM_RetrieveTopK(benchmark::State& state) {
  const KnowledgeBase kb = bench_kb(static_cast<int>(state.range(0)), 4);
  Rng rng(5);
  const Vector x = gaussian_vector(kDim, 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(retrieve_topk(kb, x, 2));
}
BENCHMARK(BM_RetrieveTopK)->RangeMultiplier(4)->Range(1, 32);

void BM_LdaPredict(benchmark::State& state) {
  Rng rng(6);
  LdaStats s(kDim);
  s.tasks = 10;
  for (int c = 0; c < 40; ++c) register_class(s, c);
  for (int i = 0; i < 8000; ++i) accumulate(s, gaussian_vector(kDim, 1.0, rng), i % 40, 800, 10);
  const LdaClassifier clf(s, 1e-2);
  const Vector h = gaussian_vector(kDim, 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(clf.predict(h));
}
BENCHMARK(BM_LdaPredict);

void BM_McValidate(benchmark::State& state) {
  McConfig cfg;
  cfg.samples = 10000;
  for (auto _ : state) benchmark::DoNotOptimize(mc_validate(cfg));
}
BENCHMARK(BM_McValidate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
