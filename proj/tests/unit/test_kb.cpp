// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#include "proteus/error.hpp"
#include "proteus/kb.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <limits>

namespace proteus {
namespace {

BackboneWeights small_backbone(std::uint64_t seed = 3) {
  const std::array<int, 3> dims{3, 5, 3};
  return init_backbone(dims, seed);
}

LoraUnit zero_unit(const BackboneWeights& w, int task) {
  LoraUnit u;
  u.task = task;
  for (const DenseLayer& l : w.layers)
    u.layers.push_back({Matrix::Zero(l.weight.rows(), 1), Matrix::Zero(l.weight.cols(), 1)});
  return u;
}

MultiKeySignature single(int task, const Vector& mean, const Matrix& cov, double weight = 1.0) {
  MultiKeySignature s;
  s.task = task;
  s.components.emplace_back(weight, mean, cov);
  return s;
}

void commit_zero(KnowledgeBase& kb, MultiKeySignature sig) {
  const std::vector<LoraUnit> past = kb.units();
  kb.commit(std::move(sig), zero_unit(kb.backbone(), static_cast<int>(kb.size()) + 1), make_transfer(past, 0.0));
}

KnowledgeBase random_kb(int tasks, std::uint64_t seed) {
  Rng rng(seed);
  KnowledgeBase kb(small_backbone(seed));
  for (int t = 1; t <= tasks; ++t) {
    const std::vector<LoraUnit> past = kb.units();
    MultiKeySignature sig;
    sig.task = t;
    const int comps = 1 + static_cast<int>(rng() % 3);
    for (int c = 0; c < comps; ++c)
      sig.components.emplace_back(1.0 / comps, gaussian_vector(3, 1.0, rng), testing::random_spd(3, rng, 0.05));
    kb.commit(std::move(sig), testing::random_unit(kb.backbone(), 2, t, rng), testing::random_transfer(past, rng));
  }
  return kb;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("proteus_kb_" + name + ".json");
}

TEST(KnowledgeBase, CommitAssignsOrdinalsInOrder) {
  KnowledgeBase kb = random_kb(4, 1);
  ASSERT_EQ(kb.size(), 4u);
  for (std::size_t i = 0; i < kb.size(); ++i) {
    EXPECT_EQ(kb.entries()[i].ordinal, i);
    EXPECT_EQ(kb.find(static_cast<int>(i) + 1), static_cast<long>(i));
  }
  EXPECT_EQ(kb.find(99), -1);
}

TEST(KnowledgeBase, RejectsDuplicateTask) {
  KnowledgeBase kb(small_backbone());
  commit_zero(kb, single(1, Vector::Zero(3), Matrix::Identity(3, 3)));
  EXPECT_THROW(kb.commit(single(1, Vector::Zero(3), Matrix::Identity(3, 3)), zero_unit(kb.backbone(), 1),
                         make_transfer(kb.units(), 0.0)),
               ConfigError);
}

TEST(KnowledgeBase, RejectsMalformedEntries) {
  KnowledgeBase kb(small_backbone());
  MultiKeySignature empty;
  EXPECT_THROW(kb.commit(empty, zero_unit(kb.backbone(), 1), {}), ShapeError);
  EXPECT_THROW(kb.commit(single(1, Vector::Zero(4), Matrix::Identity(4, 4)), zero_unit(kb.backbone(), 1), {}),
               ShapeError);
  commit_zero(kb, single(1, Vector::Zero(3), Matrix::Identity(3, 3)));
  EXPECT_THROW(kb.commit(single(2, Vector::Zero(3), Matrix::Identity(3, 3)), zero_unit(kb.backbone(), 2), {}),
               ShapeError);
}

TEST(KnowledgeBase, OverlayMatchesCompose) {
  const KnowledgeBase kb = random_kb(3, 2);
  std::vector<LoraUnit> past;
  for (std::size_t i = 0; i < kb.size(); ++i) {
    const KbEntry& e = kb.entries()[i];
    const LoraOverlay o = compose_update(past, e.transfer, e.value);
    for (std::size_t l = 0; l < o.delta.size(); ++l)
      EXPECT_LT((o.delta[l] - kb.overlay(i).delta[l]).cwiseAbs().maxCoeff(), 1e-14);
    past.push_back(e.value);
  }
}

TEST(KnowledgeBase, SaveLoadSaveIsByteStable) {
  KnowledgeBase kb = random_kb(5, 3);
  kb.lda() = LdaStats(3);
  register_class(kb.lda(), 7);
  accumulate(kb.lda(), Vector::Ones(3), 7, 10, 5);
  kb.meta()["seed"] = 11;
  const std::string first = to_json_string(kb);
  const KnowledgeBase back = kb_from_json_string(first);
  EXPECT_EQ(back, kb);
  EXPECT_EQ(to_json_string(back), first);

  const auto path = temp_path("roundtrip");
  save(kb, path);
  const KnowledgeBase loaded = load(path);
  std::filesystem::remove(path);
  EXPECT_EQ(to_json_string(loaded), first);
}

TEST(KnowledgeBase, RejectsOtherVersions) {
  Json doc = to_json(random_kb(1, 4));
  doc["version"] = KnowledgeBase::kFormatVersion + 1;
  EXPECT_THROW(kb_from_json(doc), VersionError);
  doc.erase("version");
  EXPECT_THROW(kb_from_json(doc), VersionError);
}

TEST(KnowledgeBase, RejectsTamperedCovariance) {
  Json doc = to_json(random_kb(1, 5));
  const std::string text = doc.dump();
  Json bad = Json::parse(text);
  // Locate the first covariance and break its symmetry.
  Json& comp = bad["entries"][0]["multikey"]["components"][0];
  ASSERT_TRUE(comp.contains("cov")) << comp.dump();
  comp["cov"][0][1] = comp["cov"][0][1].get<double>() + 1.0;
  EXPECT_THROW(kb_from_json(bad), ValidationError);
}

TEST(KnowledgeBase, RejectsMalformedJsonText) {
  EXPECT_THROW(kb_from_json_string("{\"version\": 1,"), DataError);
  EXPECT_THROW(kb_from_json_string("[]"), ValidationError);
}

TEST(KnowledgeBase, LoadMissingFileIsDataError) {
  EXPECT_THROW(load(temp_path("does_not_exist")), DataError);
}

TEST(Retrieve, EmptyBaseIsDataError) {
  const KnowledgeBase kb(small_backbone());
  EXPECT_THROW(retrieve(kb, Vector::Zero(3)), DataError);
  EXPECT_THROW(retrieve_topk(kb, Vector::Zero(3), 1), DataError);
}

TEST(Retrieve, SingleEntryAlwaysWins) {
  KnowledgeBase kb(small_backbone());
  commit_zero(kb, single(1, Vector::Constant(3, 40.0), Matrix::Identity(3, 3)));
  const Retrieval r = retrieve(kb, Vector::Zero(3));
  EXPECT_EQ(r.entry, 0u);
  EXPECT_EQ(r.task, 1);
  EXPECT_EQ(r.component, 0);
}

TEST(Retrieve, PicksNearestSignature) {
  KnowledgeBase kb(small_backbone());
  const Vector x = Vector::LinSpaced(3, -0.5, 0.5);
  const Vector h = embed(x, kb.backbone());
  Vector off = Vector::Zero(3);
  off(0) = 2.0;
  commit_zero(kb, single(1, h + off, Matrix::Identity(3, 3)));
  commit_zero(kb, single(2, h, Matrix::Identity(3, 3)));
  const Retrieval r = retrieve(kb, x);
  EXPECT_EQ(r.task, 2);
  EXPECT_NEAR(r.score, 0.0, 1e-24);
}

TEST(Retrieve, TiesGoToEarliestEntry) {
  KnowledgeBase kb(small_backbone());
  const Vector x = Vector::Ones(3);
  const Vector h = embed(x, kb.backbone());
  commit_zero(kb, single(1, h, Matrix::Identity(3, 3)));
  commit_zero(kb, single(2, h, Matrix::Identity(3, 3)));
  EXPECT_EQ(retrieve(kb, x).task, 1);
}

TEST(Retrieve, LogLikRulePenalizesBroadComponents) {
  KnowledgeBase kb(small_backbone());
  const Vector x = Vector::Zero(3);
  const Vector h = embed(x, kb.backbone());
  Vector off = Vector::Zero(3);
  off(1) = 3.0;
  commit_zero(kb, single(1, h, 100.0 * Matrix::Identity(3, 3)));
  commit_zero(kb, single(2, h + off, Matrix::Identity(3, 3)));
  // Mahalanobis: 0 vs 9.  Adding log|Λ|: 3 ln 100 ≈ 13.8 vs 9.
  EXPECT_EQ(retrieve(kb, x, ScoreRule::mahalanobis).task, 1);
  EXPECT_EQ(retrieve(kb, x, ScoreRule::loglik).task, 2);
}

TEST(Retrieve, MatchesBruteForceOverRandomBases) {
  for (std::uint64_t seed = 10; seed < 30; ++seed) {
    const KnowledgeBase kb = random_kb(6, seed);
    Rng rng(seed + 100);
    for (int probe = 0; probe < 20; ++probe) {
      const Vector x = gaussian_vector(3, 1.0, rng);
      double best = std::numeric_limits<double>::infinity();
      int task = -1, comp = -1;
      for (std::size_t k = 0; k < kb.size(); ++k) {
        const Vector h = embed(x, kb.backbone(), &kb.overlay(k));
        const auto& cs = kb.entries()[k].multikey.components;
        for (std::size_t t = 0; t < cs.size(); ++t) {
          const Vector diff = h - cs[t].mean();
          const double s = diff.dot(cs[t].cov().inverse() * diff);
          if (s < best) {
            best = s;
            task = kb.entries()[k].task;
            comp = static_cast<int>(t);
          }
        }
      }
      const Retrieval r = retrieve(kb, x);
      EXPECT_EQ(r.task, task);
      EXPECT_EQ(r.component, comp);
      EXPECT_NEAR(r.score, best, 1e-8 * std::max(1.0, best));
    }
  }
}

TEST(RetrieveTopK, AggregationChangesTheWinner) {
  KnowledgeBase kb(small_backbone());
  const Vector x = Vector::Zero(3);
  const Vector h = embed(x, kb.backbone());
  MultiKeySignature two;
  two.task = 1;
  two.components.emplace_back(0.5, h, Matrix::Identity(3, 3));
  two.components.emplace_back(0.5, h, Matrix::Identity(3, 3));
  commit_zero(kb, two);
  Vector off = Vector::Zero(3);
  off(0) = 1.0;
  commit_zero(kb, single(2, h + off, Matrix::Identity(3, 3)));
  // K=1: log 0.5 versus −½.  K=2: log 1 versus −½.
  EXPECT_EQ(retrieve_topk(kb, x, 1), 2);
  EXPECT_EQ(retrieve_topk(kb, x, 2), 1);
  EXPECT_EQ(retrieve_topk(kb, x, 10), 1);
  EXPECT_THROW(retrieve_topk(kb, x, 0), ConfigError);
}

TEST(RetrieveTopK, EqualWeightsAndCovariancesAgreeWithMahalanobisAtK1) {
  KnowledgeBase kb(small_backbone());
  Rng rng(50);
  for (int t = 1; t <= 5; ++t) commit_zero(kb, single(t, gaussian_vector(3, 1.0, rng), 0.3 * Matrix::Identity(3, 3)));
  for (int probe = 0; probe < 100; ++probe) {
    const Vector x = gaussian_vector(3, 1.0, rng);
    EXPECT_EQ(retrieve_topk(kb, x, 1), retrieve(kb, x).task);
  }
}

TEST(KnowledgeBase, EarlierEntriesAreFrozenByLaterCommits) {
  KnowledgeBase kb = random_kb(1, 60);
  const KbEntry first = kb.entries()[0];
  const std::string bytes = to_json(kb)["entries"][0].dump();
  Rng rng(61);
  std::vector<Vector> probes;
  std::vector<double> scores;
  for (int i = 0; i < 50; ++i) {
    probes.push_back(gaussian_vector(3, 1.0, rng));
    scores.push_back(signature_score(embed_under(kb, 0, probes.back()), first.multikey.components[0]));
  }
  for (int t = 2; t <= 10; ++t) {
    const std::vector<LoraUnit> past = kb.units();
    kb.commit(single(t, gaussian_vector(3, 1.0, rng), Matrix::Identity(3, 3)),
              testing::random_unit(kb.backbone(), 1, t, rng), testing::random_transfer(past, rng));
  }
  EXPECT_EQ(kb.entries()[0], first);
  EXPECT_EQ(to_json(kb)["entries"][0].dump(), bytes);
  for (std::size_t i = 0; i < probes.size(); ++i)
    EXPECT_EQ(signature_score(embed_under(kb, 0, probes[i]), kb.entries()[0].multikey.components[0]), scores[i]);
}

TEST(ScoreRule, ParsesNames) {
  EXPECT_EQ(parse_score_rule("mahalanobis"), ScoreRule::mahalanobis);
  EXPECT_EQ(parse_score_rule("loglik"), ScoreRule::loglik);
  EXPECT_EQ(to_string(ScoreRule::loglik), "loglik");
  EXPECT_THROW(parse_score_rule("cosine"), ConfigError);
}

}  // namespace
}  // namespace proteus
