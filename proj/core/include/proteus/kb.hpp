// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "proteus/backbone.hpp"
#include "proteus/lda.hpp"
#include "proteus/lora_types.hpp"
#include "proteus/serialize.hpp"
#include "proteus/signature.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace proteus {

/// One committed task: its retrieval keys and the LoRA value they unlock.
/// `transfer` holds one block per entry committed before this one, so the
/// overlay is reconstructible from the knowledge base alone.
struct KbEntry {
  int task = 0;
  std::uint64_t ordinal = 0;
  MultiKeySignature multikey;
  LoraUnit value;
  TransferCoefficients transfer;

  bool operator==(const KbEntry&) const = default;
};

enum class ScoreRule { mahalanobis, loglik };

ScoreRule parse_score_rule(const std::string& name);
std::string to_string(ScoreRule rule);

/// Append-only store of (multi-key, value) pairs plus the streamed LDA
/// statistics. Entries never change once committed.
class KnowledgeBase {
 public:
  static constexpr int kFormatVersion = 1;

  explicit KnowledgeBase(BackboneWeights backbone);

  /// Appends an entry. Throws ConfigError on a duplicate task id and
  /// ShapeError when the value or transfer blocks do not fit the backbone.
  void commit(MultiKeySignature multikey, LoraUnit value, TransferCoefficients transfer);

  const BackboneWeights& backbone() const { return backbone_; }
  const std::vector<KbEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Dense overlay of entry `i`, composed at commit time.
  const LoraOverlay& overlay(std::size_t i) const { return overlays_.at(i); }
  /// Committed units in commit order (the frozen directions for the next task).
  std::vector<LoraUnit> units() const;
  /// Entry index for a task id, or -1.
  long find(int task) const;

  LdaStats& lda() { return lda_; }
  const LdaStats& lda() const { return lda_; }
  Json& meta() { return meta_; }
  const Json& meta() const { return meta_; }

  bool operator==(const KnowledgeBase& o) const {
    return backbone_ == o.backbone_ && entries_ == o.entries_ && lda_ == o.lda_ && meta_ == o.meta_;
  }

 private:
  BackboneWeights backbone_;
  std::vector<KbEntry> entries_;
  std::vector<LoraOverlay> overlays_;
  LdaStats lda_;
  Json meta_ = Json::object();
};

/// h_k(x): embedding of x under entry `i`'s overlay.
Vector embed_under(const KnowledgeBase& kb, std::size_t i, const Vector& x);

struct Retrieval {
  std::size_t entry = 0;
  int task = 0;
  int component = 0;
  double score = 0.0;
};

/// Global argmin over (entry, component) of the signature score of h_k(x).
/// `loglik` adds log|Λ| to the Mahalanobis term. Ties go to the lowest entry,
/// then the lowest component. Throws DataError on an empty knowledge base.
Retrieval retrieve(const KnowledgeBase& kb, const Vector& x, ScoreRule rule = ScoreRule::mahalanobis);

/// Task whose K largest weighted component likelihoods sum highest. K is
/// clamped to each task's component count. Throws ConfigError for K < 1.
int retrieve_topk(const KnowledgeBase& kb, const Vector& x, int k);

/// Versioned JSON document. Identical knowledge bases produce identical bytes.
std::string to_json_string(const KnowledgeBase& kb);
Json to_json(const KnowledgeBase& kb);

/// Validates version, shapes and SPD covariances (re-factored on load).
/// Throws VersionError, ValidationError, or DataError for malformed text.
KnowledgeBase kb_from_json_string(const std::string& text);
KnowledgeBase kb_from_json(const Json& doc);

void save(const KnowledgeBase& kb, const std::filesystem::path& path);
KnowledgeBase load(const std::filesystem::path& path);

Json backbone_to_json(const BackboneWeights& w);
BackboneWeights backbone_from_json(const Json& j);
Json lda_to_json(const LdaStats& s);
LdaStats lda_from_json(const Json& j, Eigen::Index d);

}  // namespace proteus
