// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "proteus/kb.hpp"
#include "proteus/lora.hpp"
#include "proteus/metrics.hpp"
#include "proteus/signature.hpp"
#include "proteus/taskgen.hpp"
#include "proteus/theory.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace proteus {

/// Which adapter classifies a test input.
///   signature  nearest multi-key signature (the parameter-free retriever)
///   oracle     the true task's adapter
///   last_task  the most recently committed adapter
///   none       the bare backbone
enum class RetrievalMode { signature, oracle, last_task, none };

std::string to_string(RetrievalMode mode);
RetrievalMode parse_retrieval_mode(const std::string& name);

struct RunConfig {
  std::optional<std::string> stream_path;
  std::optional<StreamSpec> stream_spec;
  std::vector<int> hidden = {64};
  double backbone_scale = 1.0;  // multiplies the 1/√fan-in init
  TrainConfig train;
  MultiKeyOptions signature;
  ScoreRule score_rule = ScoreRule::mahalanobis;
  double gamma = 1e-2;
  int top_k = 0;  // 0 uses plain argmin retrieval
  RetrievalMode retrieval = RetrievalMode::signature;
  bool incremental = false;  // fill the accuracy matrix while training
  double epsilon = 0.05;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

/// Unknown keys and out-of-range values throw ConfigError.
RunConfig run_config_from_json(const Json& j);
Json to_json(const RunConfig& cfg);

/// The shipped configuration used by the acceptance runs.
RunConfig reference_config();

struct TaskReport {
  TaskTrainLog train;
  int components = 0;
  std::vector<double> bic;  // per candidate component count
};

struct TrainResult {
  KnowledgeBase kb;
  std::vector<TaskReport> tasks;
  std::optional<AccMatrix> acc;
};

/// Runs the stream in order: train the task's adapter, embed its training
/// data under the composed overlay, fit the multi-key signature, commit, and
/// stream the classifier statistics. When `events` is non-null one JSON line
/// per task is written to it. Errors carry the failing task in their message.
TrainResult train_pipeline(const std::vector<TaskDataset>& stream, const RunConfig& cfg,
                           std::ostream* events = nullptr);

struct EvalOptions {
  RetrievalMode retrieval = RetrievalMode::signature;
  ScoreRule score_rule = ScoreRule::mahalanobis;
  int top_k = 0;
  double gamma = 1e-2;
};

struct EvalReport {
  RetrievalMode retrieval = RetrievalMode::signature;
  long samples = 0;
  double accuracy = 0.0;
  std::optional<double> retrieval_accuracy;  // signature mode only
  std::vector<int> tasks;                    // task ids in stream order
  std::vector<double> task_accuracy;
  std::vector<std::vector<long>> task_confusion;  // [true task][chosen entry]
  std::optional<AccMatrix> acc;
};

/// Classifies every test sample of `stream`. Tasks absent from the knowledge
/// base count as errors. Throws ShapeError on a dimension mismatch and
/// DataError on an empty test split.
EvalReport evaluate(const KnowledgeBase& kb, const std::vector<TaskDataset>& stream, const EvalOptions& opts);

Json to_json(const EvalReport& r);

/// One row per committed component. Samples of each task's test split are
/// hard-assigned to its components under its own overlay; δ is the minimum
/// and σ² the maximum over every false component of the other tasks.
/// Throws DataError when the knowledge base has fewer than two entries.
BoundReport bounds_report(const KnowledgeBase& kb, const std::vector<TaskDataset>& stream, double epsilon,
                          ScoreRule rule = ScoreRule::mahalanobis);

}  // namespace proteus
