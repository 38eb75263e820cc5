// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "proteus/sample.hpp"
#include "proteus/serialize.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace proteus {

enum class Gap { mild, abrupt, varying };

std::string to_string(Gap gap);
Gap parse_gap(const std::string& name);

/// Synthetic class-incremental stream. Each task owns `classes_per_task`
/// fresh labels; each class is a union of `clusters_per_class` Gaussian
/// clusters. Task centers sit on an integer lattice scaled by the gap spread,
/// class and cluster centers on finer lattices around them.
struct StreamSpec {
  int tasks = 10;
  int classes_per_task = 4;
  int clusters_per_class = 2;
  int input_dim = 16;
  Gap gap = Gap::abrupt;
  double task_spread = 0.0;     // 0 selects the gap default
  double class_spread = 1.0;
  double cluster_spread = 0.4;
  double jitter = 0.05;         // relative lattice jitter
  double sigma = 0.6;
  int train_per_class = 200;
  int test_per_class = 100;
  std::uint64_t seed = 42;

  /// Throws ConfigError for counts below 1, σ <= 0, or zero samples.
  void validate() const;
  /// Task spread after resolving the gap default.
  double resolved_task_spread() const;
};

Json to_json(const StreamSpec& s);
/// Missing keys keep their defaults. Throws ConfigError on bad values.
StreamSpec stream_spec_from_json(const Json& j);

struct TaskDataset {
  int task = 0;
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;
  std::vector<int> train_cluster;  // ground truth, empty when read from disk
  std::vector<int> test_cluster;

  /// Sorted distinct labels of the training split.
  std::vector<int> labels() const;
};

/// Deterministic per seed. Under Gap::varying every task after the first
/// reuses half of its predecessor's class geometries under new labels.
std::vector<TaskDataset> generate_stream(const StreamSpec& spec);

/// The fixed acceptance fixture: 10 tasks, 4 classes of 2 clusters, q = 16,
/// abrupt gap, 200 train and 100 test samples per class, seed 42.
StreamSpec reference_spec();
std::vector<TaskDataset> reference_stream();

/// JSON lines, one record per sample: {"task", "split", "label", "x"}.
void write_stream(std::ostream& os, const std::vector<TaskDataset>& tasks);
/// Tasks are returned in order of first appearance. Throws DataError on
/// malformed records and ShapeError on inconsistent dimensions.
std::vector<TaskDataset> read_stream(std::istream& is);

/// FNV-1a over the serialized stream.
std::uint64_t stream_checksum(const std::vector<TaskDataset>& tasks);

}  // namespace proteus
