// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#include "proteus/error.hpp"
#include "proteus/taskgen.hpp"

#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>

namespace proteus {
namespace {

StreamSpec small_spec() {
  StreamSpec s;
  s.tasks = 3;
  s.classes_per_task = 3;
  s.input_dim = 5;
  s.train_per_class = 20;
  s.test_per_class = 10;
  s.seed = 7;
  return s;
}

Vector mean_of(const std::vector<LabeledSample>& xs) {
  Vector m = Vector::Zero(xs.front().x.size());
  for (const LabeledSample& s : xs) m += s.x;
  return m / static_cast<double>(xs.size());
}

double mean_task_distance(const std::vector<TaskDataset>& stream) {
  std::vector<Vector> centers;
  for (const TaskDataset& t : stream) centers.push_back(mean_of(t.train));
  double sum = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < centers.size(); ++i)
    for (std::size_t j = i + 1; j < centers.size(); ++j, ++pairs) sum += (centers[i] - centers[j]).norm();
  return sum / pairs;
}

TEST(GenerateStream, SingleTaskLabels) {
  StreamSpec s = small_spec();
  s.tasks = 1;
  const auto stream = generate_stream(s);
  ASSERT_EQ(stream.size(), 1u);
  EXPECT_EQ(stream[0].labels(), (std::vector<int>{0, 1, 2}));
}

TEST(GenerateStream, DeterministicPerSeed) {
  const auto a = generate_stream(small_spec());
  const auto b = generate_stream(small_spec());
  EXPECT_EQ(stream_checksum(a), stream_checksum(b));
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t i = 0; i < a[t].train.size(); ++i) EXPECT_EQ(a[t].train[i].x, b[t].train[i].x);
  StreamSpec other = small_spec();
  other.seed = 8;
  EXPECT_NE(stream_checksum(generate_stream(other)), stream_checksum(a));
}

TEST(GenerateStream, AbruptGapSpreadsTasksFurther) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    StreamSpec s = small_spec();
    s.tasks = 6;
    s.seed = seed;
    s.gap = Gap::mild;
    const double mild = mean_task_distance(generate_stream(s));
    s.gap = Gap::abrupt;
    const double abrupt = mean_task_distance(generate_stream(s));
    EXPECT_GT(abrupt, mild);
  }
}

TEST(GenerateStream, SplitsAreDisjointAndLabelsUnique) {
  for (Gap gap : {Gap::mild, Gap::abrupt, Gap::varying}) {
    StreamSpec s = small_spec();
    s.gap = gap;
    std::set<int> seen;
    for (const TaskDataset& t : generate_stream(s)) {
      for (int label : t.labels()) EXPECT_TRUE(seen.insert(label).second) << "label " << label << " reused";
      std::set<std::vector<double>> train;
      for (const LabeledSample& x : t.train) train.insert(std::vector<double>(x.x.data(), x.x.data() + x.x.size()));
      for (const LabeledSample& x : t.test)
        EXPECT_FALSE(train.count(std::vector<double>(x.x.data(), x.x.data() + x.x.size())));
    }
  }
}

TEST(GenerateStream, VaryingGapSharesHalfTheClusterGeometry) {
  StreamSpec s = small_spec();
  s.classes_per_task = 4;
  s.gap = Gap::varying;
  s.train_per_class = 400;
  const auto stream = generate_stream(s);
  int shared = 0;
  for (std::size_t k = 1; k < stream.size(); ++k) {
    std::map<int, std::vector<LabeledSample>> prev, cur;
    for (const LabeledSample& x : stream[k - 1].train) prev[x.label].push_back(x);
    for (const LabeledSample& x : stream[k].train) cur[x.label].push_back(x);
    for (const auto& [lc, xc] : cur)
      for (const auto& [lp, xp] : prev)
        if ((mean_of(xc) - mean_of(xp)).norm() < 0.2) ++shared;
  }
  EXPECT_EQ(shared, 2 * static_cast<int>(stream.size() - 1));
}

TEST(GenerateStream, RejectsInfeasibleSpecs) {
  StreamSpec s = small_spec();
  s.train_per_class = 0;
  EXPECT_THROW(generate_stream(s), ConfigError);
  s = small_spec();
  s.sigma = 0.0;
  EXPECT_THROW(generate_stream(s), ConfigError);
  EXPECT_THROW(parse_gap("sudden"), ConfigError);
}

TEST(ReferenceStream, Shape) {
  const auto stream = reference_stream();
  ASSERT_EQ(stream.size(), 10u);
  std::set<int> labels;
  for (const TaskDataset& t : stream) {
    EXPECT_EQ(t.train.size(), 800u);
    EXPECT_EQ(t.test.size(), 400u);
    EXPECT_EQ(t.train.front().x.size(), 16);
    for (int l : t.labels()) labels.insert(l);
  }
  EXPECT_EQ(labels.size(), 40u);
  EXPECT_EQ(*labels.begin(), 0);
  EXPECT_EQ(*labels.rbegin(), 39);
  EXPECT_EQ(stream_checksum(stream), stream_checksum(reference_stream()));
}

TEST(ReferenceStream, NearestClassCenterSolvesEachTask) {
  for (const TaskDataset& t : reference_stream()) {
    std::map<int, std::vector<LabeledSample>> by_label;
    for (const LabeledSample& x : t.train) by_label[x.label].push_back(x);
    std::map<int, Vector> centers;
    for (const auto& [l, xs] : by_label) centers[l] = mean_of(xs);
    int correct = 0;
    for (const LabeledSample& x : t.test) {
      int best = -1;
      double dist = 0.0;
      for (const auto& [l, c] : centers) {
        const double d = (x.x - c).squaredNorm();
        if (best < 0 || d < dist) best = l, dist = d;
      }
      correct += best == x.label;
    }
    EXPECT_GE(static_cast<double>(correct) / static_cast<double>(t.test.size()), 0.99) << "task " << t.task;
  }
}

TEST(StreamFile, RoundTripPreservesSamples) {
  const auto stream = generate_stream(small_spec());
  std::stringstream buf;
  write_stream(buf, stream);
  const auto back = read_stream(buf);
  ASSERT_EQ(back.size(), stream.size());
  EXPECT_EQ(stream_checksum(back), stream_checksum(stream));
  for (std::size_t t = 0; t < stream.size(); ++t) {
    EXPECT_EQ(back[t].task, stream[t].task);
    ASSERT_EQ(back[t].test.size(), stream[t].test.size());
    for (std::size_t i = 0; i < stream[t].test.size(); ++i) {
      EXPECT_EQ(back[t].test[i].x, stream[t].test[i].x);
      EXPECT_EQ(back[t].test[i].label, stream[t].test[i].label);
    }
  }
}

TEST(StreamFile, MalformedLinesAreDataErrors) {
  std::stringstream bad("{\"task\": 1, \"split\": \"train\", \"label\": 0}\n");
  EXPECT_THROW(read_stream(bad), DataError);
  std::stringstream junk("not json\n");
  EXPECT_THROW(read_stream(junk), DataError);
}

TEST(StreamSpecJson, RoundTripAndDefaults) {
  StreamSpec s = small_spec();
  s.gap = Gap::varying;
  const StreamSpec back = stream_spec_from_json(to_json(s));
  EXPECT_EQ(to_json(back), to_json(s));
  const StreamSpec defaults = stream_spec_from_json(Json::object());
  EXPECT_EQ(to_json(defaults), to_json(reference_spec()));
  EXPECT_THROW(stream_spec_from_json(Json::parse("{\"tasks\": \"ten\"}")), ConfigError);
  EXPECT_THROW(stream_spec_from_json(Json::parse("[1]")), ConfigError);
}

}  // namespace
}  // namespace proteus
