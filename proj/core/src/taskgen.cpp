// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#include "proteus/taskgen.hpp"

#include "proteus/error.hpp"
#include "proteus/random.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace proteus {

std::string to_string(Gap gap) {
  switch (gap) {
    case Gap::mild: return "mild";
    case Gap::abrupt: return "abrupt";
    case Gap::varying: return "varying";
  }
  return "abrupt";
}

Gap parse_gap(const std::string& name) {
  if (name == "mild") return Gap::mild;
  if (name == "abrupt") return Gap::abrupt;
  if (name == "varying") return Gap::varying;
  throw ConfigError("unknown gap '" + name + "' (expected mild, abrupt or varying)");
}

void StreamSpec::validate() const {
  if (tasks < 1 || classes_per_task < 1 || clusters_per_class < 1 || input_dim < 1)
    throw ConfigError("stream spec: counts must be >= 1");
  if (train_per_class < 1 || test_per_class < 1) throw ConfigError("stream spec: zero samples requested");
  if (!(sigma > 0.0)) throw ConfigError("stream spec: sigma must be > 0");
  if (task_spread < 0.0 || class_spread < 0.0 || cluster_spread < 0.0 || jitter < 0.0)
    throw ConfigError("stream spec: spreads must be >= 0");
}

double StreamSpec::resolved_task_spread() const {
  if (task_spread > 0.0) return task_spread;
  switch (gap) {
    case Gap::mild: return 1.5;
    case Gap::abrupt: return 4.0;
    case Gap::varying: return 2.5;
  }
  return 4.0;
}

Json to_json(const StreamSpec& s) {
  return {{"tasks", s.tasks},
          {"classes_per_task", s.classes_per_task},
          {"clusters_per_class", s.clusters_per_class},
          {"input_dim", s.input_dim},
          {"gap", to_string(s.gap)},
          {"task_spread", s.task_spread},
          {"class_spread", s.class_spread},
          {"cluster_spread", s.cluster_spread},
          {"jitter", s.jitter},
          {"sigma", s.sigma},
          {"train_per_class", s.train_per_class},
          {"test_per_class", s.test_per_class},
          {"seed", s.seed}};
}

StreamSpec stream_spec_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("stream spec must be a JSON object");
  StreamSpec s;
  try {
    s.tasks = j.value("tasks", s.tasks);
    s.classes_per_task = j.value("classes_per_task", s.classes_per_task);
    s.clusters_per_class = j.value("clusters_per_class", s.clusters_per_class);
    s.input_dim = j.value("input_dim", s.input_dim);
    s.gap = parse_gap(j.value("gap", to_string(s.gap)));
    s.task_spread = j.value("task_spread", s.task_spread);
    s.class_spread = j.value("class_spread", s.class_spread);
    s.cluster_spread = j.value("cluster_spread", s.cluster_spread);
    s.jitter = j.value("jitter", s.jitter);
    s.sigma = j.value("sigma", s.sigma);
    s.train_per_class = j.value("train_per_class", s.train_per_class);
    s.test_per_class = j.value("test_per_class", s.test_per_class);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("stream spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::vector<int> TaskDataset::labels() const {
  std::set<int> seen;
  for (const LabeledSample& s : train) seen.insert(s.label);
  return {seen.begin(), seen.end()};
}

namespace {

// Distinct nonzero points of {-1, 0, 1}^q (falling back to {-2..2} once the
// small lattice is crowded), scaled and jittered.
std::vector<Vector> lattice_points(int count, int dim, double scale, double jitter, Rng& rng) {
  std::set<std::vector<int>> used;
  std::vector<Vector> out;
  std::uniform_int_distribution<int> small(-1, 1);
  std::uniform_int_distribution<int> wide(-2, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  int attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    const bool crowded = ++attempts > 64 * count;
    std::vector<int> p(static_cast<std::size_t>(dim));
    for (int& v : p) v = crowded ? wide(rng) : small(rng);
    if (std::all_of(p.begin(), p.end(), [](int v) { return v == 0; })) continue;
    if (!used.insert(p).second) continue;
    Vector x(dim);
    for (int i = 0; i < dim; ++i) x(i) = scale * (p[static_cast<std::size_t>(i)] + jitter * normal(rng));
    out.push_back(std::move(x));
  }
  return out;
}

// centers[task][class][cluster]
using Geometry = std::vector<std::vector<std::vector<Vector>>>;

Geometry place_centers(const StreamSpec& spec) {
  Rng rng(derive_seed(spec.seed, 0));
  const std::vector<Vector> task_centers =
      lattice_points(spec.tasks, spec.input_dim, spec.resolved_task_spread(), spec.jitter, rng);
  Geometry g(static_cast<std::size_t>(spec.tasks));
  for (int k = 0; k < spec.tasks; ++k) {
    const std::vector<Vector> classes =
        lattice_points(spec.classes_per_task, spec.input_dim, spec.class_spread, spec.jitter, rng);
    auto& task = g[static_cast<std::size_t>(k)];
    for (int c = 0; c < spec.classes_per_task; ++c) {
      std::vector<Vector> clusters;
      for (int j = 0; j < spec.clusters_per_class; ++j) {
        Vector u = gaussian_vector(spec.input_dim, 1.0, rng);
        const double n = u.norm();
        if (n > 0.0) u /= n;
        Vector center = task_centers[static_cast<std::size_t>(k)] + classes[static_cast<std::size_t>(c)];
        if (spec.clusters_per_class > 1) center += spec.cluster_spread * u;
        clusters.push_back(std::move(center));
      }
      task.push_back(std::move(clusters));
    }
  }
  if (spec.gap == Gap::varying) {
    const int reused = spec.classes_per_task / 2;
    for (int k = 1; k < spec.tasks; ++k)
      for (int c = 0; c < reused; ++c)
        g[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)] =
            g[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(spec.classes_per_task - 1 - c)];
  }
  return g;
}

void sample_split(const std::vector<std::vector<Vector>>& classes, int first_label, int per_class, double sigma,
                  int clusters_per_class, Rng& rng, std::vector<LabeledSample>& out, std::vector<int>& cluster) {
  for (std::size_t c = 0; c < classes.size(); ++c)
    for (int i = 0; i < per_class; ++i) {
      const int j = i % clusters_per_class;
      const Vector& center = classes[c][static_cast<std::size_t>(j)];
      out.push_back({center + gaussian_vector(center.size(), sigma, rng), first_label + static_cast<int>(c)});
      cluster.push_back(static_cast<int>(c) * clusters_per_class + j);
    }
}

}  // namespace

std::vector<TaskDataset> generate_stream(const StreamSpec& spec) {
  spec.validate();
  const Geometry g = place_centers(spec);
  std::vector<TaskDataset> out(static_cast<std::size_t>(spec.tasks));
  for (int k = 0; k < spec.tasks; ++k) {
    TaskDataset& t = out[static_cast<std::size_t>(k)];
    t.task = k;
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(k) + 1));
    const int first = k * spec.classes_per_task;
    const auto& classes = g[static_cast<std::size_t>(k)];
    sample_split(classes, first, spec.train_per_class, spec.sigma, spec.clusters_per_class, rng, t.train,
                 t.train_cluster);
    sample_split(classes, first, spec.test_per_class, spec.sigma, spec.clusters_per_class, rng, t.test,
                 t.test_cluster);
  }
  return out;
}

StreamSpec reference_spec() { return StreamSpec{}; }

std::vector<TaskDataset> reference_stream() { return generate_stream(reference_spec()); }

void write_stream(std::ostream& os, const std::vector<TaskDataset>& tasks) {
  for (const TaskDataset& t : tasks) {
    for (const auto& [split, samples] : {std::pair{"train", &t.train}, std::pair{"test", &t.test}})
      for (const LabeledSample& s : *samples) {
        Json rec = {{"task", t.task}, {"split", split}, {"label", s.label}, {"x", vector_to_json(s.x)}};
        os << rec.dump() << '\n';
      }
  }
}

std::vector<TaskDataset> read_stream(std::istream& is) {
  std::vector<TaskDataset> tasks;
  std::map<int, std::size_t> index;
  std::string line;
  long lineno = 0;
  Eigen::Index dim = -1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = "stream line " + std::to_string(lineno);
    Json rec;
    try {
      rec = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!rec.is_object()) throw DataError(where + ": record is not an object");
    const Json& task = require(rec, "task", where);
    const Json& split = require(rec, "split", where);
    const Json& label = require(rec, "label", where);
    if (!task.is_number_integer() || !label.is_number_integer() || !split.is_string())
      throw DataError(where + ": bad field types");
    Vector x = vector_from_json(require(rec, "x", where), dim, where);
    if (dim < 0) dim = x.size();
    if (x.size() == 0) throw ShapeError(where + ": empty input");
    const int id = task.get<int>();
    auto it = index.find(id);
    if (it == index.end()) {
      it = index.emplace(id, tasks.size()).first;
      tasks.push_back({});
      tasks.back().task = id;
    }
    TaskDataset& t = tasks[it->second];
    const std::string s = split.get<std::string>();
    if (s == "train")
      t.train.push_back({std::move(x), label.get<int>()});
    else if (s == "test")
      t.test.push_back({std::move(x), label.get<int>()});
    else
      throw DataError(where + ": split must be train or test");
  }
  return tasks;
}

std::uint64_t stream_checksum(const std::vector<TaskDataset>& tasks) {
  std::ostringstream os;
  write_stream(os, tasks);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace proteus
