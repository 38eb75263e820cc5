// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#include "proteus/pipeline.hpp"

#include "proteus/error.hpp"
#include "proteus/lda.hpp"
#include "proteus/random.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <ostream>
#include <set>

namespace proteus {

std::string to_string(RetrievalMode mode) {
  switch (mode) {
    case RetrievalMode::signature: return "signature";
    case RetrievalMode::oracle: return "oracle";
    case RetrievalMode::last_task: return "last-task";
    case RetrievalMode::none: return "none";
  }
  return "signature";
}

RetrievalMode parse_retrieval_mode(const std::string& name) {
  if (name == "signature") return RetrievalMode::signature;
  if (name == "oracle") return RetrievalMode::oracle;
  if (name == "last-task") return RetrievalMode::last_task;
  if (name == "none") return RetrievalMode::none;
  throw ConfigError("unknown retrieval mode '" + name + "' (expected signature, oracle, last-task or none)");
}

void RunConfig::validate() const {
  train.validate();
  if (hidden.empty()) throw ConfigError("backbone needs at least one hidden layer");
  for (int h : hidden)
    if (h < 1) throw ConfigError("hidden widths must be >= 1");
  if (!(backbone_scale > 0.0)) throw ConfigError("backbone scale must be > 0");
  if (signature.max_components < 1) throw ConfigError("signature max_components must be >= 1");
  if (signature.max_iterations < 1 || signature.restarts < 1)
    throw ConfigError("signature iterations and restarts must be >= 1");
  if (signature.ridge && !(*signature.ridge > 0.0)) throw ConfigError("signature ridge must be > 0");
  if (!(gamma > 0.0)) throw ConfigError("gamma must be > 0");
  if (top_k < 0) throw ConfigError("top_k must be >= 0");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (stream_spec) stream_spec->validate();
}

namespace {

void reject_unknown(const Json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; }))
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  try {
    reject_unknown(j, {"stream", "backbone", "train", "signature", "lda", "eval", "bounds", "seed", "threads"},
                   "config");
    if (j.contains("stream")) {
      const Json& s = j.at("stream");
      if (s.is_string())
        c.stream_path = s.get<std::string>();
      else
        c.stream_spec = stream_spec_from_json(s);
    }
    if (j.contains("backbone")) {
      const Json& b = j.at("backbone");
      reject_unknown(b, {"hidden", "scale"}, "backbone");
      read(b, "hidden", c.hidden);
      read(b, "scale", c.backbone_scale);
    }
    if (j.contains("train")) {
      const Json& t = j.at("train");
      reject_unknown(t,
                     {"lambda0", "lambda_decay", "alpha", "rank", "rank_decay", "epochs", "learning_rate",
                      "batch_size", "transfer_mode", "ortho"},
                     "train");
      read(t, "lambda0", c.train.lambda0);
      read(t, "lambda_decay", c.train.lambda_decay);
      read(t, "alpha", c.train.alpha);
      read(t, "rank", c.train.rank);
      read(t, "rank_decay", c.train.rank_decay);
      read(t, "epochs", c.train.epochs);
      read(t, "learning_rate", c.train.learning_rate);
      read(t, "batch_size", c.train.batch_size);
      read(t, "ortho", c.train.ortho);
      if (t.contains("transfer_mode")) c.train.transfer = parse_transfer_mode(t.at("transfer_mode").get<std::string>());
    }
    if (j.contains("signature")) {
      const Json& s = j.at("signature");
      reject_unknown(s, {"max_components", "ridge", "strategy", "score_rule", "max_iterations", "tolerance", "restarts"},
                     "signature");
      read(s, "max_components", c.signature.max_components);
      read(s, "max_iterations", c.signature.max_iterations);
      read(s, "tolerance", c.signature.tolerance);
      read(s, "restarts", c.signature.restarts);
      if (s.contains("ridge") && !s.at("ridge").is_null()) c.signature.ridge = s.at("ridge").get<double>();
      if (s.contains("strategy")) c.signature.strategy = parse_mixture_strategy(s.at("strategy").get<std::string>());
      if (s.contains("score_rule")) c.score_rule = parse_score_rule(s.at("score_rule").get<std::string>());
    }
    if (j.contains("lda")) {
      reject_unknown(j.at("lda"), {"gamma"}, "lda");
      read(j.at("lda"), "gamma", c.gamma);
    }
    if (j.contains("eval")) {
      const Json& e = j.at("eval");
      reject_unknown(e, {"retrieval", "top_k", "incremental"}, "eval");
      if (e.contains("retrieval")) c.retrieval = parse_retrieval_mode(e.at("retrieval").get<std::string>());
      read(e, "top_k", c.top_k);
      read(e, "incremental", c.incremental);
    }
    if (j.contains("bounds")) {
      reject_unknown(j.at("bounds"), {"epsilon"}, "bounds");
      read(j.at("bounds"), "epsilon", c.epsilon);
    }
    read(j, "seed", c.seed);
    read(j, "threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

Json to_json(const RunConfig& c) {
  Json j;
  if (c.stream_path) j["stream"] = *c.stream_path;
  if (c.stream_spec) j["stream"] = to_json(*c.stream_spec);
  j["backbone"] = {{"hidden", c.hidden}, {"scale", c.backbone_scale}};
  j["train"] = {{"lambda0", c.train.lambda0},
                {"lambda_decay", c.train.lambda_decay},
                {"alpha", c.train.alpha},
                {"rank", c.train.rank},
                {"rank_decay", c.train.rank_decay},
                {"epochs", c.train.epochs},
                {"learning_rate", c.train.learning_rate},
                {"batch_size", c.train.batch_size},
                {"transfer_mode", to_string(c.train.transfer)},
                {"ortho", c.train.ortho}};
  j["signature"] = {{"max_components", c.signature.max_components},
                    {"ridge", c.signature.ridge ? Json(*c.signature.ridge) : Json(nullptr)},
                    {"strategy", "em-bic"},
                    {"score_rule", to_string(c.score_rule)},
                    {"max_iterations", c.signature.max_iterations},
                    {"tolerance", c.signature.tolerance},
                    {"restarts", c.signature.restarts}};
  j["lda"] = {{"gamma", c.gamma}};
  j["eval"] = {{"retrieval", to_string(c.retrieval)}, {"top_k", c.top_k}, {"incremental", c.incremental}};
  j["bounds"] = {{"epsilon", c.epsilon}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

RunConfig reference_config() {
  RunConfig c;
  c.stream_spec = reference_spec();
  c.signature.max_components = 10;
  return c;
}

namespace {

int input_dim_of(const std::vector<TaskDataset>& stream) {
  for (const TaskDataset& t : stream) {
    if (!t.train.empty()) return static_cast<int>(t.train.front().x.size());
    if (!t.test.empty()) return static_cast<int>(t.test.front().x.size());
  }
  throw DataError("stream holds no samples");
}

void check_dims(const std::vector<TaskDataset>& stream, Eigen::Index q) {
  for (const TaskDataset& t : stream)
    for (const auto* split : {&t.train, &t.test})
      for (const LabeledSample& s : *split)
        if (s.x.size() != q)
          throw ShapeError("task " + std::to_string(t.task) + ": input dimension " + std::to_string(s.x.size()) +
                           " differs from " + std::to_string(q));
}

std::vector<Vector> embed_all(const std::vector<LabeledSample>& data, const BackboneWeights& w,
                              const LoraOverlay* overlay) {
  std::vector<Vector> out;
  out.reserve(data.size());
  for (const LabeledSample& s : data) out.push_back(embed(s.x, w, overlay));
  return out;
}

Json task_event(const TaskReport& r) {
  const TaskTrainLog& l = r.train;
  return {{"event", "task"},
          {"task", l.task},
          {"rank", l.rank},
          {"lambda", l.lambda},
          {"epoch_loss", l.epoch_loss},
          {"train_accuracy", l.train_accuracy},
          {"penalty", l.penalty},
          {"sparsity", l.sparsity},
          {"max_ortho_cosine", l.max_ortho_cosine},
          {"degenerate_layers", l.degenerate_layers},
          {"components", r.components},
          {"bic", r.bic}};
}

}  // namespace

TrainResult train_pipeline(const std::vector<TaskDataset>& stream, const RunConfig& cfg, std::ostream* events) {
  cfg.validate();
  if (stream.empty()) throw DataError("empty task stream");
  const int q = input_dim_of(stream);
  check_dims(stream, q);
  {
    std::set<int> ids;
    for (const TaskDataset& t : stream)
      if (!ids.insert(t.task).second) throw DataError("task " + std::to_string(t.task) + " appears twice");
  }

  std::vector<int> dims{q};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(q);
  BackboneWeights backbone = init_backbone(dims, derive_seed(cfg.seed, 1));
  for (DenseLayer& l : backbone.layers) l.weight *= cfg.backbone_scale;

  TrainResult result{KnowledgeBase(backbone), {}, std::nullopt};
  KnowledgeBase& kb = result.kb;
  const int m = static_cast<int>(stream.size());
  kb.lda().tasks = m;
  kb.lda().gamma = cfg.gamma;
  if (cfg.incremental) result.acc.emplace(m);

  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, 2);
  EvalOptions eval_opts{cfg.retrieval, cfg.score_rule, cfg.top_k, cfg.gamma};

  for (int k = 0; k < m; ++k) {
    const TaskDataset& task = stream[static_cast<std::size_t>(k)];
    const std::string where = "task " + std::to_string(task.task);
    try {
      if (task.train.size() < 2) throw InsufficientDataError("needs at least two training samples");
      const std::vector<LoraUnit> past = kb.units();
      TrainedAdapter adapter = train_task(task.train, past, backbone, tc, task.task);
      const LoraOverlay overlay = compose_update(past, adapter.transfer, adapter.unit);
      const std::vector<Vector> emb = embed_all(task.train, backbone, &overlay);

      MultiKeyOptions opts = cfg.signature;
      opts.seed = derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(k));
      MultiKeyFit fit = fit_multikey_detailed(emb, opts);
      fit.signature.task = task.task;

      TaskReport report;
      report.train = std::move(adapter.log);
      report.components = static_cast<int>(fit.signature.components.size());
      for (const MixtureCandidate& c : fit.candidates) report.bic.push_back(c.bic);

      kb.commit(std::move(fit.signature), std::move(adapter.unit), std::move(adapter.transfer));

      for (int label : task.labels()) register_class(kb.lda(), label);
      const long size = static_cast<long>(task.train.size());
      for (std::size_t i = 0; i < emb.size(); ++i) accumulate(kb.lda(), emb[i], task.train[i].label, size, m);

      if (result.acc) {
        const std::vector<TaskDataset> seen(stream.begin(), stream.begin() + k + 1);
        const EvalReport r = evaluate(kb, seen, eval_opts);
        for (int tau = 0; tau <= k; ++tau)
          result.acc->set(tau + 1, k + 1, r.task_accuracy[static_cast<std::size_t>(tau)]);
      }
      if (events) *events << task_event(report).dump() << '\n';
      result.tasks.push_back(std::move(report));
    } catch (const Error& e) {
      throw ContextError(where, e);
    }
  }
  Json config = to_json(cfg);
  config.erase("threads");
  kb.meta()["seed"] = cfg.seed;
  kb.meta()["config"] = std::move(config);
  if (result.acc) kb.meta()["incremental"] = result.acc->to_json();
  return result;
}

EvalReport evaluate(const KnowledgeBase& kb, const std::vector<TaskDataset>& stream, const EvalOptions& opts) {
  if (kb.empty()) throw DataError("knowledge base has no entries");
  if (opts.top_k < 0) throw ConfigError("top_k must be >= 0");
  const BackboneWeights& w = kb.backbone();
  check_dims(stream, w.input_dim());

  EvalReport rep;
  rep.retrieval = opts.retrieval;
  const LdaClassifier classifier(kb.lda(), opts.gamma);
  long correct = 0;
  long retrieved = 0;
  for (const TaskDataset& t : stream) {
    const long truth = kb.find(t.task);
    long hits = 0;
    std::vector<long> confusion(kb.size(), 0);
    for (const LabeledSample& s : t.test) {
      std::optional<std::size_t> entry;
      switch (opts.retrieval) {
        case RetrievalMode::signature:
          if (opts.top_k > 0) {
            const long found = kb.find(retrieve_topk(kb, s.x, opts.top_k));
            entry = static_cast<std::size_t>(found);
          } else {
            entry = retrieve(kb, s.x, opts.score_rule).entry;
          }
          break;
        case RetrievalMode::oracle:
          if (truth >= 0) entry = static_cast<std::size_t>(truth);
          break;
        case RetrievalMode::last_task:
          entry = kb.size() - 1;
          break;
        case RetrievalMode::none:
          break;
      }
      Vector h = entry ? embed_under(kb, *entry, s.x) : embed(s.x, w, nullptr);
      if (entry) ++confusion[*entry];
      if (entry && static_cast<long>(*entry) == truth) ++retrieved;
      if ((opts.retrieval != RetrievalMode::oracle || truth >= 0) && classifier.predict(h) == s.label) ++hits;
    }
    rep.samples += static_cast<long>(t.test.size());
    correct += hits;
    rep.tasks.push_back(t.task);
    rep.task_accuracy.push_back(t.test.empty() ? 0.0 : static_cast<double>(hits) / t.test.size());
    rep.task_confusion.push_back(std::move(confusion));
  }
  if (rep.samples == 0) throw DataError("test split is empty");
  rep.accuracy = static_cast<double>(correct) / rep.samples;
  if (kb.meta().contains("incremental")) rep.acc = AccMatrix::from_json(kb.meta().at("incremental"));
  if (opts.retrieval == RetrievalMode::signature) rep.retrieval_accuracy = static_cast<double>(retrieved) / rep.samples;
  return rep;
}

Json to_json(const EvalReport& r) {
  Json tasks = Json::array();
  for (std::size_t i = 0; i < r.tasks.size(); ++i)
    tasks.push_back({{"task", r.tasks[i]}, {"accuracy", r.task_accuracy[i]}, {"confusion", r.task_confusion[i]}});
  Json j = {{"retrieval", to_string(r.retrieval)}, {"samples", r.samples}, {"accuracy", r.accuracy}, {"tasks", tasks}};
  j["retrieval_accuracy"] = r.retrieval_accuracy ? Json(*r.retrieval_accuracy) : Json(nullptr);
  if (r.acc) {
    Json acc = {{"matrix", r.acc->to_json()}};
    const int m = r.acc->tasks();
    acc["average_accuracy"] = average_accuracy(*r.acc, m);
    if (m >= 2) acc["forgetting"] = forgetting(*r.acc, m);
    j["incremental"] = std::move(acc);
  }
  return j;
}

BoundReport bounds_report(const KnowledgeBase& kb, const std::vector<TaskDataset>& stream, double epsilon,
                          ScoreRule rule) {
  if (kb.size() < 2) throw DataError("bounds need at least two committed tasks");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
  const BackboneWeights& w = kb.backbone();
  check_dims(stream, w.input_dim());
  const int d = w.embedding_dim();
  const std::size_t n = kb.size();

  std::map<int, const TaskDataset*> by_task;
  for (const TaskDataset& t : stream) by_task[t.task] = &t;

  BoundReport report;
  report.epsilon = epsilon;
  for (std::size_t k = 0; k < n; ++k) {
    const KbEntry& entry = kb.entries()[k];
    const auto found = by_task.find(entry.task);
    if (found == by_task.end()) throw DataError("stream lacks committed task " + std::to_string(entry.task));
    const TaskDataset& data = *found->second;

    // Embeddings of this task's data under every committed overlay.
    std::vector<std::vector<Vector>> test_under(n), train_under(n);
    for (std::size_t i = 0; i < n; ++i) {
      test_under[i] = embed_all(data.test, w, &kb.overlay(i));
      train_under[i] = embed_all(data.train, w, &kb.overlay(i));
    }
    const std::vector<int> test_assign = assign_components(entry.multikey, test_under[k]);
    const std::vector<int> train_assign = assign_components(entry.multikey, train_under[k]);

    std::vector<GaussianComponent> false_components;
    long false_count = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (i != k)
        for (const GaussianComponent& c : kb.entries()[i].multikey.components) {
          false_components.push_back(c);
          ++false_count;
        }

    const auto& comps = entry.multikey.components;
    for (std::size_t t = 0; t < comps.size(); ++t) {
      std::vector<std::size_t> members;
      bool from_test = true;
      for (std::size_t s = 0; s < test_assign.size(); ++s)
        if (test_assign[s] == static_cast<int>(t)) members.push_back(s);
      if (members.size() < 2) {
        from_test = false;
        members.clear();
        for (std::size_t s = 0; s < train_assign.size(); ++s)
          if (train_assign[s] == static_cast<int>(t)) members.push_back(s);
      }
      if (members.size() < 2)
        throw InsufficientDataError("task " + std::to_string(entry.task) + " component " + std::to_string(t) +
                                    " has fewer than two samples");
      const auto& source = from_test ? data.test : data.train;
      const auto& under = from_test ? test_under : train_under;

      BoundRow row;
      row.task = entry.task;
      row.component = static_cast<int>(t);
      row.samples = static_cast<long>(members.size());
      row.candidates = false_count + 1;
      row.kappa = empirical_kappa(comps[t], false_components);
      row.delta = std::numeric_limits<double>::infinity();
      double sigma2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (i == k) continue;
        std::vector<Vector> cross;
        cross.reserve(members.size());
        for (std::size_t s : members) cross.push_back(under[i][s]);
        for (const GaussianComponent& c : kb.entries()[i].multikey.components) {
          row.delta = std::min(row.delta, empirical_separation(cross, c));
          sigma2 = std::max(sigma2, empirical_sigma2(cross, c));
        }
      }
      row.sigma2_floored = !(sigma2 > 0.0);
      row.sigma2 = std::max(sigma2, kSigma2Floor);

      long wrong = 0;
      for (std::size_t s : members) wrong += kb.entries()[retrieve(kb, source[s].x, rule).entry].task != entry.task;
      row.retrieval_error = static_cast<double>(wrong) / static_cast<double>(members.size());

      row.min_delta = min_delta(epsilon, d, row.kappa, row.sigma2, row.candidates);
      // The closed form only needs the false-component count (n − 1)τ.
      const BoundValue b =
          error_bound({d, row.delta, row.kappa, row.sigma2, 2, static_cast<int>(false_count)});
      row.bound = b.value;
      row.premise_violated = b.premise_violated;
      row.exceeds = row.delta > row.min_delta;
      report.rows.push_back(row);
    }
  }
  return report;
}

}  // namespace proteus
