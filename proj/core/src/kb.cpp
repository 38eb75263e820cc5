// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#include "proteus/kb.hpp"

#include "proteus/error.hpp"
#include "proteus/lora.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace proteus {

ScoreRule parse_score_rule(const std::string& name) {
  if (name == "mahalanobis") return ScoreRule::mahalanobis;
  if (name == "loglik") return ScoreRule::loglik;
  throw ConfigError("unknown score rule '" + name + "' (expected mahalanobis|loglik)");
}

std::string to_string(ScoreRule rule) { return rule == ScoreRule::loglik ? "loglik" : "mahalanobis"; }

KnowledgeBase::KnowledgeBase(BackboneWeights backbone)
    : backbone_(std::move(backbone)), lda_(backbone_.embedding_dim()) {
  meta_["d"] = backbone_.embedding_dim();
}

void KnowledgeBase::commit(MultiKeySignature multikey, LoraUnit value, TransferCoefficients transfer) {
  if (find(value.task) >= 0) throw ConfigError("commit: task " + std::to_string(value.task) + " already committed");
  if (multikey.components.empty()) throw ShapeError("commit: signature has no components");
  for (const GaussianComponent& c : multikey.components)
    if (c.dim() != backbone_.embedding_dim()) throw ShapeError("commit: signature dimension mismatch");
  if (value.layers.size() != backbone_.num_layers()) throw ShapeError("commit: value layer count mismatch");
  if (entries_.empty() && transfer.layers.empty()) transfer.layers.assign(backbone_.num_layers(), {});
  for (const auto& blocks : transfer.layers)
    if (blocks.size() != entries_.size())
      throw ShapeError("commit: transfer must hold one block per committed entry");

  const std::vector<LoraUnit> past = units();
  LoraOverlay overlay = compose_update(past, transfer, value);
  check_overlay(backbone_, overlay);

  multikey.task = value.task;
  KbEntry e;
  e.task = value.task;
  e.ordinal = entries_.size();
  e.multikey = std::move(multikey);
  e.value = std::move(value);
  e.transfer = std::move(transfer);
  entries_.push_back(std::move(e));
  overlays_.push_back(std::move(overlay));
}

std::vector<LoraUnit> KnowledgeBase::units() const {
  std::vector<LoraUnit> out;
  out.reserve(entries_.size());
  for (const KbEntry& e : entries_) out.push_back(e.value);
  return out;
}

long KnowledgeBase::find(int task) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].task == task) return static_cast<long>(i);
  return -1;
}

Vector embed_under(const KnowledgeBase& kb, std::size_t i, const Vector& x) {
  return embed(x, kb.backbone(), &kb.overlay(i));
}

Retrieval retrieve(const KnowledgeBase& kb, const Vector& x, ScoreRule rule) {
  if (kb.empty()) throw DataError("retrieve: knowledge base is empty");
  Retrieval best;
  best.score = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t k = 0; k < kb.size(); ++k) {
    const Vector h = embed_under(kb, k, x);
    const auto& comps = kb.entries()[k].multikey.components;
    for (std::size_t t = 0; t < comps.size(); ++t) {
      double s = signature_score(h, comps[t]);
      if (rule == ScoreRule::loglik) s += log_volume(comps[t]);
      if (!found || s < best.score) {
        found = true;
        best = {k, kb.entries()[k].task, static_cast<int>(t), s};
      }
    }
  }
  return best;
}

int retrieve_topk(const KnowledgeBase& kb, const Vector& x, int k) {
  if (k < 1) throw ConfigError("retrieve_topk: K must be >= 1");
  if (kb.empty()) throw DataError("retrieve: knowledge base is empty");
  int best_task = kb.entries().front().task;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < kb.size(); ++e) {
    const Vector h = embed_under(kb, e, x);
    std::vector<double> logs;
    for (const GaussianComponent& c : kb.entries()[e].multikey.components)
      logs.push_back(std::log(c.weight()) + gaussian_log_density(h, c));
    std::sort(logs.begin(), logs.end(), std::greater<>());
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), logs.size());
    const double top = logs.front();
    double acc = 0.0;
    for (std::size_t i = 0; i < take; ++i) acc += std::exp(logs[i] - top);
    const double aggregate = top + std::log(acc);
    if (aggregate > best || e == 0) {
      best = aggregate;
      best_task = kb.entries()[e].task;
    }
  }
  return best_task;
}

// ---------------------------------------------------------------------------
// Persistence

Json backbone_to_json(const BackboneWeights& w) {
  Json layers = Json::array();
  for (const DenseLayer& l : w.layers) layers.push_back({{"W", matrix_to_json(l.weight)}, {"b", vector_to_json(l.bias)}});
  return {{"dims", w.dims}, {"layers", std::move(layers)}};
}

BackboneWeights backbone_from_json(const Json& j) {
  BackboneWeights w;
  const Json& dims = require(j, "dims", "backbone");
  if (!dims.is_array() || dims.size() < 2) throw ValidationError("backbone: dims must list at least two sizes");
  for (const Json& d : dims) {
    if (!d.is_number_integer() || d.get<int>() < 1) throw ValidationError("backbone: dims must be positive integers");
    w.dims.push_back(d.get<int>());
  }
  const Json& layers = require(j, "layers", "backbone");
  if (!layers.is_array() || layers.size() + 1 != w.dims.size())
    throw ValidationError("backbone: layer count does not match dims");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string what = "backbone layer " + std::to_string(l);
    DenseLayer layer;
    layer.weight = matrix_from_json(require(layers[l], "W", what), w.dims[l + 1], w.dims[l], what + " W");
    layer.bias = vector_from_json(require(layers[l], "b", what), w.dims[l + 1], what + " b");
    w.layers.push_back(std::move(layer));
  }
  return w;
}

Json lda_to_json(const LdaStats& s) {
  Json classes = Json::array();
  for (const auto& [c, e] : s.class_sums)
    classes.push_back({{"class", c}, {"e", vector_to_json(e)}, {"count", s.class_counts.at(c)}});
  return {{"G", matrix_to_json(s.gram)}, {"e_by_class", std::move(classes)}, {"gamma", s.gamma}, {"tasks", s.tasks}};
}

LdaStats lda_from_json(const Json& j, Eigen::Index d) {
  LdaStats s(d);
  s.gram = matrix_from_json(require(j, "G", "lda"), d, d, "lda G");
  if (asymmetry(s.gram) > 1e-9 * std::max(1.0, s.gram.cwiseAbs().maxCoeff()))
    throw ValidationError("lda: G is not symmetric");
  const Json& gamma = require(j, "gamma", "lda");
  if (!gamma.is_number() || !(gamma.get<double>() > 0.0)) throw ValidationError("lda: gamma must be positive");
  s.gamma = gamma.get<double>();
  const Json& tasks = require(j, "tasks", "lda");
  if (!tasks.is_number_integer()) throw ValidationError("lda: tasks must be an integer");
  s.tasks = tasks.get<int>();
  for (const Json& c : require(j, "e_by_class", "lda")) {
    const Json& id = require(c, "class", "lda class");
    const Json& count = require(c, "count", "lda class");
    if (!id.is_number_integer() || !count.is_number_integer()) throw ValidationError("lda: class ids and counts must be integers");
    s.class_sums[id.get<int>()] = vector_from_json(require(c, "e", "lda class"), d, "lda e");
    s.class_counts[id.get<int>()] = count.get<long>();
  }
  return s;
}

namespace {

Json signature_to_json(const MultiKeySignature& sig) {
  Json comps = Json::array();
  for (const GaussianComponent& c : sig.components)
    comps.push_back({{"weight", c.weight()}, {"mean", vector_to_json(c.mean())}, {"cov", matrix_to_json(c.cov())}});
  return {{"components", std::move(comps)}};
}

MultiKeySignature signature_from_json(const Json& j, int task, Eigen::Index d) {
  MultiKeySignature sig;
  sig.task = task;
  const std::string what = "task " + std::to_string(task) + " signature";
  const Json& comps = require(j, "components", what);
  if (!comps.is_array() || comps.empty()) throw ValidationError(what + ": no components");
  double total = 0.0;
  for (const Json& c : comps) {
    const Json& wj = require(c, "weight", what);
    if (!wj.is_number() || !(wj.get<double>() > 0.0) || wj.get<double>() > 1.0)
      throw ValidationError(what + ": component weight outside (0, 1]");
    Vector mean = vector_from_json(require(c, "mean", what), d, what + " mean");
    Matrix cov = matrix_from_json(require(c, "cov", what), d, d, what + " cov");
    if (asymmetry(cov) > 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff()))
      throw ValidationError(what + ": covariance is not symmetric");
    if (!is_spd(cov)) throw ValidationError(what + ": covariance is not SPD");
    total += wj.get<double>();
    sig.components.emplace_back(wj.get<double>(), std::move(mean), std::move(cov));
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError(what + ": component weights do not sum to 1");
  return sig;
}

Json value_to_json(const LoraUnit& unit, const TransferCoefficients& s) {
  Json layers = Json::array();
  for (std::size_t l = 0; l < unit.layers.size(); ++l) {
    Json blocks = Json::array();
    if (l < s.layers.size())
      for (const Vector& b : s.layers[l]) blocks.push_back(vector_to_json(b));
    layers.push_back({{"B", matrix_to_json(unit.layers[l].b)},
                      {"A", matrix_to_json(unit.layers[l].a)},
                      {"S_diag_blocks", std::move(blocks)}});
  }
  return {{"layers", std::move(layers)}};
}

}  // namespace

Json to_json(const KnowledgeBase& kb) {
  Json entries = Json::array();
  for (const KbEntry& e : kb.entries())
    entries.push_back({{"task", e.task},
                       {"ordinal", e.ordinal},
                       {"multikey", signature_to_json(e.multikey)},
                       {"value", value_to_json(e.value, e.transfer)}});
  const Json& meta = kb.meta();
  return {{"version", KnowledgeBase::kFormatVersion},
          {"backbone", backbone_to_json(kb.backbone())},
          {"entries", std::move(entries)},
          {"lda", lda_to_json(kb.lda())},
          {"meta", meta}};
}

std::string to_json_string(const KnowledgeBase& kb) { return to_json(kb).dump() + "\n"; }

KnowledgeBase kb_from_json(const Json& doc) {
  if (!doc.is_object()) throw ValidationError("knowledge base: top level must be an object");
  if (!doc.contains("version")) throw VersionError("knowledge base: missing version field");
  const Json& version = doc.at("version");
  if (!version.is_number_integer() || version.get<long>() != KnowledgeBase::kFormatVersion)
    throw VersionError("knowledge base: unsupported version " + version.dump() + " (this build reads version " +
                       std::to_string(KnowledgeBase::kFormatVersion) + ")");

  KnowledgeBase kb(backbone_from_json(require(doc, "backbone", "knowledge base")));
  const BackboneWeights& bb = kb.backbone();
  const Eigen::Index d = bb.embedding_dim();

  const Json& entries = require(doc, "entries", "knowledge base");
  if (!entries.is_array()) throw ValidationError("knowledge base: entries must be a list");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Json& ej = entries[i];
    const Json& tj = require(ej, "task", "entry");
    if (!tj.is_number_integer()) throw ValidationError("entry: task must be an integer");
    const int task = tj.get<int>();
    const std::string what = "task " + std::to_string(task);
    MultiKeySignature sig = signature_from_json(require(ej, "multikey", what), task, d);

    const Json& layers = require(require(ej, "value", what), "layers", what + " value");
    if (!layers.is_array() || layers.size() != bb.num_layers())
      throw ValidationError(what + ": value layer count does not match backbone");
    LoraUnit unit;
    unit.task = task;
    TransferCoefficients s;
    s.layers.resize(bb.num_layers());
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const Matrix& w = bb.layers[l].weight;
      LowRankFactors f;
      f.b = matrix_from_json(require(layers[l], "B", what), w.rows(), -1, what + " B");
      f.a = matrix_from_json(require(layers[l], "A", what), w.cols(), f.b.cols(), what + " A");
      const Json& blocks = require(layers[l], "S_diag_blocks", what);
      if (!blocks.is_array() || blocks.size() != i)
        throw ValidationError(what + ": expected one transfer block per earlier entry");
      for (std::size_t tau = 0; tau < blocks.size(); ++tau) {
        const Eigen::Index r = kb.entries()[tau].value.layers[l].rank();
        s.layers[l].push_back(vector_from_json(blocks[tau], r, what + " S block"));
      }
      unit.layers.push_back(std::move(f));
    }
    try {
      kb.commit(std::move(sig), std::move(unit), std::move(s));
    } catch (const ConfigError& e) {
      throw ValidationError(e.what());
    }
  }
  kb.lda() = lda_from_json(require(doc, "lda", "knowledge base"), d);
  if (doc.contains("meta")) {
    kb.meta() = doc.at("meta");
    if (kb.meta().contains("d") && kb.meta()["d"] != d) throw ValidationError("meta: d does not match backbone");
  }
  return kb;
}

KnowledgeBase kb_from_json_string(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw DataError(std::string("knowledge base: malformed JSON: ") + e.what());
  }
  return kb_from_json(doc);
}

void save(const KnowledgeBase& kb, const std::filesystem::path& path) {
  const std::string text = to_json_string(kb);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

KnowledgeBase load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return kb_from_json_string(ss.str());
}

}  // namespace proteus
