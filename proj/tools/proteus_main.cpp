// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

// proteus: command-line driver for the continual fine-tuning pipeline.
//
//   proteus gen          write a synthetic task stream (JSON lines)
//   proteus train        run the stream, write the knowledge base and a log
//   proteus eval         classify the test split under a retrieval mode
//   proteus bounds       separation-versus-bound report for a trained run
//   proteus mc-validate  closed-form bound against simulation
//   proteus inspect-kb   summary of a knowledge-base file
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
// failure. PROTEUS_SEED overrides the configured seed; explicit flags win
// over both.

#include "proteus/error.hpp"
#include "proteus/kb.hpp"
#include "proteus/pipeline.hpp"
#include "proteus/taskgen.hpp"
#include "proteus/theory.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using proteus::Json;

namespace {

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("PROTEUS_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(raw, &used);
    if (used != std::string(raw).size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw proteus::ConfigError(std::string("PROTEUS_SEED is not an unsigned integer: ") + raw);
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw proteus::ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw proteus::ConfigError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw proteus::ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw proteus::DataError("write failed: " + path.string());
}

void emit(const std::string& out_path, const Json& doc) {
  if (out_path.empty())
    std::cout << doc.dump(2) << '\n';
  else
    write_text(out_path, doc.dump(2) + "\n");
}

std::vector<proteus::TaskDataset> load_stream(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw proteus::ConfigError("cannot open stream " + path.string());
  return proteus::read_stream(in);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string spec;
  std::string out;
  bool reference = false;
  bool force = false;
  std::optional<std::uint64_t> seed;
};

int run_gen(const GenArgs& a) {
  proteus::StreamSpec spec = proteus::reference_spec();
  if (!a.spec.empty() && a.reference) throw proteus::ConfigError("--spec and --reference are exclusive");
  if (!a.spec.empty()) spec = proteus::stream_spec_from_json(read_json(a.spec));
  if (const auto s = env_seed()) spec.seed = *s;
  if (a.seed) spec.seed = *a.seed;
  if (fs::exists(a.out) && !a.force)
    throw proteus::ConfigError(a.out + " exists; pass --force to overwrite");
  const auto stream = proteus::generate_stream(spec);
  std::ostringstream os;
  proteus::write_stream(os, stream);
  write_text(a.out, os.str());
  std::cerr << "wrote " << stream.size() << " tasks to " << a.out << " (checksum " << std::hex
            << proteus::stream_checksum(stream) << std::dec << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string stream;
  std::string config;
  std::string kb_out;
  std::string log;
  bool reference = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

proteus::RunConfig load_config(const std::string& path, bool reference) {
  if (reference && !path.empty()) throw proteus::ConfigError("--config and --reference are exclusive");
  proteus::RunConfig cfg = path.empty() ? proteus::reference_config() : proteus::run_config_from_json(read_json(path));
  if (const auto s = env_seed()) cfg.seed = *s;
  return cfg;
}

int run_train(const TrainArgs& a) {
  proteus::RunConfig cfg = load_config(a.config, a.reference);
  if (a.seed) cfg.seed = *a.seed;
  if (a.threads) cfg.threads = *a.threads;

  std::vector<proteus::TaskDataset> stream;
  if (!a.stream.empty())
    stream = load_stream(a.stream);
  else if (cfg.stream_path)
    stream = load_stream(*cfg.stream_path);
  else if (cfg.stream_spec)
    stream = proteus::generate_stream(*cfg.stream_spec);
  else
    throw proteus::ConfigError("no stream: pass --stream or set \"stream\" in the config");

  std::ofstream log_file;
  std::ostream* events = &std::cout;
  if (!a.log.empty()) {
    log_file.open(a.log, std::ios::binary | std::ios::trunc);
    if (!log_file) throw proteus::ConfigError("cannot write " + a.log);
    events = &log_file;
  }
  *events << Json{{"event", "config"}, {"config", proteus::to_json(cfg)}}.dump() << '\n';

  const auto t0 = std::chrono::steady_clock::now();
  const proteus::TrainResult result = proteus::train_pipeline(stream, cfg, events);
  const double elapsed = seconds_since(t0);

  Json summary = {{"event", "summary"}, {"tasks", result.kb.size()}, {"kb", a.kb_out}};
  if (result.acc) {
    summary["acc"] = result.acc->to_json();
    const int m = result.acc->tasks();
    summary["average_accuracy"] = proteus::average_accuracy(*result.acc, m);
    if (m >= 2) summary["forgetting"] = proteus::forgetting(*result.acc, m);
  }
  *events << summary.dump() << '\n';
  proteus::save(result.kb, a.kb_out);

  std::cerr << "trained " << result.kb.size() << " tasks in " << elapsed << " s\n";
  for (const proteus::TaskReport& t : result.tasks)
    std::cerr << "  task " << t.train.task << ": loss " << t.train.epoch_loss.back() << ", train acc "
              << t.train.train_accuracy << ", components " << t.components << ", sparsity " << t.train.sparsity
              << (t.train.degenerate_layers.empty() ? "" : ", rank-exhausted layers present") << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string kb;
  std::string stream;
  std::string config;
  std::string out;
  std::optional<std::string> retrieval;
  std::optional<std::string> score_rule;
  std::optional<int> top_k;
  std::optional<double> gamma;
};

int run_eval(const EvalArgs& a) {
  proteus::EvalOptions opts;
  if (!a.config.empty()) {
    const proteus::RunConfig cfg = proteus::run_config_from_json(read_json(a.config));
    opts = {cfg.retrieval, cfg.score_rule, cfg.top_k, cfg.gamma};
  }
  if (a.retrieval) opts.retrieval = proteus::parse_retrieval_mode(*a.retrieval);
  if (a.score_rule) opts.score_rule = proteus::parse_score_rule(*a.score_rule);
  if (a.top_k) opts.top_k = *a.top_k;
  if (a.gamma) opts.gamma = *a.gamma;

  const proteus::KnowledgeBase kb = proteus::load(a.kb);
  const auto stream = load_stream(a.stream);
  const auto t0 = std::chrono::steady_clock::now();
  const proteus::EvalReport rep = proteus::evaluate(kb, stream, opts);
  const double elapsed = seconds_since(t0);
  emit(a.out, proteus::to_json(rep));
  std::cerr << "accuracy " << rep.accuracy;
  if (rep.retrieval_accuracy) std::cerr << ", retrieval accuracy " << *rep.retrieval_accuracy;
  std::cerr << " over " << rep.samples << " samples in " << elapsed << " s\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct BoundsArgs {
  std::string kb;
  std::string stream;
  std::string out;
  std::string csv;
  double epsilon = 0.05;
  std::string score_rule = "mahalanobis";
};

int run_bounds(const BoundsArgs& a) {
  const proteus::KnowledgeBase kb = proteus::load(a.kb);
  const auto stream = load_stream(a.stream);
  const proteus::BoundReport rep =
      proteus::bounds_report(kb, stream, a.epsilon, proteus::parse_score_rule(a.score_rule));
  emit(a.out, proteus::to_json(rep));
  if (!a.csv.empty()) write_text(a.csv, proteus::to_csv(rep));
  long exceeding = 0;
  for (const proteus::BoundRow& r : rep.rows) exceeding += r.exceeds;
  std::cerr << exceeding << " of " << rep.rows.size() << " components exceed the minimum separation\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct McArgs {
  std::vector<int> d{16};
  std::vector<double> delta{4.0};
  std::vector<int> tasks{5};
  std::vector<int> components{2};
  long samples = 100000;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out;
  std::string csv;
};

int run_mc(const McArgs& a) {
  std::uint64_t seed = 0;
  if (const auto s = env_seed()) seed = *s;
  if (a.seed) seed = *a.seed;
  std::vector<proteus::McReport> reports;
  for (int d : a.d)
    for (double delta : a.delta)
      for (int n : a.tasks)
        for (int tau : a.components) {
          proteus::McConfig c{d, delta, n, tau, a.samples, seed, a.threads};
          reports.push_back(proteus::mc_validate(c));
        }
  Json rows = Json::array();
  bool all_within = true;
  for (const proteus::McReport& r : reports) {
    rows.push_back(proteus::to_json(r));
    all_within = all_within && r.within_bound;
  }
  emit(a.out, Json{{"all_within_bound", all_within}, {"runs", rows}});
  if (!a.csv.empty()) write_text(a.csv, proteus::mc_csv(reports));
  std::cerr << reports.size() << " configurations, " << (all_within ? "all" : "not all")
            << " within bound + 3 SE\n";
  return 0;
}

// ---------------------------------------------------------------------------

int run_inspect(const std::string& path) {
  const proteus::KnowledgeBase kb = proteus::load(path);
  Json entries = Json::array();
  for (const proteus::KbEntry& e : kb.entries()) {
    Json ranks = Json::array();
    for (const proteus::LowRankFactors& f : e.value.layers) ranks.push_back(f.rank());
    Json weights = Json::array();
    for (const proteus::GaussianComponent& c : e.multikey.components) weights.push_back(c.weight());
    entries.push_back({{"task", e.task},
                       {"ordinal", e.ordinal},
                       {"components", e.multikey.components.size()},
                       {"weights", weights},
                       {"ranks", ranks},
                       {"past_units", e.transfer.num_past()}});
  }
  std::cout << Json{{"version", proteus::KnowledgeBase::kFormatVersion},
                    {"dims", kb.backbone().dims},
                    {"entries", entries},
                    {"classes", kb.lda().class_sums.size()},
                    {"meta", kb.meta()}}
                   .dump(2)
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual fine-tuning with parameter-free task retrieval"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "write a synthetic task stream as JSON lines");
  gen_cmd->add_option("--spec", gen.spec, "stream spec JSON")->check(CLI::ExistingFile);
  gen_cmd->add_flag("--reference", gen.reference, "use the reference stream spec (default)");
  gen_cmd->add_option("--out,-o", gen.out, "output stream file")->required();
  gen_cmd->add_flag("--force", gen.force, "overwrite an existing file");
  gen_cmd->add_option("--seed", gen.seed, "override the spec seed");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train adapters, fit signatures, write the knowledge base");
  train_cmd->add_option("--stream", train.stream, "stream file")->check(CLI::ExistingFile);
  train_cmd->add_option("--config", train.config, "run config JSON")->check(CLI::ExistingFile);
  train_cmd->add_flag("--reference", train.reference, "use the shipped reference config (default)");
  train_cmd->add_option("--kb-out", train.kb_out, "knowledge-base output file")->required();
  train_cmd->add_option("--log", train.log, "JSON-lines training log (default: stdout)");
  train_cmd->add_option("--seed", train.seed, "override the config seed");
  train_cmd->add_option("--threads", train.threads, "worker cap")->check(CLI::PositiveNumber);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "classify the test split of a stream");
  eval_cmd->add_option("--kb", ev.kb, "knowledge-base file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--stream", ev.stream, "stream file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--config", ev.config, "run config JSON")->check(CLI::ExistingFile);
  eval_cmd->add_option("--retrieval", ev.retrieval, "signature | oracle | last-task | none");
  eval_cmd->add_option("--score-rule", ev.score_rule, "mahalanobis | loglik");
  eval_cmd->add_option("--top-k", ev.top_k, "Top-K aggregation (0 = nearest component)");
  eval_cmd->add_option("--gamma", ev.gamma, "classifier ridge");
  eval_cmd->add_option("--out,-o", ev.out, "report file (default: stdout)");

  BoundsArgs bounds;
  auto* bounds_cmd = app.add_subcommand("bounds", "empirical separation against the minimum for a target error");
  bounds_cmd->add_option("--kb", bounds.kb, "knowledge-base file")->required()->check(CLI::ExistingFile);
  bounds_cmd->add_option("--stream", bounds.stream, "stream file")->required()->check(CLI::ExistingFile);
  bounds_cmd->add_option("--epsilon", bounds.epsilon, "target retrieval error")->capture_default_str();
  bounds_cmd->add_option("--score-rule", bounds.score_rule, "mahalanobis | loglik")->capture_default_str();
  bounds_cmd->add_option("--out,-o", bounds.out, "JSON report (default: stdout)");
  bounds_cmd->add_option("--csv", bounds.csv, "CSV report, one row per component");

  McArgs mc;
  auto* mc_cmd = app.add_subcommand("mc-validate", "simulate retrieval in the assumption-exact world");
  mc_cmd->add_option("--d", mc.d, "embedding dimensions")->capture_default_str();
  mc_cmd->add_option("--delta", mc.delta, "separation factors")->capture_default_str();
  mc_cmd->add_option("--tasks", mc.tasks, "task counts n")->capture_default_str();
  mc_cmd->add_option("--components", mc.components, "components per task")->capture_default_str();
  mc_cmd->add_option("--samples", mc.samples, "samples per configuration")->capture_default_str();
  mc_cmd->add_option("--seed", mc.seed, "base seed");
  mc_cmd->add_option("--threads", mc.threads, "worker cap")->capture_default_str()->check(CLI::PositiveNumber);
  mc_cmd->add_option("--out,-o", mc.out, "JSON report (default: stdout)");
  mc_cmd->add_option("--csv", mc.csv, "CSV report");

  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect-kb", "summarize a knowledge-base file");
  inspect_cmd->add_option("kb", inspect_path, "knowledge-base file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*train_cmd) return run_train(train);
    if (*eval_cmd) return run_eval(ev);
    if (*bounds_cmd) return run_bounds(bounds);
    if (*mc_cmd) return run_mc(mc);
    if (*inspect_cmd) return run_inspect(inspect_path);
  } catch (const proteus::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
