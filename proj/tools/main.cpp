// Copyright 2026 The MuCS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// mucs: prioritize likely-mispredicted LLM test inputs and smooth
// prediction confidence via prompt mutation.
//
// Subcommands: predict, mutate, rank, evaluate, compare, cache-stats.
// Every run writes a manifest (resolved config + seed + tool version)
// beside its outputs. Exit codes: 0 success, 1 usage/config error,
// 2 partial data failure, 3 transport exhaustion.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mucs/errors.hpp"
#include "mucs/harness.hpp"
#include "mucs/metrics.hpp"
#include "mucs/rng.hpp"
#include "mucs/version.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitPartial = 2;
constexpr int kExitTransport = 3;

struct CommonOpts {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> budgets_csv;
  std::optional<std::string> methods_csv;
  bool mucs = false;
  std::optional<std::string> offline_predictions;
  std::optional<std::string> stub;
  std::vector<std::string> sets;  // generic key.path=value overrides
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_config = true) {
  auto* config = cmd->add_option("--config", opts.config_path, "JSON config file");
  if (needs_config) config->required();
  cmd->add_option("--out", opts.out_dir, "output directory (default: current)");
  cmd->add_option("--seed", opts.seed, "override config seed");
  cmd->add_option("--budgets", opts.budgets_csv, "comma-separated budget fractions");
  cmd->add_option("--methods", opts.methods_csv, "comma-separated detection methods");
  cmd->add_flag("--mucs", opts.mucs, "enable mutation-based confidence smoothing");
  cmd->add_option("--offline-predictions", opts.offline_predictions,
                  "predictions file instead of model access");
  cmd->add_option("--stub", opts.stub, "table-driven stub transport file");
  cmd->add_option("--set", opts.sets, "override a config field by dotted path (key=value)");
}

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  for (char c : csv) {
    if (c == ',') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else {
      item += c;
    }
  }
  if (!item.empty()) out.push_back(item);
  return out;
}

void set_by_dotted_path(json& root, const std::string& path, json value) {
  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw mucs::ConfigError("bad override path '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

json load_resolved_config(const CommonOpts& opts) {
  json cfg;
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) throw mucs::ConfigError("cannot open config '" + opts.config_path + "'");
    try {
      in >> cfg;
    } catch (const json::exception& e) {
      throw mucs::ConfigError("config '" + opts.config_path + "': " + e.what());
    }
  } else {
    cfg = json::object();
  }

  if (opts.seed.has_value()) set_by_dotted_path(cfg, "seed", *opts.seed);
  if (opts.budgets_csv.has_value()) {
    json budgets = json::array();
    for (const std::string& b : split_csv(*opts.budgets_csv)) budgets.push_back(std::stod(b));
    set_by_dotted_path(cfg, "budgets", std::move(budgets));
  }
  if (opts.methods_csv.has_value()) {
    json methods = json::array();
    for (const std::string& m : split_csv(*opts.methods_csv)) methods.push_back(m);
    set_by_dotted_path(cfg, "methods", std::move(methods));
  }
  if (opts.mucs) set_by_dotted_path(cfg, "mucs.enabled", true);
  if (opts.offline_predictions.has_value())
    set_by_dotted_path(cfg, "offline_predictions", *opts.offline_predictions);
  if (opts.stub.has_value()) set_by_dotted_path(cfg, "stub", *opts.stub);
  for (const std::string& kv : opts.sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw mucs::ConfigError("--set expects key.path=value, got '" + kv + "'");
    const std::string value = kv.substr(eq + 1);
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::exception&) {
      parsed = value;  // plain string
    }
    set_by_dotted_path(cfg, kv.substr(0, eq), std::move(parsed));
  }
  return cfg;
}

struct Manifest {
  Manifest(std::string subcommand_, json resolved_config_, std::vector<std::string> outputs_)
      : subcommand(std::move(subcommand_)),
        resolved_config(std::move(resolved_config_)),
        outputs(std::move(outputs_)) {}

  std::string subcommand;
  json resolved_config;
  std::vector<std::string> outputs;
  json failures = json::array();
  std::optional<mucs::gateway::CacheStats> gateway_stats;
};

void write_manifest(const fs::path& out_dir, const Manifest& m) {
  json j{{"tool", "mucs"},
         {"version", mucs::kVersion},
         {"subcommand", m.subcommand},
         {"seed", m.resolved_config.value("seed", std::uint64_t{0})},
         {"config", m.resolved_config},
         {"outputs", m.outputs},
         {"failures", m.failures}};
  if (m.gateway_stats.has_value())
    j["gateway"] = json{{"entries", m.gateway_stats->entries},
                        {"hits", m.gateway_stats->hits},
                        {"misses", m.gateway_stats->misses},
                        {"estimated_cost", m.gateway_stats->estimated_cost}};
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw mucs::DataError("cannot write manifest to '" + out_dir.string() + "'");
  out << j.dump(2) << '\n';
}

fs::path prepare_out_dir(const CommonOpts& opts) {
  const fs::path dir(opts.out_dir);
  fs::create_directories(dir);
  return dir;
}

json chain_to_json(const std::vector<mucs::mutation::ChainLink>& chain) {
  json out = json::array();
  for (const mucs::mutation::ChainLink& link : chain)
    out.push_back(json{{"op", mucs::mutation::op_name(link.op)}, {"applied", link.applied}});
  return out;
}

int cmd_predict(const CommonOpts& opts) {
  const json resolved = load_resolved_config(opts);
  const mucs::harness::ExperimentConfig cfg = mucs::harness::config_from_json(resolved);
  const std::unique_ptr<mucs::gateway::Gateway> gw = mucs::harness::build_gateway(cfg);
  if (gw == nullptr)
    throw mucs::ConfigError("predict needs an endpoint or stub transport");

  const std::vector<mucs::TestItem> items =
      mucs::harness::load_dataset(cfg.dataset_path, cfg.task.kind, cfg.task.class_names);
  mucs::mutation::SynonymLexicon lexicon;
  if (cfg.lexicon_path.has_value())
    lexicon = mucs::mutation::SynonymLexicon::load(*cfg.lexicon_path);

  const fs::path out_dir = prepare_out_dir(opts);
  const fs::path predictions_path = out_dir / "predictions.jsonl";
  std::ofstream out(predictions_path);
  if (!out) throw mucs::DataError("cannot write '" + predictions_path.string() + "'");

  Manifest manifest{"predict", resolved, {"predictions.jsonl"}};
  for (const mucs::TestItem& item : items) {
    json line{{"id", item.id}};
    try {
      line["probs"] = gw->predict(cfg.task, item).probs();
    } catch (const mucs::PredictFailed& e) {
      manifest.failures.push_back(json{{"id", item.id}, {"reason", e.what()}});
      continue;
    }
    if (cfg.mucs.has_value()) {
      const mucs::mutation::SmoothResult smoothed = mucs::mutation::mucs_smooth(
          item, *cfg.mucs, lexicon,
          [&](const std::string& prompt) { return gw->predict(cfg.task, prompt); });
      json mutants = json::array();
      for (const mucs::ProbVector& v : smoothed.mutants.mutant_probs)
        mutants.push_back(v.probs());
      line["mutant_probs"] = std::move(mutants);
      if (smoothed.smoothing_failed())
        manifest.failures.push_back(
            json{{"id", item.id},
                 {"reason", "smoothing fallback: " + std::to_string(smoothed.failed_queries) +
                                " mutant queries failed"}});
    }
    out << line.dump() << '\n';
  }
  manifest.gateway_stats = gw->cache_stats();
  write_manifest(out_dir, manifest);
  return manifest.failures.empty() ? kExitOk : kExitPartial;
}

int cmd_mutate(const CommonOpts& opts) {
  const json resolved = load_resolved_config(opts);
  const mucs::harness::ExperimentConfig cfg = mucs::harness::config_from_json(resolved);
  const std::vector<mucs::TestItem> items =
      mucs::harness::load_dataset(cfg.dataset_path, cfg.task.kind, cfg.task.class_names);
  mucs::mutation::SynonymLexicon lexicon;
  if (cfg.lexicon_path.has_value())
    lexicon = mucs::mutation::SynonymLexicon::load(*cfg.lexicon_path);
  mucs::mutation::MucsConfig mucs_cfg;
  mucs_cfg.seed = cfg.seed;
  if (cfg.mucs.has_value()) {
    mucs_cfg = *cfg.mucs;
  } else if (resolved.contains("mucs")) {
    // "enabled" only gates smoothing during evaluate; an explicit mutate
    // run still honors the configured mutation parameters.
    json forced = resolved;
    forced["mucs"]["enabled"] = true;
    mucs_cfg = *mucs::harness::config_from_json(forced).mucs;
  }

  std::vector<mucs::mutation::MutationOp> pool = mucs_cfg.op_pool;
  if (pool.empty())
    for (mucs::mutation::OpKind k : mucs::mutation::default_op_pool(cfg.task.kind))
      pool.push_back(mucs::mutation::MutationOp{k});

  const fs::path out_dir = prepare_out_dir(opts);
  const fs::path audit_path = out_dir / "mutants.jsonl";
  std::ofstream out(audit_path);
  if (!out) throw mucs::DataError("cannot write '" + audit_path.string() + "'");

  for (const mucs::TestItem& item : items) {
    mucs::Rng rng(mucs::mix_seed(mucs_cfg.seed, item.id));
    for (int i = 0; i < mucs_cfg.n_mutants; ++i) {
      const mucs::mutation::MutantResult mutant = mucs::mutation::make_mutant(
          item.prompt, item.kind, mucs_cfg.K, pool, lexicon, rng);
      out << json{{"item_id", item.id},
                  {"mutant_index", i},
                  {"op_chain", chain_to_json(mutant.chain)},
                  {"mutant_prompt", mutant.text}}
                 .dump()
          << '\n';
    }
  }
  write_manifest(out_dir, Manifest{"mutate", resolved, {"mutants.jsonl"}});
  return kExitOk;
}

int cmd_rank(const CommonOpts& opts) {
  const json resolved = load_resolved_config(opts);
  const mucs::harness::ExperimentConfig cfg = mucs::harness::config_from_json(resolved);
  const std::unique_ptr<mucs::gateway::Gateway> gw = mucs::harness::build_gateway(cfg);
  const mucs::harness::GatherResult gathered = mucs::harness::gather(cfg, gw.get());

  const std::span<const mucs::PredictionRecord> rank_records =
      cfg.mucs.has_value() ? std::span<const mucs::PredictionRecord>(gathered.smoothed)
                           : std::span<const mucs::PredictionRecord>(gathered.original);

  const fs::path out_dir = prepare_out_dir(opts);
  const fs::path rankings_path = out_dir / "rankings.jsonl";
  std::ofstream out(rankings_path);
  if (!out) throw mucs::DataError("cannot write '" + rankings_path.string() + "'");

  Manifest manifest{"rank", resolved, {"rankings.jsonl"}};
  for (mucs::detectors::Method method : cfg.methods) {
    mucs::detectors::DetectorConfig dcfg;
    dcfg.method = method;
    dcfg.seed = mucs::mix_seed(cfg.seed, mucs::detectors::method_name(method));
    dcfg.nns_k = cfg.detector.nns_k;
    dcfg.testrank_k = cfg.detector.testrank_k;
    dcfg.testrank_epochs = cfg.detector.testrank_epochs;
    dcfg.testrank_learning_rate = cfg.detector.testrank_learning_rate;

    mucs::detectors::DetectorInputs inputs;
    inputs.records = rank_records;
    inputs.embeddings = gathered.embeddings.empty() ? nullptr : &gathered.embeddings;
    inputs.train_records = gathered.train_records;
    inputs.mutant_sets = gathered.mutant_sets.empty() ? nullptr : &gathered.mutant_sets;
    try {
      const mucs::Ranking r = mucs::detectors::run_detector(dcfg, inputs);
      out << json{{"method", r.method},
                  {"display",
                   mucs::detectors::method_display_name(method, cfg.mucs.has_value())},
                  {"orientation", mucs::orientation_name(r.orientation)},
                  {"tie_break", r.tie_break},
                  {"ids", r.ids},
                  {"scores", r.scores}}
                 .dump()
          << '\n';
    } catch (const mucs::Error& e) {
      manifest.failures.push_back(
          json{{"method", mucs::detectors::method_name(method)}, {"reason", e.what()}});
    }
  }
  if (gw != nullptr) manifest.gateway_stats = gw->cache_stats();
  write_manifest(out_dir, manifest);
  return kExitOk;
}

int cmd_evaluate(const CommonOpts& opts) {
  const json resolved = load_resolved_config(opts);
  const mucs::harness::ExperimentConfig cfg = mucs::harness::config_from_json(resolved);
  const mucs::harness::EvalReport report = mucs::harness::run_experiment(cfg);

  const fs::path out_dir = prepare_out_dir(opts);
  mucs::harness::save_report(report, out_dir / "report.json");
  {
    std::ofstream out(out_dir / "trc.csv");
    out << mucs::harness::trc_table_csv(report);
  }
  {
    std::ofstream out(out_dir / "calibration.csv");
    out << mucs::harness::calibration_csv(report);
  }
  Manifest manifest{"evaluate", resolved, {"report.json", "trc.csv", "calibration.csv"}};
  for (const std::string& id : report.smoothing_fallback_ids)
    manifest.failures.push_back(json{{"id", id}, {"reason", "smoothing fallback"}});
  write_manifest(out_dir, manifest);
  return kExitOk;
}

int cmd_compare(const CommonOpts& opts, const std::string& baseline_path,
                const std::string& treated_path) {
  const mucs::harness::EvalReport baseline = mucs::harness::load_report(baseline_path);
  const mucs::harness::EvalReport treated = mucs::harness::load_report(treated_path);
  const mucs::harness::ImprovementTable table =
      mucs::harness::compare_reports(baseline, treated);

  const fs::path out_dir = prepare_out_dir(opts);
  {
    std::ofstream out(out_dir / "improvement.json");
    out << mucs::harness::improvement_to_json(table).dump(2) << '\n';
  }
  {
    std::ofstream out(out_dir / "improvement.csv");
    out << mucs::harness::improvement_csv(table);
  }
  json resolved{{"baseline", baseline_path}, {"treated", treated_path}};
  write_manifest(out_dir,
                 Manifest{"compare", resolved, {"improvement.json", "improvement.csv"}});
  return kExitOk;
}

int cmd_cache_stats(const CommonOpts& opts) {
  const json resolved = load_resolved_config(opts);
  std::size_t entries = 0;
  std::int64_t in_tokens = 0, out_tokens = 0;
  if (resolved.contains("cache")) {
    const mucs::gateway::ResponseCache cache{
        fs::path(resolved.at("cache").get<std::string>())};
    entries = cache.size();
    std::tie(in_tokens, out_tokens) = cache.stored_token_totals();
  }
  // Hits, misses, and cost are process-lifetime counters; a fresh process
  // reports zeros. Stored token totals describe the cache file itself.
  std::cout << json{{"entries", entries},
                    {"hits", 0},
                    {"misses", 0},
                    {"estimated_cost", 0.0},
                    {"stored_input_tokens", in_tokens},
                    {"stored_output_tokens", out_tokens}}
                   .dump(2)
            << std::endl;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fault prioritization and mutation-based confidence smoothing for LLM "
               "classification tasks"};
  app.set_version_flag("--version", mucs::kVersion);
  app.require_subcommand(1);

  CommonOpts predict_opts, mutate_opts, rank_opts, evaluate_opts, compare_opts, stats_opts;
  std::string baseline_path, treated_path;

  add_common(app.add_subcommand("predict", "query the model over a dataset"), predict_opts);
  add_common(app.add_subcommand("mutate", "write a mutant audit log"), mutate_opts);
  add_common(app.add_subcommand("rank", "emit detector rankings"), rank_opts);
  add_common(app.add_subcommand("evaluate", "run detectors at budgets and report TRC"),
             evaluate_opts);
  CLI::App* compare = app.add_subcommand("compare", "relative improvement between reports");
  compare->add_option("baseline", baseline_path, "baseline report.json")->required();
  compare->add_option("treated", treated_path, "treated report.json")->required();
  add_common(compare, compare_opts, /*needs_config=*/false);
  add_common(app.add_subcommand("cache-stats", "print response-cache statistics"), stats_opts);

  try {
    app.parse(argc, argv);
    if (app.got_subcommand("predict")) return cmd_predict(predict_opts);
    if (app.got_subcommand("mutate")) return cmd_mutate(mutate_opts);
    if (app.got_subcommand("rank")) return cmd_rank(rank_opts);
    if (app.got_subcommand("evaluate")) return cmd_evaluate(evaluate_opts);
    if (app.got_subcommand("compare"))
      return cmd_compare(compare_opts, baseline_path, treated_path);
    if (app.got_subcommand("cache-stats")) return cmd_cache_stats(stats_opts);
    return kExitConfig;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const mucs::TransportError& e) {
    std::cerr << "transport error: " << e.what() << '\n';
    return kExitTransport;
  } catch (const mucs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const mucs::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
