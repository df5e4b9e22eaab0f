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

#include "mucs/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "mucs/errors.hpp"
#include "mucs/metrics.hpp"
#include "mucs/rng.hpp"

namespace mucs::harness {

using nlohmann::json;

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

json parse_jsonl_line(const std::string& line, const std::filesystem::path& path,
                      std::size_t line_no) {
  try {
    json j = json::parse(line);
    if (!j.is_object())
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": not a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw DataError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
  }
}

// Applies fn to each non-empty line; throws "empty <what>" when none.
template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, const char* what, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + std::string(what) + " file '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  std::size_t seen = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++seen;
    fn(parse_jsonl_line(line, path, line_no), line_no);
  }
  if (seen == 0) throw DataError("empty " + std::string(what));
}

int resolve_label(const json& label, std::span<const std::string> class_names,
                  const std::filesystem::path& path, std::size_t line_no) {
  if (label.is_number_integer()) {
    const int v = label.get<int>();
    if (v < 0 || (!class_names.empty() && static_cast<std::size_t>(v) >= class_names.size()))
      throw DataError(path.string() + " line " + std::to_string(line_no) +
                      ": label id out of range");
    return v;
  }
  if (label.is_string()) {
    const std::string wanted = ascii_lower(label.get<std::string>());
    for (std::size_t i = 0; i < class_names.size(); ++i)
      if (ascii_lower(class_names[i]) == wanted) return static_cast<int>(i);
    throw DataError(path.string() + " line " + std::to_string(line_no) + ": unknown label '" +
                    label.get<std::string>() + "'");
  }
  throw DataError(path.string() + " line " + std::to_string(line_no) +
                  ": label must be an integer class id or a class name");
}

// Records for one dataset from a predictions file; every item must have an
// entry.
std::vector<PredictionRecord> records_from_entries(
    const std::vector<TestItem>& items,
    const std::unordered_map<std::string, const PredictionFileEntry*>& by_id,
    const std::vector<std::string>& class_names) {
  std::vector<PredictionRecord> records;
  records.reserve(items.size());
  for (const TestItem& item : items) {
    auto it = by_id.find(item.id);
    if (it == by_id.end())
      throw DataError("predictions file has no entry for item '" + item.id + "'");
    records.push_back(PredictionRecord::make(
        item.id, ProbVector(it->second->probs, class_names), RecordSource::original,
        item.true_label));
  }
  return records;
}

double mean_or_throw(std::span<const std::optional<double>> cells) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const std::optional<double>& c : cells)
    if (c.has_value()) {
      sum += *c;
      ++n;
    }
  if (n == 0) throw DataError("no cells to average");
  return sum / static_cast<double>(n);
}

CalibrationBlock calibration_block(std::span<const PredictionRecord> labeled) {
  CalibrationBlock block;
  block.avg_confidence = average_confidence(labeled);
  block.ece = ece(labeled);
  block.histogram = confidence_histogram(labeled);
  block.diversity = histogram_diversity(block.histogram);
  return block;
}

ImprovementCell improvement_cell(std::optional<double> baseline, std::optional<double> treated) {
  ImprovementCell cell;
  cell.baseline = baseline;
  cell.treated = treated;
  if (!baseline.has_value() || !treated.has_value()) return cell;  // direction "missing"
  if (*baseline == 0.0) {
    cell.direction = "skipped";
    return cell;
  }
  cell.pct = 100.0 * (*treated - *baseline) / *baseline;
  if (std::abs(*treated - *baseline) < 1e-12)
    cell.direction = "flat";
  else
    cell.direction = *treated > *baseline ? "up" : "down";
  return cell;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset_path.empty()) throw ConfigError("dataset path must be set");
  task.validate();
  if (methods.empty()) throw ConfigError("at least one detection method must be requested");
  if (budgets.empty()) throw ConfigError("at least one budget must be set");
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    if (!(budgets[i] > 0.0) || budgets[i] > 1.0)
      throw ConfigError("budgets must lie in (0, 1]");
    if (i > 0 && budgets[i] <= budgets[i - 1])
      throw ConfigError("budgets must be strictly increasing");
  }
  const bool has_source = offline_predictions.has_value() || endpoint.has_value() ||
                          stub_path.has_value();
  if (!has_source)
    throw ConfigError("set either an endpoint (or stub) or an offline predictions file");
  const bool bald_requested =
      std::find(methods.begin(), methods.end(), detectors::Method::bald) != methods.end();
  if (bald_requested && !mucs.has_value())
    throw ConfigError("BALD needs mutant predictions: enable mucs");
  if (endpoint.has_value()) endpoint->validate();
  if (mucs.has_value()) {
    if (mucs->n_mutants < 1) throw ConfigError("mucs.n_mutants must be >= 1");
    if (mucs->K < 1) throw ConfigError("mucs.K must be >= 1");
    for (const mutation::MutationOp& op : mucs->op_pool)
      if (!mutation::is_text_op(op.kind) && task.kind != PromptKind::code)
        throw ConfigError("mucs.op_pool contains code refactorings but the task is text");
  }
}

std::vector<TestItem> load_dataset(const std::filesystem::path& path, PromptKind default_kind,
                                   std::span<const std::string> class_names) {
  std::vector<TestItem> items;
  std::unordered_set<std::string> ids;
  for_each_jsonl(path, "dataset", [&](const json& j, std::size_t line_no) {
    TestItem item;
    if (!j.contains("id") || !j.at("id").is_string())
      throw DataError(path.string() + " line " + std::to_string(line_no) +
                      ": missing string field 'id'");
    item.id = j.at("id").get<std::string>();
    if (!ids.insert(item.id).second)
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": duplicate id '" +
                      item.id + "'");
    if (!j.contains("prompt") || !j.at("prompt").is_string())
      throw DataError(path.string() + " line " + std::to_string(line_no) +
                      ": missing string field 'prompt'");
    item.prompt = j.at("prompt").get<std::string>();
    item.kind = default_kind;
    if (j.contains("kind")) {
      const std::string kind = j.at("kind").get<std::string>();
      if (kind == "text") item.kind = PromptKind::text;
      else if (kind == "code") item.kind = PromptKind::code;
      else
        throw DataError(path.string() + " line " + std::to_string(line_no) +
                        ": kind must be 'text' or 'code'");
    }
    if (j.contains("label") && !j.at("label").is_null())
      item.true_label = resolve_label(j.at("label"), class_names, path, line_no);
    items.push_back(std::move(item));
  });
  return items;
}

EmbeddingMap load_embeddings(const std::filesystem::path& path) {
  EmbeddingMap map;
  std::size_t dim = 0;
  for_each_jsonl(path, "embeddings", [&](const json& j, std::size_t line_no) {
    const std::string id = j.at("id").get<std::string>();
    std::vector<double> vec = j.at("vector").get<std::vector<double>>();
    if (vec.empty())
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": empty vector");
    if (dim == 0) dim = vec.size();
    if (vec.size() != dim)
      throw DataError(path.string() + " line " + std::to_string(line_no) +
                      ": embedding dimension " + std::to_string(vec.size()) +
                      " differs from " + std::to_string(dim));
    if (!map.emplace(id, std::move(vec)).second)
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": duplicate id '" +
                      id + "'");
  });
  return map;
}

std::vector<PredictionFileEntry> load_predictions(const std::filesystem::path& path) {
  std::vector<PredictionFileEntry> entries;
  std::unordered_set<std::string> ids;
  for_each_jsonl(path, "predictions", [&](const json& j, std::size_t line_no) {
    PredictionFileEntry e;
    e.id = j.at("id").get<std::string>();
    if (!ids.insert(e.id).second)
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": duplicate id '" +
                      e.id + "'");
    e.probs = j.at("probs").get<std::vector<double>>();
    if (j.contains("mutant_probs") && !j.at("mutant_probs").is_null())
      e.mutant_probs = j.at("mutant_probs").get<std::vector<std::vector<double>>>();
    entries.push_back(std::move(e));
  });
  return entries;
}

std::unique_ptr<gateway::Gateway> build_gateway(const ExperimentConfig& cfg) {
  if (!cfg.endpoint.has_value() && !cfg.stub_path.has_value()) return nullptr;
  gateway::ModelEndpoint ep = cfg.endpoint.value_or(gateway::ModelEndpoint{
      .base_url = "stub", .model_name = "stub-model", .api_key_env_var = ""});

  std::shared_ptr<gateway::Transport> transport;
  if (cfg.stub_path.has_value()) {
    transport = gateway::StubTransport::load(*cfg.stub_path);
  } else {
    std::string api_key;
    if (!ep.api_key_env_var.empty()) {
      const char* value = std::getenv(ep.api_key_env_var.c_str());
      if (value == nullptr)
        throw ConfigError("API key environment variable '" + ep.api_key_env_var +
                          "' is not set");
      api_key = value;
    }
    transport = std::make_shared<gateway::HttpTransport>(ep.base_url, api_key,
                                                         ep.request_timeout);
  }

  auto cache = cfg.cache_path.has_value()
                   ? std::make_shared<gateway::ResponseCache>(*cfg.cache_path)
                   : std::make_shared<gateway::ResponseCache>();
  gateway::PriceTable prices;
  if (cfg.prices_path.has_value()) prices = gateway::PriceTable::load(*cfg.prices_path);
  return std::make_unique<gateway::Gateway>(std::move(ep), std::move(transport),
                                            std::move(cache), std::move(prices));
}

GatherResult gather(const ExperimentConfig& cfg, gateway::Gateway* gw) {
  GatherResult out;
  out.items = load_dataset(cfg.dataset_path, cfg.task.kind, cfg.task.class_names);
  if (cfg.embeddings_path.has_value()) out.embeddings = load_embeddings(*cfg.embeddings_path);

  std::vector<PredictionFileEntry> offline_entries;
  std::unordered_map<std::string, const PredictionFileEntry*> offline_by_id;
  const bool offline = cfg.offline_predictions.has_value();
  if (offline) {
    offline_entries = load_predictions(*cfg.offline_predictions);
    for (const PredictionFileEntry& e : offline_entries) offline_by_id[e.id] = &e;
    out.original = records_from_entries(out.items, offline_by_id, cfg.task.class_names);
  } else {
    if (gw == nullptr) throw ConfigError("no gateway available and no offline predictions");
    out.original.reserve(out.items.size());
    for (const TestItem& item : out.items)
      out.original.push_back(PredictionRecord::make(item.id, gw->predict(cfg.task, item),
                                                    RecordSource::original, item.true_label));
  }

  if (cfg.train_split_path.has_value()) {
    const std::vector<TestItem> train_items =
        load_dataset(*cfg.train_split_path, cfg.task.kind, cfg.task.class_names);
    if (cfg.train_predictions_path.has_value()) {
      const std::vector<PredictionFileEntry> train_entries =
          load_predictions(*cfg.train_predictions_path);
      std::unordered_map<std::string, const PredictionFileEntry*> by_id;
      for (const PredictionFileEntry& e : train_entries) by_id[e.id] = &e;
      out.train_records = records_from_entries(train_items, by_id, cfg.task.class_names);
    } else if (gw != nullptr) {
      for (const TestItem& item : train_items)
        out.train_records.push_back(PredictionRecord::make(
            item.id, gw->predict(cfg.task, item), RecordSource::original, item.true_label));
    } else {
      throw ConfigError("train split needs train predictions in offline mode");
    }
    for (const PredictionRecord& r : out.train_records)
      if (!r.is_fault.has_value())
        throw DataError("train item '" + r.item_id + "' has no label");
  }

  if (!cfg.mucs.has_value()) return out;

  // Smoothed records: mutation + model queries through the gateway, or the
  // mutant probability vectors stored in the predictions file.
  mutation::SynonymLexicon lexicon;
  if (cfg.lexicon_path.has_value()) lexicon = mutation::SynonymLexicon::load(*cfg.lexicon_path);

  std::size_t mutant_predictions = 0;
  std::size_t mutant_correct = 0;
  bool all_labeled = true;

  out.smoothed.reserve(out.items.size());
  for (std::size_t i = 0; i < out.items.size(); ++i) {
    const TestItem& item = out.items[i];
    std::optional<MutantPredictionSet> set;
    std::optional<PredictionRecord> smoothed_record;

    if (offline) {
      const PredictionFileEntry* entry = offline_by_id.at(item.id);
      if (entry->mutant_probs.has_value() && !entry->mutant_probs->empty()) {
        MutantPredictionSet s;
        s.item_id = item.id;
        for (const std::vector<double>& probs : *entry->mutant_probs) {
          ProbVector v(probs, cfg.task.class_names);
          s.mutant_labels.push_back(v.argmax());
          s.mutant_probs.push_back(std::move(v));
        }
        smoothed_record = PredictionRecord::make(item.id, mean_prob_vector(s.mutant_probs),
                                                 RecordSource::smoothed, item.true_label);
        set = std::move(s);
      }
    } else {
      mutation::ModelFn model_fn = [&](const std::string& prompt) {
        return gw->predict(cfg.task, prompt);
      };
      mutation::MucsConfig mucs_cfg = *cfg.mucs;
      mutation::SmoothResult r = mucs_smooth(item, mucs_cfg, lexicon, model_fn);
      if (r.record.has_value()) smoothed_record = std::move(r.record);
      if (!r.mutants.mutant_probs.empty()) set = std::move(r.mutants);
    }

    if (set.has_value()) {
      if (item.true_label.has_value()) {
        for (int label : set->mutant_labels) {
          ++mutant_predictions;
          if (label == *item.true_label) ++mutant_correct;
        }
      } else {
        all_labeled = false;
      }
      out.mutant_sets.push_back(std::move(*set));
    }

    if (smoothed_record.has_value()) {
      out.smoothed.push_back(std::move(*smoothed_record));
    } else {
      // Smoothing failed for this item: fall back to the original
      // prediction and record the fallback.
      out.fallback_ids.push_back(item.id);
      out.smoothed.push_back(out.original[i]);
    }
  }

  if (all_labeled && mutant_predictions > 0)
    out.mutated_accuracy =
        static_cast<double>(mutant_correct) / static_cast<double>(mutant_predictions);
  return out;
}

EvalReport evaluate(const ExperimentConfig& cfg, const GatherResult& gathered) {
  for (const TestItem& item : gathered.items)
    if (!item.true_label.has_value())
      throw DataError("item '" + item.id + "' has no label; TRC needs ground truth");
  if (gathered.items.empty()) throw DataError("empty dataset");

  EvalReport report;
  report.task_id = cfg.task.task_id;
  report.seed = cfg.seed;
  report.mucs_enabled = cfg.mucs.has_value();
  report.budgets = cfg.budgets;
  report.smoothing_fallback_ids = gathered.fallback_ids;
  for (double b : cfg.budgets)
    report.budget_counts.push_back(Budget::fraction(b).resolve(gathered.items.size()));

  // Rankings consume smoothed records when MuCS is on; the fault ground
  // truth always comes from the model's original predictions.
  const std::span<const PredictionRecord> rank_records =
      report.mucs_enabled ? std::span<const PredictionRecord>(gathered.smoothed)
                          : std::span<const PredictionRecord>(gathered.original);
  const std::span<const PredictionRecord> truth_records(gathered.original);

  for (detectors::Method method : cfg.methods) {
    MethodRow row;
    row.method = method;
    detectors::DetectorConfig dcfg;
    dcfg.method = method;
    dcfg.seed = mix_seed(cfg.seed, detectors::method_name(method));
    dcfg.nns_k = cfg.detector.nns_k;
    dcfg.testrank_k = cfg.detector.testrank_k;
    dcfg.testrank_epochs = cfg.detector.testrank_epochs;
    dcfg.testrank_learning_rate = cfg.detector.testrank_learning_rate;

    detectors::DetectorInputs inputs;
    inputs.records = rank_records;
    inputs.embeddings = gathered.embeddings.empty() ? nullptr : &gathered.embeddings;
    inputs.train_records = gathered.train_records;
    inputs.mutant_sets = gathered.mutant_sets.empty() ? nullptr : &gathered.mutant_sets;

    try {
      const Ranking ranking = detectors::run_detector(dcfg, inputs);
      for (std::size_t bi = 0; bi < report.budget_counts.size(); ++bi) {
        const std::vector<std::string> selected = ranking.top(report.budget_counts[bi]);
        row.trc_per_budget.emplace_back(trc(selected, truth_records, report.budget_counts[bi]));
      }
      row.average = mean_or_throw(row.trc_per_budget);
    } catch (const Error& e) {
      row.trc_per_budget.assign(report.budgets.size(), std::nullopt);
      row.average = std::nullopt;
      row.skipped_reason = e.what();
    }
    report.rows.push_back(std::move(row));
  }

  report.original_calibration = calibration_block(truth_records);
  if (report.mucs_enabled)
    report.smoothed_calibration = calibration_block(gathered.smoothed);

  report.accuracy.original = accuracy(truth_records);
  report.accuracy.mutated = gathered.mutated_accuracy;
  if (gathered.mutated_accuracy.has_value()) {
    report.accuracy.drift = std::abs(report.accuracy.original - *gathered.mutated_accuracy);
    report.accuracy.drift_flagged = *report.accuracy.drift > kAccuracyDriftThreshold;
  }
  return report;
}

EvalReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::unique_ptr<gateway::Gateway> gw = build_gateway(cfg);
  return evaluate(cfg, gather(cfg, gw.get()));
}

ImprovementTable compare_reports(const EvalReport& baseline, const EvalReport& treated) {
  if (baseline.budgets != treated.budgets)
    throw DataError("report grids do not match: different budgets");

  std::unordered_map<int, const MethodRow*> treated_rows;
  for (const MethodRow& row : treated.rows) treated_rows[static_cast<int>(row.method)] = &row;

  ImprovementTable table;
  table.baseline_name = baseline.name();
  table.treated_name = treated.name();
  table.treated_mucs = treated.mucs_enabled;
  table.budgets = baseline.budgets;

  std::unordered_set<int> baseline_methods;
  for (const MethodRow& brow : baseline.rows) {
    baseline_methods.insert(static_cast<int>(brow.method));
    auto it = treated_rows.find(static_cast<int>(brow.method));
    if (it == treated_rows.end())
      throw DataError("report grids do not match: treated report lacks method '" +
                      std::string(detectors::method_name(brow.method)) + "'");
    const MethodRow& trow = *it->second;

    ImprovementRow row;
    row.method = brow.method;
    for (std::size_t bi = 0; bi < table.budgets.size(); ++bi)
      row.cells.push_back(improvement_cell(brow.trc_per_budget[bi], trow.trc_per_budget[bi]));

    std::vector<std::optional<double>> pcts;
    for (const ImprovementCell& c : row.cells) pcts.push_back(c.pct);
    row.average_per_budget.baseline = brow.average;
    row.average_per_budget.treated = trow.average;
    const bool any_pct =
        std::any_of(pcts.begin(), pcts.end(), [](const auto& p) { return p.has_value(); });
    if (any_pct) {
      row.average_per_budget.pct = mean_or_throw(pcts);
      row.average_per_budget.direction = *row.average_per_budget.pct > 1e-12    ? "up"
                                         : *row.average_per_budget.pct < -1e-12 ? "down"
                                                                                : "flat";
    } else if (std::any_of(row.cells.begin(), row.cells.end(), [](const ImprovementCell& c) {
                 return c.direction == "skipped";
               })) {
      row.average_per_budget.direction = "skipped";
    }
    row.average_ratio = improvement_cell(brow.average, trow.average);
    table.rows.push_back(std::move(row));
  }

  for (const MethodRow& trow : treated.rows) {
    if (baseline_methods.contains(static_cast<int>(trow.method))) continue;
    table.treated_only.push_back({trow.method, trow.trc_per_budget, trow.average});
  }
  return table;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.dataset_path = j.value("dataset", "");

  if (j.contains("task")) {
    const json& t = j.at("task");
    if (t.is_string()) {
      cfg.task = gateway::TaskTemplate::builtin(t.get<std::string>());
    } else {
      const std::string id = t.value("id", "");
      try {
        cfg.task = gateway::TaskTemplate::builtin(id);
      } catch (const ConfigError&) {
        cfg.task.task_id = id;  // fully custom task
      }
      if (t.contains("class_names"))
        cfg.task.class_names = t.at("class_names").get<std::vector<std::string>>();
      if (t.contains("instruction")) cfg.task.instruction = t.at("instruction").get<std::string>();
      if (t.contains("kind"))
        cfg.task.kind = t.at("kind").get<std::string>() == "code" ? PromptKind::code
                                                                  : PromptKind::text;
      if (t.contains("scalar_binary")) cfg.task.scalar_binary = t.at("scalar_binary").get<bool>();
      if (t.contains("few_shot")) {
        for (const json& ex : t.at("few_shot")) {
          gateway::FewShotExample fs;
          fs.prompt = ex.at("prompt").get<std::string>();
          fs.label = resolve_label(ex.at("label"), cfg.task.class_names, "config", 0);
          cfg.task.few_shot.push_back(std::move(fs));
        }
      }
    }
  } else {
    throw ConfigError("config needs a 'task' entry");
  }

  if (j.contains("endpoint")) {
    const json& e = j.at("endpoint");
    gateway::ModelEndpoint ep;
    ep.base_url = e.value("base_url", "");
    ep.model_name = e.value("model_name", "");
    ep.api_key_env_var = e.value("api_key_env", "");
    ep.top_p = e.value("top_p", 1.0);
    ep.max_context_tokens = e.value("max_context_tokens", 16385);
    ep.request_timeout = std::chrono::milliseconds(e.value("request_timeout_ms", 30000));
    ep.max_retries = e.value("max_retries", 3);
    ep.max_in_flight = e.value("max_in_flight", 4);
    cfg.endpoint = std::move(ep);
  }

  if (j.contains("offline_predictions"))
    cfg.offline_predictions = j.at("offline_predictions").get<std::string>();
  if (j.contains("stub")) cfg.stub_path = j.at("stub").get<std::string>();

  if (j.contains("methods")) {
    for (const json& m : j.at("methods")) {
      const std::string name = m.get<std::string>();
      const std::optional<detectors::Method> method = detectors::method_from_name(name);
      if (!method.has_value()) throw ConfigError("unknown detection method '" + name + "'");
      cfg.methods.push_back(*method);
    }
  }

  if (j.contains("budgets")) cfg.budgets = j.at("budgets").get<std::vector<double>>();
  cfg.seed = j.value("seed", std::uint64_t{0});

  if (j.contains("mucs")) {
    const json& m = j.at("mucs");
    if (m.value("enabled", true)) {
      mutation::MucsConfig mc;
      mc.n_mutants = m.value("n_mutants", 10);
      mc.K = m.value("K", 3);
      mc.seed = m.value("seed", cfg.seed);
      if (m.contains("op_pool")) {
        for (const json& op : m.at("op_pool")) {
          const std::string name = op.is_string() ? op.get<std::string>()
                                                  : op.at("op").get<std::string>();
          const std::optional<mutation::OpKind> kind = mutation::op_from_name(name);
          if (!kind.has_value())
            throw ConfigError("unknown mutation operator '" + name + "'");
          mutation::MutationOp mop;
          mop.kind = *kind;
          if (op.is_object()) {
            mop.n = op.value("n", 1);
            mop.t_delete = op.value("t_delete", 0.01);
          }
          mc.op_pool.push_back(mop);
        }
      }
      cfg.mucs = std::move(mc);
    }
  }

  if (j.contains("lexicon")) cfg.lexicon_path = j.at("lexicon").get<std::string>();
  if (j.contains("embeddings")) cfg.embeddings_path = j.at("embeddings").get<std::string>();
  if (j.contains("train_split")) cfg.train_split_path = j.at("train_split").get<std::string>();
  if (j.contains("train_predictions"))
    cfg.train_predictions_path = j.at("train_predictions").get<std::string>();
  if (j.contains("cache")) cfg.cache_path = j.at("cache").get<std::string>();
  if (j.contains("prices")) cfg.prices_path = j.at("prices").get<std::string>();

  if (j.contains("detector")) {
    const json& d = j.at("detector");
    cfg.detector.nns_k = d.value("nns_k", 5);
    cfg.detector.testrank_k = d.value("testrank_k", 10);
    cfg.detector.testrank_epochs = d.value("testrank_epochs", 200);
    cfg.detector.testrank_learning_rate = d.value("testrank_learning_rate", 0.1);
  }
  return cfg;
}

}  // namespace mucs::harness
