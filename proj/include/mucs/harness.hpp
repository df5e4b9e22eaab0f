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

#ifndef MUCS_HARNESS_HPP_
#define MUCS_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mucs/detectors.hpp"
#include "mucs/gateway.hpp"
#include "mucs/mutation.hpp"
#include "mucs/types.hpp"

namespace mucs::harness {

struct DetectorParams {
  int nns_k = 5;
  int testrank_k = 10;
  int testrank_epochs = 200;
  double testrank_learning_rate = 0.1;

  bool operator==(const DetectorParams&) const = default;
};

// Accuracy drift beyond this between original and mutated prompts flags the
// mutation setup as too aggressive for the task.
inline constexpr double kAccuracyDriftThreshold = 0.05;

struct ExperimentConfig {
  std::string dataset_path;
  gateway::TaskTemplate task;
  std::optional<gateway::ModelEndpoint> endpoint;
  std::optional<std::string> offline_predictions;
  std::optional<std::string> stub_path;  // table-driven transport instead of HTTP
  std::vector<detectors::Method> methods;
  std::vector<double> budgets{0.10, 0.30, 0.50};  // strictly increasing fractions in (0,1]
  std::optional<mutation::MucsConfig> mucs;
  std::optional<std::string> lexicon_path;
  std::uint64_t seed = 0;
  std::optional<std::string> embeddings_path;
  std::optional<std::string> train_split_path;
  std::optional<std::string> train_predictions_path;
  std::optional<std::string> cache_path;
  std::optional<std::string> prices_path;
  DetectorParams detector;

  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);

struct CalibrationBlock {
  double avg_confidence = 0.0;
  double ece = 0.0;
  std::vector<std::size_t> histogram;  // binned confidence counts
  double diversity = 0.0;              // variance of the histogram counts

  bool operator==(const CalibrationBlock&) const = default;
};

struct MethodRow {
  detectors::Method method = detectors::Method::gini;
  std::vector<std::optional<double>> trc_per_budget;  // nullopt renders "-"
  std::optional<double> average;                      // mean of the present cells
  std::string skipped_reason;  // non-empty when the method could not run

  bool operator==(const MethodRow&) const = default;
};

struct AccuracyBlock {
  double original = 0.0;
  std::optional<double> mutated;  // mean accuracy over all mutant predictions
  std::optional<double> drift;    // |original - mutated|
  bool drift_flagged = false;     // drift > kAccuracyDriftThreshold

  bool operator==(const AccuracyBlock&) const = default;
};

struct ImprovementCell {
  std::optional<double> baseline;
  std::optional<double> treated;
  std::optional<double> pct;  // 100 * (treated - baseline) / baseline
  // "up" | "down" | "flat" | "skipped" (zero baseline) | "missing"
  std::string direction = "missing";

  bool operator==(const ImprovementCell&) const = default;
};

struct ImprovementRow {
  detectors::Method method = detectors::Method::gini;
  std::vector<ImprovementCell> cells;  // per budget
  // The per-budget convention: improvement averaged over budget cells.
  ImprovementCell average_per_budget;
  // The ratio-of-averages convention: change between the two row averages.
  ImprovementCell average_ratio;

  bool operator==(const ImprovementRow&) const = default;
};

struct ImprovementTable {
  std::string baseline_name;
  std::string treated_name;
  bool treated_mucs = false;  // adds the -M column suffix
  std::vector<double> budgets;
  std::vector<ImprovementRow> rows;

  // Methods present only in the treated report (e.g. BALD): TRC without a
  // relative-improvement figure.
  struct TreatedOnly {
    detectors::Method method = detectors::Method::bald;
    std::vector<std::optional<double>> trc_per_budget;
    std::optional<double> average;

    bool operator==(const TreatedOnly&) const = default;
  };
  std::vector<TreatedOnly> treated_only;

  bool operator==(const ImprovementTable&) const = default;
};

struct EvalReport {
  std::string task_id;
  std::uint64_t seed = 0;
  bool mucs_enabled = false;
  std::vector<double> budgets;
  std::vector<std::size_t> budget_counts;
  std::vector<MethodRow> rows;
  CalibrationBlock original_calibration;
  std::optional<CalibrationBlock> smoothed_calibration;
  AccuracyBlock accuracy;
  std::vector<std::string> smoothing_fallback_ids;
  std::optional<ImprovementTable> improvement;

  std::string name() const { return mucs_enabled ? task_id + "+mucs" : task_id; }

  bool operator==(const EvalReport&) const = default;
};

// Dataset file: JSON-lines {id, prompt, label?, kind?}. String labels are
// resolved against the class names case-insensitively; kind defaults to the
// task's prompt kind. Duplicate ids and malformed lines are reported with
// their line number.
std::vector<TestItem> load_dataset(const std::filesystem::path& path,
                                   PromptKind default_kind,
                                   std::span<const std::string> class_names);

// Embeddings file: JSON-lines {id, vector:[...]}, dataset-uniform dimension.
EmbeddingMap load_embeddings(const std::filesystem::path& path);

struct PredictionFileEntry {
  std::string id;
  std::vector<double> probs;
  std::optional<std::vector<std::vector<double>>> mutant_probs;
};

// Predictions file: JSON-lines {id, probs:[...], mutant_probs?:[[...],...]}.
std::vector<PredictionFileEntry> load_predictions(const std::filesystem::path& path);

// Everything evaluate() needs, resolved from files and/or the gateway.
struct GatherResult {
  std::vector<TestItem> items;
  std::vector<PredictionRecord> original;
  std::vector<PredictionRecord> smoothed;  // parallel to items when mucs is on
  std::vector<MutantPredictionSet> mutant_sets;
  std::vector<std::string> fallback_ids;  // items whose smoothing fell back
  std::optional<double> mutated_accuracy;
  EmbeddingMap embeddings;
  std::vector<PredictionRecord> train_records;
};

// Obtains original (and, when configured, smoothed) prediction records from
// the offline predictions file or the gateway. Offline mode performs no
// network I/O: `gw` may be null.
GatherResult gather(const ExperimentConfig& cfg, gateway::Gateway* gw);

// Pure evaluation over gathered inputs: every requested detector at every
// budget (rankings on smoothed records when MuCS is on, BALD on mutant
// sets), TRC against the original predictions' fault set, calibration and
// accuracy-drift blocks. Detectors with unmet prerequisites render "-".
EvalReport evaluate(const ExperimentConfig& cfg, const GatherResult& gathered);

// gather + evaluate with a gateway built from the config (stub or HTTP).
EvalReport run_experiment(const ExperimentConfig& cfg);

std::unique_ptr<gateway::Gateway> build_gateway(const ExperimentConfig& cfg);

// Relative improvement of `treated` over `baseline` on the same
// (method, budget) grid; zero-baseline cells are skipped. Methods present
// only in the treated report are appended without improvement figures.
ImprovementTable compare_reports(const EvalReport& baseline, const EvalReport& treated);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);
void save_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_report(const std::filesystem::path& path);

nlohmann::json improvement_to_json(const ImprovementTable& table);
ImprovementTable improvement_from_json(const nlohmann::json& j);

// CSV tables (UTF-8, comma-separated, header row first).
std::string trc_table_csv(const EvalReport& report);
std::string calibration_csv(const EvalReport& report);
std::string improvement_csv(const ImprovementTable& table);

}  // namespace mucs::harness

#endif  // MUCS_HARNESS_HPP_
