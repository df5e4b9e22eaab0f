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

#ifndef MUCS_TYPES_HPP_
#define MUCS_TYPES_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace mucs {

enum class PromptKind { text, code };

// Where a prediction record came from: the model's answer on the original
// prompt, or the mutation-smoothed average over mutant prompts.
enum class RecordSource { original, smoothed };

// A normalized class-probability distribution for one prediction.
//
// Construction renormalizes raw entries whose sum lies in [0.95, 1.05]
// (LLM-emitted distributions are approximately normalized; larger
// deviations signal a corrupted parse and are rejected). After
// construction the entries sum to 1 within 1e-6.
class ProbVector {
 public:
  ProbVector(std::vector<double> probs, std::vector<std::string> class_names);
  // Class names default to "class_0", "class_1", ...
  explicit ProbVector(std::vector<double> probs);

  // For entries that are already normalized (cache reloads): validates the
  // invariants but skips the renormalizing division, preserving bits.
  static ProbVector already_normalized(std::vector<double> probs,
                                       std::vector<std::string> class_names);

  const std::vector<double>& probs() const { return probs_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  std::size_t num_classes() const { return probs_.size(); }

  // Index of the maximum entry; ties break toward the lowest class id.
  int argmax() const;
  double max_prob() const { return probs_[static_cast<std::size_t>(argmax())]; }

  // Class ids sorted by probability descending, ties by lower id first.
  std::vector<int> classes_by_prob() const;

  bool operator==(const ProbVector& other) const {
    return probs_ == other.probs_ && class_names_ == other.class_names_;
  }

 private:
  std::vector<double> probs_;
  std::vector<std::string> class_names_;
};

// One unlabeled-or-labeled prompt (natural language or code).
struct TestItem {
  std::string id;
  std::string prompt;
  PromptKind kind = PromptKind::text;
  std::optional<int> true_label;
  std::optional<std::vector<double>> embedding;
};

// A test item joined with its probability vector.
struct PredictionRecord {
  std::string item_id;
  ProbVector probs;
  int predicted = 0;  // argmax of probs, ties toward the lowest class id
  RecordSource source = RecordSource::original;
  // Defined iff the true label is known; true iff predicted != true_label.
  std::optional<bool> is_fault;

  static PredictionRecord make(std::string item_id, ProbVector probs,
                               RecordSource source,
                               std::optional<int> true_label);

  bool operator==(const PredictionRecord& other) const = default;
};

// A labeling budget: either a fraction of the test set or an absolute count.
class Budget {
 public:
  static Budget fraction(double f);     // f in (0, 1]
  static Budget count(std::size_t n);   // n >= 1

  bool is_fraction() const { return is_fraction_; }
  double fraction_value() const { return fraction_; }
  std::size_t count_value() const { return count_; }

  // ceil(fraction * test_size) for fractional budgets. The resolved count
  // never exceeds the test size; absolute budgets above it are rejected.
  std::size_t resolve(std::size_t test_size) const;

 private:
  Budget() = default;
  bool is_fraction_ = true;
  double fraction_ = 0.0;
  std::size_t count_ = 0;
};

struct CalibrationBin {
  std::size_t count = 0;
  double accuracy = 0.0;        // 0 when the bin is empty
  double avg_confidence = 0.0;  // 0 when the bin is empty
};

// Per-interval statistics over (0,1] split into m_intervals equal bins
// ((m-1)/M, m/M]. Counts sum to the record count.
struct CalibrationBins {
  int m_intervals = 0;
  std::vector<CalibrationBin> bins;
};

// How a detector's stored scores relate to its priority order. Cluster- or
// greedy-based methods emit a selection order whose scores are not globally
// monotone; they declare themselves positional.
enum class ScoreOrientation { score_descending, score_ascending, positional };

std::string_view orientation_name(ScoreOrientation o);
std::optional<ScoreOrientation> orientation_from_name(std::string_view s);

// A detector's total order over item ids, most fault-suspicious first.
struct Ranking {
  std::string method;
  ScoreOrientation orientation = ScoreOrientation::score_descending;
  std::string tie_break;  // deterministic tie-break rule id
  std::vector<std::string> ids;
  std::vector<double> scores;  // parallel to ids

  std::vector<std::string> top(std::size_t n) const;

  bool operator==(const Ranking& other) const = default;
};

// Predictions collected on the mutants of one item.
struct MutantPredictionSet {
  std::string item_id;
  std::vector<ProbVector> mutant_probs;  // length T >= 1
  std::vector<int> mutant_labels;        // argmax of each vector

  std::size_t size() const { return mutant_probs.size(); }
};

using EmbeddingMap = std::unordered_map<std::string, std::vector<double>>;

// Entry-wise arithmetic mean of probability vectors, renormalized. When all
// vectors are identical the first one is returned unchanged, keeping the
// mean bit-exact in that case.
ProbVector mean_prob_vector(const std::vector<ProbVector>& vectors);

}  // namespace mucs

#endif  // MUCS_TYPES_HPP_
