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

#ifndef MUCS_DETECTORS_HPP_
#define MUCS_DETECTORS_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mucs/types.hpp"

namespace mucs::detectors {

enum class Method {
  random,
  maxp,
  gini,
  entropy,
  margin,
  mcp,
  nns,
  ats,
  testrank_lite,
  bald,
};

std::string_view method_name(Method m);
std::optional<Method> method_from_name(std::string_view name);
// Table-style column header; non-BALD methods gain a "-M" suffix when the
// ranking was computed on smoothed records.
std::string method_display_name(Method m, bool smoothed);

struct DetectorConfig {
  Method method = Method::gini;
  std::uint64_t seed = 0;
  int nns_k = 5;
  int testrank_k = 10;
  int testrank_epochs = 200;
  double testrank_learning_rate = 0.1;
};

// Uncertainty scores over a single probability vector. Gini and entropy
// rank descending (higher = more suspicious); maxp and margin ascending.
double score_gini(const ProbVector& p);
double score_entropy(const ProbVector& p);
double score_maxp(const ProbVector& p);
double score_margin(const ProbVector& p);

// Disagreement over mutant predictions: 1 - count(mode)/T. Mode ties break
// toward the lowest class id (the count is unaffected either way).
double score_bald(const MutantPredictionSet& m);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Seeded uniform sample without replacement; the full ranking is one
// Fisher-Yates permutation whose prefixes are the budgeted selections.
Ranking select_random(std::span<const std::string> ids, std::size_t budget_count,
                      std::uint64_t seed);

// Multiple-boundary clustering and prioritization. Records cluster by their
// (top-1, top-2) class pair; within a cluster priority is ascending
// p_top1/p_top2 (closer to 1 = nearer the boundary); clusters are consumed
// round-robin. The returned ranking lists the whole consumption order, so
// any budget's selection is a prefix.
Ranking select_mcp(std::span<const PredictionRecord> records, std::size_t budget_count);

// Simplified adaptive test selection. Each record's fault pattern is the
// sorted triple of its top-3 class ids and its point is
// (p_(2)/p_(1), p_(3)/p_(1)) in the unit square; selection greedily
// maximizes the minimum distance to already-selected points of the same
// pattern, unseen patterns first. Requires at least 3 classes.
Ranking select_ats(std::span<const PredictionRecord> records, std::size_t budget_count);

namespace detail {
// As select_ats, but with an explicit pre-selected prefix (for oracle tests
// that pin the greedy continuation after a forced first pick).
Ranking select_ats_seeded(std::span<const PredictionRecord> records, std::size_t budget_count,
                          std::span<const std::string> seed_ids);
}  // namespace detail

// Nearest-neighbor smoothing: each record's probabilities become the mean
// of its own vector and those of its k nearest neighbors by cosine
// distance. Predicted labels are recomputed; fault flags are cleared (the
// smoothed copies are a scoring intermediate, not an evaluation source).
std::vector<PredictionRecord> smooth_nns(std::span<const PredictionRecord> records,
                                         const EmbeddingMap& embeddings, int k);

// The NNS detector: gini ranking over neighbor-smoothed probabilities.
Ranking rank_nns(std::span<const PredictionRecord> records, const EmbeddingMap& embeddings,
                 int k);

// TestRank-lite: per item, features are the probability vector plus one
// contextual scalar (similarity-weighted mean fault rate of its
// testrank_k nearest labeled neighbors); a logistic regression trained by
// full-batch gradient descent on the labeled train split predicts fault
// probability, ranked descending. The contextual weight starts at 1 (all
// other weights 0), so a zero learning rate degenerates to ranking by the
// contextual feature alone.
Ranking rank_testrank_lite(std::span<const PredictionRecord> train_labeled,
                           std::span<const PredictionRecord> test_records,
                           const EmbeddingMap& embeddings, const DetectorConfig& cfg);

struct DetectorInputs {
  std::span<const PredictionRecord> records;
  const EmbeddingMap* embeddings = nullptr;
  std::span<const PredictionRecord> train_records;
  const std::vector<MutantPredictionSet>* mutant_sets = nullptr;
};

// Uniform entry point: validates the method's prerequisites against the
// inputs and returns its full ranking (budget-independent; budgeted
// selections are prefixes). Throws ConfigError when a prerequisite is
// unmet, e.g. ATS on a 2-class task.
Ranking run_detector(const DetectorConfig& cfg, const DetectorInputs& in);

}  // namespace mucs::detectors

#endif  // MUCS_DETECTORS_HPP_
