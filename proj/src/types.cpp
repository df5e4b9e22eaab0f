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

#include "mucs/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mucs/errors.hpp"

namespace mucs {

namespace {

std::vector<std::string> default_class_names(std::size_t n) {
  std::vector<std::string> names;
  names.reserve(n);
  for (std::size_t i = 0; i < n; ++i) names.push_back("class_" + std::to_string(i));
  return names;
}

}  // namespace

ProbVector::ProbVector(std::vector<double> probs, std::vector<std::string> class_names)
    : probs_(std::move(probs)), class_names_(std::move(class_names)) {
  if (probs_.size() < 2) throw DataError("probability vector needs at least 2 classes");
  if (class_names_.empty()) class_names_ = default_class_names(probs_.size());
  if (class_names_.size() != probs_.size())
    throw DataError("class name count does not match probability count");
  double sum = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p) || p < 0.0)
      throw DataError("probability entries must be finite and non-negative");
    sum += p;
  }
  if (sum < 0.95 || sum > 1.05)
    throw DataError("probability sum " + std::to_string(sum) + " outside [0.95, 1.05]");
  // Entries that already sum to 1 up to floating-point noise are kept
  // bit-identical; dividing by such a sum only perturbs them.
  if (std::abs(sum - 1.0) > 1e-12)
    for (double& p : probs_) p /= sum;
}

ProbVector::ProbVector(std::vector<double> probs)
    : ProbVector(std::move(probs), {}) {}

ProbVector ProbVector::already_normalized(std::vector<double> probs,
                                          std::vector<std::string> class_names) {
  ProbVector v(probs, std::move(class_names));  // runs the full validation
  v.probs_ = std::move(probs);                  // keep the caller's bits
  double sum = 0.0;
  for (double p : v.probs_) sum += p;
  if (std::abs(sum - 1.0) > 1e-6)
    throw DataError("already-normalized entries must sum to 1 within 1e-6");
  return v;
}

int ProbVector::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs_.size(); ++i)
    if (probs_[i] > probs_[best]) best = i;
  return static_cast<int>(best);
}

std::vector<int> ProbVector::classes_by_prob() const {
  std::vector<int> order(probs_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (probs_[static_cast<std::size_t>(a)] != probs_[static_cast<std::size_t>(b)])
      return probs_[static_cast<std::size_t>(a)] > probs_[static_cast<std::size_t>(b)];
    return a < b;
  });
  return order;
}

PredictionRecord PredictionRecord::make(std::string item_id, ProbVector probs,
                                        RecordSource source,
                                        std::optional<int> true_label) {
  PredictionRecord r{std::move(item_id), std::move(probs), 0, source, std::nullopt};
  r.predicted = r.probs.argmax();
  if (true_label.has_value()) r.is_fault = (r.predicted != *true_label);
  return r;
}

Budget Budget::fraction(double f) {
  if (!(f > 0.0) || f > 1.0) throw ConfigError("budget fraction must lie in (0, 1]");
  Budget b;
  b.is_fraction_ = true;
  b.fraction_ = f;
  return b;
}

Budget Budget::count(std::size_t n) {
  if (n == 0) throw ConfigError("budget count must be positive");
  Budget b;
  b.is_fraction_ = false;
  b.count_ = n;
  return b;
}

std::size_t Budget::resolve(std::size_t test_size) const {
  if (test_size == 0) throw ConfigError("cannot resolve a budget against an empty test set");
  // The epsilon keeps products that are integers up to representation
  // noise (0.07 * 100) from ceiling one past the intended count.
  std::size_t n = is_fraction_
                      ? static_cast<std::size_t>(
                            std::ceil(fraction_ * static_cast<double>(test_size) - 1e-9))
                      : count_;
  if (is_fraction_ && n == 0) n = 1;
  if (n > test_size)
    throw ConfigError("budget count " + std::to_string(n) + " exceeds test size " +
                      std::to_string(test_size));
  return n;
}

std::string_view orientation_name(ScoreOrientation o) {
  switch (o) {
    case ScoreOrientation::score_descending: return "score_descending";
    case ScoreOrientation::score_ascending: return "score_ascending";
    case ScoreOrientation::positional: return "positional";
  }
  return "positional";
}

std::optional<ScoreOrientation> orientation_from_name(std::string_view s) {
  if (s == "score_descending") return ScoreOrientation::score_descending;
  if (s == "score_ascending") return ScoreOrientation::score_ascending;
  if (s == "positional") return ScoreOrientation::positional;
  return std::nullopt;
}

std::vector<std::string> Ranking::top(std::size_t n) const {
  n = std::min(n, ids.size());
  return std::vector<std::string>(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n));
}

ProbVector mean_prob_vector(const std::vector<ProbVector>& vectors) {
  if (vectors.empty()) throw DataError("cannot average zero probability vectors");
  const std::size_t classes = vectors.front().num_classes();
  bool all_equal = true;
  for (const ProbVector& v : vectors) {
    if (v.num_classes() != classes)
      throw DataError("probability vectors disagree on class count");
    if (!(v.probs() == vectors.front().probs())) all_equal = false;
  }
  if (all_equal) return vectors.front();
  std::vector<double> mean(classes, 0.0);
  for (const ProbVector& v : vectors)
    for (std::size_t c = 0; c < classes; ++c) mean[c] += v.probs()[c];
  for (double& m : mean) m /= static_cast<double>(vectors.size());
  return ProbVector(std::move(mean), vectors.front().class_names());
}

}  // namespace mucs
