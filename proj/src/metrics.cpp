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

#include "mucs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "mucs/errors.hpp"

namespace mucs {

double confidence(const ProbVector& p) { return p.max_prob(); }

int confidence_bin(double conf, int m_intervals) {
  if (m_intervals < 1) throw ConfigError("interval count must be >= 1");
  // The epsilon keeps values that sit exactly on a bin edge (0.1 * 30 = 3)
  // from spilling into the next bin through floating-point rounding.
  int m = static_cast<int>(std::ceil(conf * m_intervals - 1e-9));
  return std::clamp(m, 1, m_intervals) - 1;
}

namespace {

void require_labeled(std::span<const PredictionRecord> records, const char* op) {
  for (const PredictionRecord& r : records)
    if (!r.is_fault.has_value())
      throw DataError(std::string(op) + " requires labeled records; item '" + r.item_id +
                      "' has no fault flag");
}

}  // namespace

CalibrationBins calibration_bins(std::span<const PredictionRecord> labeled, int m_intervals) {
  require_labeled(labeled, "calibration");
  CalibrationBins out;
  out.m_intervals = m_intervals;
  out.bins.assign(static_cast<std::size_t>(m_intervals), CalibrationBin{});
  std::vector<std::size_t> correct(static_cast<std::size_t>(m_intervals), 0);
  for (const PredictionRecord& r : labeled) {
    const auto b = static_cast<std::size_t>(confidence_bin(confidence(r.probs), m_intervals));
    out.bins[b].count += 1;
    out.bins[b].avg_confidence += confidence(r.probs);
    if (!*r.is_fault) correct[b] += 1;
  }
  for (std::size_t b = 0; b < out.bins.size(); ++b) {
    if (out.bins[b].count == 0) continue;
    const double n = static_cast<double>(out.bins[b].count);
    out.bins[b].avg_confidence /= n;
    out.bins[b].accuracy = static_cast<double>(correct[b]) / n;
  }
  return out;
}

double ece(std::span<const PredictionRecord> labeled, int m_intervals) {
  if (labeled.empty()) throw DataError("no labeled records");
  const CalibrationBins cb = calibration_bins(labeled, m_intervals);
  const double total = static_cast<double>(labeled.size());
  double sum = 0.0;
  for (const CalibrationBin& bin : cb.bins) {
    if (bin.count == 0) continue;
    sum += (static_cast<double>(bin.count) / total) * std::abs(bin.accuracy - bin.avg_confidence);
  }
  return sum;
}

double trc(std::span<const std::string> selected_ids,
           std::span<const PredictionRecord> all_labeled,
           std::size_t budget_count) {
  require_labeled(all_labeled, "trc");
  if (selected_ids.size() > budget_count)
    throw ConfigError("selection size exceeds the labeling budget");
  std::unordered_set<std::string_view> fault_ids;
  std::unordered_set<std::string_view> known_ids;
  for (const PredictionRecord& r : all_labeled) {
    known_ids.insert(r.item_id);
    if (*r.is_fault) fault_ids.insert(r.item_id);
  }
  if (fault_ids.empty()) throw DataError("TRC undefined: no faults");
  std::size_t selected_faults = 0;
  for (const std::string& id : selected_ids) {
    if (!known_ids.contains(id))
      throw DataError("selected id '" + id + "' is not in the record set");
    if (fault_ids.contains(id)) ++selected_faults;
  }
  const std::size_t denom = std::min(budget_count, fault_ids.size());
  return static_cast<double>(selected_faults) / static_cast<double>(denom);
}

std::vector<std::size_t> confidence_histogram(std::span<const PredictionRecord> records,
                                              int m_intervals) {
  if (m_intervals < 1) throw ConfigError("interval count must be >= 1");
  std::vector<std::size_t> counts(static_cast<std::size_t>(m_intervals), 0);
  for (const PredictionRecord& r : records)
    counts[static_cast<std::size_t>(confidence_bin(confidence(r.probs), m_intervals))] += 1;
  return counts;
}

double histogram_diversity(std::span<const std::size_t> counts) {
  if (counts.empty()) throw DataError("histogram diversity needs a non-empty count vector");
  const double m = static_cast<double>(counts.size());
  double mean = 0.0;
  for (std::size_t c : counts) mean += static_cast<double>(c);
  mean /= m;
  double var = 0.0;
  for (std::size_t c : counts) {
    const double d = static_cast<double>(c) - mean;
    var += d * d;
  }
  return var / m;
}

double average_confidence(std::span<const PredictionRecord> records) {
  if (records.empty()) throw DataError("no records");
  double sum = 0.0;
  for (const PredictionRecord& r : records) sum += confidence(r.probs);
  return sum / static_cast<double>(records.size());
}

double accuracy(std::span<const PredictionRecord> labeled) {
  if (labeled.empty()) throw DataError("no labeled records");
  require_labeled(labeled, "accuracy");
  std::size_t correct = 0;
  for (const PredictionRecord& r : labeled)
    if (!*r.is_fault) ++correct;
  return static_cast<double>(correct) / static_cast<double>(labeled.size());
}

}  // namespace mucs
