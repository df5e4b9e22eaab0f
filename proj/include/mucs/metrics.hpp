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

#ifndef MUCS_METRICS_HPP_
#define MUCS_METRICS_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mucs/types.hpp"

namespace mucs {

// One binning everywhere: confidence histograms, diversity, and ECE share
// the same default interval count. Overridable per call.
inline constexpr int kDefaultBins = 30;

// Prediction confidence: the probability assigned to the predicted label,
// i.e. the maximum entry. Always >= 1/C for a C-class vector.
double confidence(const ProbVector& p);

// Interval index (0-based) for a confidence value under the partition of
// (0,1] into m equal intervals ((m-1)/M, m/M]. A confidence of exactly 0
// (degenerate parses only) maps to the first bin so the binning is total.
int confidence_bin(double conf, int m_intervals);

// Per-bin count/accuracy/mean-confidence over labeled records.
CalibrationBins calibration_bins(std::span<const PredictionRecord> labeled,
                                 int m_intervals = kDefaultBins);

// Expected calibration error: sum_m (|B_m|/|X|) * |Acc(B_m) - AvgConf(B_m)|.
// Empty bins contribute zero. Requires every record to carry a fault flag;
// an empty input raises "no labeled records".
double ece(std::span<const PredictionRecord> labeled, int m_intervals = kDefaultBins);

// Test relative coverage: faults inside the selection divided by
// min(budget, total fault count). Raises "TRC undefined: no faults" when
// the whole record set contains no fault.
double trc(std::span<const std::string> selected_ids,
           std::span<const PredictionRecord> all_labeled,
           std::size_t budget_count);

// Count of records per confidence interval.
std::vector<std::size_t> confidence_histogram(std::span<const PredictionRecord> records,
                                              int m_intervals = kDefaultBins);

// Population variance of the per-bin counts (divide by the bin count).
// Lower variance means confidence is spread across more intervals.
double histogram_diversity(std::span<const std::size_t> counts);

// Mean prediction confidence over records.
double average_confidence(std::span<const PredictionRecord> records);

// Fraction of records whose prediction is correct. Requires fault flags.
double accuracy(std::span<const PredictionRecord> labeled);

}  // namespace mucs

#endif  // MUCS_METRICS_HPP_
