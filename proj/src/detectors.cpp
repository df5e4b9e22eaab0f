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

#include "mucs/detectors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

#include "mucs/errors.hpp"
#include "mucs/metrics.hpp"
#include "mucs/rng.hpp"

namespace mucs::detectors {

namespace {

// Ratio denominators are floored so boundary scores stay finite and
// serializable; anything beyond 1e12 is "essentially certain" anyway.
constexpr double kMinRatioDenominator = 1e-12;

struct NamePair {
  Method method;
  std::string_view name;
};

constexpr NamePair kMethodNames[] = {
    {Method::random, "random"},   {Method::maxp, "maxp"},
    {Method::gini, "gini"},       {Method::entropy, "entropy"},
    {Method::margin, "margin"},   {Method::mcp, "mcp"},
    {Method::nns, "nns"},         {Method::ats, "ats"},
    {Method::testrank_lite, "testrank_lite"}, {Method::bald, "bald"},
};

// Ranking for a per-record scalar score: sort by score under the given
// orientation, ties toward the lower item id.
Ranking rank_by_score(std::string method, ScoreOrientation orientation,
                      std::span<const PredictionRecord> records,
                      double (*score)(const ProbVector&)) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> scores(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) scores[i] = score(records[i].probs);
  const bool ascending = orientation == ScoreOrientation::score_ascending;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return ascending ? scores[a] < scores[b] : scores[a] > scores[b];
    return records[a].item_id < records[b].item_id;
  });
  Ranking r;
  r.method = std::move(method);
  r.orientation = orientation;
  r.tie_break = "score_then_id";
  r.ids.reserve(records.size());
  r.scores.reserve(records.size());
  for (std::size_t i : order) {
    r.ids.push_back(records[i].item_id);
    r.scores.push_back(scores[i]);
  }
  return r;
}

void require_unique_ids(std::span<const PredictionRecord> records) {
  std::unordered_map<std::string_view, int> seen;
  for (const PredictionRecord& r : records)
    if (++seen[r.item_id] > 1) throw DataError("duplicate item id '" + r.item_id + "'");
}

const std::vector<double>& embedding_for(const EmbeddingMap& embeddings,
                                         const std::string& item_id) {
  auto it = embeddings.find(item_id);
  if (it == embeddings.end())
    throw DataError("missing embedding for item '" + item_id + "'");
  return it->second;
}

// Indices of the k most similar records (cosine), excluding `self`;
// similarity ties break toward the lower item id.
std::vector<std::size_t> nearest_neighbors(std::span<const PredictionRecord> records,
                                           const std::vector<std::vector<double>>& vecs,
                                           std::size_t self, int k) {
  std::vector<std::size_t> order;
  order.reserve(records.size() - 1);
  for (std::size_t i = 0; i < records.size(); ++i)
    if (i != self) order.push_back(i);
  std::vector<double> sim(records.size(), 0.0);
  for (std::size_t i : order) sim[i] = cosine_similarity(vecs[self], vecs[i]);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (sim[a] != sim[b]) return sim[a] > sim[b];
    return records[a].item_id < records[b].item_id;
  });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(k)));
  return order;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::string_view method_name(Method m) {
  for (const NamePair& p : kMethodNames)
    if (p.method == m) return p.name;
  return "unknown";
}

std::optional<Method> method_from_name(std::string_view name) {
  for (const NamePair& p : kMethodNames)
    if (p.name == name) return p.method;
  return std::nullopt;
}

std::string method_display_name(Method m, bool smoothed) {
  static const std::unordered_map<Method, std::string> kDisplay = {
      {Method::random, "Random"},   {Method::maxp, "MaxP"},
      {Method::gini, "Gini"},       {Method::entropy, "Entropy"},
      {Method::margin, "Margin"},   {Method::mcp, "MCP"},
      {Method::nns, "NNS"},         {Method::ats, "ATS"},
      {Method::testrank_lite, "TestRank"}, {Method::bald, "BALD"},
  };
  std::string name = kDisplay.at(m);
  if (smoothed && m != Method::bald) name += "-M";
  return name;
}

double score_gini(const ProbVector& p) {
  double sum_sq = 0.0;
  for (double v : p.probs()) sum_sq += v * v;
  return 1.0 - sum_sq;
}

double score_entropy(const ProbVector& p) {
  double h = 0.0;
  for (double v : p.probs())
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double score_maxp(const ProbVector& p) { return p.max_prob(); }

double score_margin(const ProbVector& p) {
  const std::vector<int> order = p.classes_by_prob();
  return p.probs()[static_cast<std::size_t>(order[0])] -
         p.probs()[static_cast<std::size_t>(order[1])];
}

double score_bald(const MutantPredictionSet& m) {
  if (m.mutant_labels.empty()) throw DataError("BALD needs at least one mutant prediction");
  std::map<int, std::size_t> counts;
  for (int label : m.mutant_labels) counts[label] += 1;
  std::size_t mode_count = 0;
  for (const auto& [label, count] : counts)
    if (count > mode_count) mode_count = count;  // map order = lowest label wins ties
  return 1.0 - static_cast<double>(mode_count) / static_cast<double>(m.mutant_labels.size());
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("embedding dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

Ranking select_random(std::span<const std::string> ids, std::size_t budget_count,
                      std::uint64_t seed) {
  if (budget_count > ids.size())
    throw ConfigError("budget exceeds the number of items");
  std::vector<std::string> shuffled(ids.begin(), ids.end());
  Rng rng(seed);
  rng.shuffle(shuffled);
  Ranking r;
  r.method = std::string(method_name(Method::random));
  r.orientation = ScoreOrientation::positional;
  r.tie_break = "seeded_shuffle";
  r.ids = std::move(shuffled);
  r.scores.resize(r.ids.size());
  for (std::size_t i = 0; i < r.scores.size(); ++i)
    r.scores[i] = static_cast<double>(r.ids.size() - i);
  return r;
}

Ranking select_mcp(std::span<const PredictionRecord> records, std::size_t budget_count) {
  (void)budget_count;  // the full consumption order is emitted; selections are prefixes
  require_unique_ids(records);
  struct Entry {
    std::size_t index;
    double ratio;
  };
  // Boundary clusters keyed by (top-1 class, top-2 class); map order gives
  // the deterministic round-robin sequence.
  std::map<std::pair<int, int>, std::vector<Entry>> clusters;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ProbVector& p = records[i].probs;
    if (p.num_classes() < 2) throw DataError("MCP needs at least 2 classes");
    const std::vector<int> order = p.classes_by_prob();
    const double p1 = p.probs()[static_cast<std::size_t>(order[0])];
    const double p2 = p.probs()[static_cast<std::size_t>(order[1])];
    const double ratio = p1 / std::max(p2, kMinRatioDenominator);
    clusters[{order[0], order[1]}].push_back({i, ratio});
  }
  for (auto& [key, entries] : clusters) {
    std::stable_sort(entries.begin(), entries.end(), [&](const Entry& a, const Entry& b) {
      if (a.ratio != b.ratio) return a.ratio < b.ratio;
      return records[a.index].item_id < records[b.index].item_id;
    });
  }
  Ranking r;
  r.method = std::string(method_name(Method::mcp));
  r.orientation = ScoreOrientation::positional;
  r.tie_break = "cluster_roundrobin_ratio_then_id";
  std::size_t cursor_total = 0;
  std::vector<std::size_t> cursors(clusters.size(), 0);
  while (cursor_total < records.size()) {
    std::size_t ci = 0;
    for (auto& [key, entries] : clusters) {
      if (cursors[ci] < entries.size()) {
        const Entry& e = entries[cursors[ci]++];
        r.ids.push_back(records[e.index].item_id);
        r.scores.push_back(e.ratio);
        ++cursor_total;
      }
      ++ci;
    }
  }
  return r;
}

namespace detail {

Ranking select_ats_seeded(std::span<const PredictionRecord> records, std::size_t budget_count,
                          std::span<const std::string> seed_ids) {
  (void)budget_count;
  require_unique_ids(records);
  if (records.empty()) throw DataError("ATS needs at least one record");
  if (records.front().probs.num_classes() < 3)
    throw ConfigError("ATS requires >= 3 classes");

  struct Point {
    std::array<int, 3> pattern;
    double x, y;
    double maxp;
  };
  std::vector<Point> pts(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ProbVector& p = records[i].probs;
    if (p.num_classes() < 3) throw ConfigError("ATS requires >= 3 classes");
    const std::vector<int> order = p.classes_by_prob();
    std::array<int, 3> pat{order[0], order[1], order[2]};
    std::sort(pat.begin(), pat.end());
    const double p1 = p.probs()[static_cast<std::size_t>(order[0])];
    const double p2 = p.probs()[static_cast<std::size_t>(order[1])];
    const double p3 = p.probs()[static_cast<std::size_t>(order[2])];
    pts[i] = {pat, p2 / std::max(p1, kMinRatioDenominator),
              p3 / std::max(p1, kMinRatioDenominator), p.max_prob()};
  }

  std::unordered_map<std::string_view, std::size_t> index_of;
  for (std::size_t i = 0; i < records.size(); ++i) index_of[records[i].item_id] = i;

  std::vector<bool> selected(records.size(), false);
  std::map<std::array<int, 3>, std::vector<std::size_t>> selected_by_pattern;
  Ranking r;
  r.method = std::string(method_name(Method::ats));
  r.orientation = ScoreOrientation::positional;
  r.tie_break = "gain_then_maxp_then_id";

  auto take = [&](std::size_t i, double gain) {
    selected[i] = true;
    selected_by_pattern[pts[i].pattern].push_back(i);
    r.ids.push_back(records[i].item_id);
    r.scores.push_back(gain);
  };

  const double kUnseenGain = std::numeric_limits<double>::infinity();
  for (const std::string& id : seed_ids) {
    auto it = index_of.find(id);
    if (it == index_of.end()) throw DataError("seed id '" + id + "' is not in the record set");
    take(it->second, kUnseenGain);
  }

  while (r.ids.size() < records.size()) {
    std::size_t best = records.size();
    double best_gain = -1.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (selected[i]) continue;
      double gain = kUnseenGain;
      auto it = selected_by_pattern.find(pts[i].pattern);
      if (it != selected_by_pattern.end()) {
        gain = std::numeric_limits<double>::infinity();
        for (std::size_t j : it->second) {
          const double dx = pts[i].x - pts[j].x;
          const double dy = pts[i].y - pts[j].y;
          gain = std::min(gain, std::sqrt(dx * dx + dy * dy));
        }
      }
      bool better = false;
      if (best == records.size()) {
        better = true;
      } else if (gain != best_gain) {
        better = gain > best_gain;
      } else if (pts[i].maxp != pts[best].maxp) {
        better = pts[i].maxp < pts[best].maxp;
      } else {
        better = records[i].item_id < records[best].item_id;
      }
      if (better) {
        best = i;
        best_gain = gain;
      }
    }
    take(best, best_gain);
  }
  // Finite sentinel for serialization: unseen-pattern picks carry the
  // largest representable gain instead of infinity.
  for (double& s : r.scores)
    if (std::isinf(s)) s = 1e9;
  return r;
}

}  // namespace detail

Ranking select_ats(std::span<const PredictionRecord> records, std::size_t budget_count) {
  return detail::select_ats_seeded(records, budget_count, {});
}

std::vector<PredictionRecord> smooth_nns(std::span<const PredictionRecord> records,
                                         const EmbeddingMap& embeddings, int k) {
  if (k < 1) throw ConfigError("NNS neighbor count k must be >= 1");
  if (static_cast<std::size_t>(k) >= records.size())
    throw ConfigError("NNS neighbor count k must be smaller than the record count");
  require_unique_ids(records);
  std::vector<std::vector<double>> vecs;
  vecs.reserve(records.size());
  for (const PredictionRecord& r : records) vecs.push_back(embedding_for(embeddings, r.item_id));

  std::vector<PredictionRecord> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::vector<ProbVector> group;
    group.reserve(static_cast<std::size_t>(k) + 1);
    group.push_back(records[i].probs);
    for (std::size_t j : nearest_neighbors(records, vecs, i, k))
      group.push_back(records[j].probs);
    PredictionRecord smoothed =
        PredictionRecord::make(records[i].item_id, mean_prob_vector(group),
                               records[i].source, std::nullopt);
    out.push_back(std::move(smoothed));
  }
  return out;
}

Ranking rank_nns(std::span<const PredictionRecord> records, const EmbeddingMap& embeddings,
                 int k) {
  const std::vector<PredictionRecord> smoothed = smooth_nns(records, embeddings, k);
  Ranking r = rank_by_score(std::string(method_name(Method::nns)),
                            ScoreOrientation::score_descending, smoothed, &score_gini);
  return r;
}

Ranking rank_testrank_lite(std::span<const PredictionRecord> train_labeled,
                           std::span<const PredictionRecord> test_records,
                           const EmbeddingMap& embeddings, const DetectorConfig& cfg) {
  if (train_labeled.empty()) throw ConfigError("testrank_lite needs a non-empty train split");
  for (const PredictionRecord& r : train_labeled)
    if (!r.is_fault.has_value())
      throw DataError("train record '" + r.item_id + "' has no fault flag");
  if (cfg.testrank_epochs < 0 || cfg.testrank_learning_rate < 0.0)
    throw ConfigError("testrank epochs and learning rate must be non-negative");

  const std::size_t classes = train_labeled.front().probs.num_classes();
  for (const PredictionRecord& r : test_records)
    if (r.probs.num_classes() != classes)
      throw DataError("class count mismatch between train and test records");

  std::vector<std::vector<double>> train_vecs, test_vecs;
  train_vecs.reserve(train_labeled.size());
  for (const PredictionRecord& r : train_labeled)
    train_vecs.push_back(embedding_for(embeddings, r.item_id));
  test_vecs.reserve(test_records.size());
  for (const PredictionRecord& r : test_records)
    test_vecs.push_back(embedding_for(embeddings, r.item_id));

  // Contextual scalar: similarity-weighted mean fault rate over the k
  // nearest labeled neighbors. Negative similarities are clipped to zero;
  // with no positive weight the plain mean is used.
  auto contextual = [&](std::span<const double> vec, std::size_t exclude_train_index) {
    struct Neighbor {
      std::size_t index;
      double sim;
    };
    std::vector<Neighbor> neighbors;
    neighbors.reserve(train_labeled.size());
    for (std::size_t t = 0; t < train_labeled.size(); ++t) {
      if (t == exclude_train_index) continue;
      neighbors.push_back({t, cosine_similarity(vec, train_vecs[t])});
    }
    if (neighbors.empty()) return 0.0;
    std::stable_sort(neighbors.begin(), neighbors.end(), [&](const Neighbor& a, const Neighbor& b) {
      if (a.sim != b.sim) return a.sim > b.sim;
      return train_labeled[a.index].item_id < train_labeled[b.index].item_id;
    });
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.testrank_k),
                                                neighbors.size());
    double weight_sum = 0.0, weighted = 0.0, plain = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double fault = *train_labeled[neighbors[i].index].is_fault ? 1.0 : 0.0;
      const double w = std::max(neighbors[i].sim, 0.0);
      weight_sum += w;
      weighted += w * fault;
      plain += fault;
    }
    if (weight_sum <= 1e-12) return plain / static_cast<double>(k);
    return weighted / weight_sum;
  };

  const std::size_t dim = classes + 1;  // probs + contextual scalar
  auto features = [&](const PredictionRecord& r, std::span<const double> vec,
                      std::size_t exclude_train_index) {
    std::vector<double> f;
    f.reserve(dim);
    f.insert(f.end(), r.probs.probs().begin(), r.probs.probs().end());
    f.push_back(contextual(vec, exclude_train_index));
    return f;
  };

  std::vector<std::vector<double>> train_x;
  std::vector<double> train_y;
  train_x.reserve(train_labeled.size());
  for (std::size_t t = 0; t < train_labeled.size(); ++t) {
    train_x.push_back(features(train_labeled[t], train_vecs[t], t));
    train_y.push_back(*train_labeled[t].is_fault ? 1.0 : 0.0);
  }

  // Weight layout: [class probs..., contextual, bias]. The contextual
  // feature starts at weight 1 so an untrained model already ranks by it.
  std::vector<double> w(dim + 1, 0.0);
  w[dim - 1] = 1.0;
  const double n = static_cast<double>(train_x.size());
  for (int epoch = 0; epoch < cfg.testrank_epochs; ++epoch) {
    std::vector<double> grad(dim + 1, 0.0);
    for (std::size_t t = 0; t < train_x.size(); ++t) {
      double z = w[dim];  // bias
      for (std::size_t d = 0; d < dim; ++d) z += w[d] * train_x[t][d];
      const double err = sigmoid(z) - train_y[t];
      for (std::size_t d = 0; d < dim; ++d) grad[d] += err * train_x[t][d];
      grad[dim] += err;
    }
    for (std::size_t d = 0; d <= dim; ++d) w[d] -= cfg.testrank_learning_rate * grad[d] / n;
  }

  std::vector<std::size_t> order(test_records.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> scores(test_records.size());
  const std::size_t kNoExclusion = train_labeled.size() + 1;
  for (std::size_t i = 0; i < test_records.size(); ++i) {
    const std::vector<double> f = features(test_records[i], test_vecs[i], kNoExclusion);
    double z = w[dim];
    for (std::size_t d = 0; d < dim; ++d) z += w[d] * f[d];
    scores[i] = sigmoid(z);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return test_records[a].item_id < test_records[b].item_id;
  });

  Ranking r;
  r.method = std::string(method_name(Method::testrank_lite));
  r.orientation = ScoreOrientation::score_descending;
  r.tie_break = "score_then_id";
  for (std::size_t i : order) {
    r.ids.push_back(test_records[i].item_id);
    r.scores.push_back(scores[i]);
  }
  return r;
}

Ranking run_detector(const DetectorConfig& cfg, const DetectorInputs& in) {
  require_unique_ids(in.records);
  switch (cfg.method) {
    case Method::random: {
      std::vector<std::string> ids;
      ids.reserve(in.records.size());
      for (const PredictionRecord& r : in.records) ids.push_back(r.item_id);
      return select_random(ids, ids.size(), cfg.seed);
    }
    case Method::maxp:
      return rank_by_score("maxp", ScoreOrientation::score_ascending, in.records, &score_maxp);
    case Method::gini:
      return rank_by_score("gini", ScoreOrientation::score_descending, in.records, &score_gini);
    case Method::entropy:
      // Faults are maximal-uncertainty inputs: highest entropy ranks first,
      // consistent with the gini/margin orientation and the two-class
      // equivalence of all four uncertainty scores.
      return rank_by_score("entropy", ScoreOrientation::score_descending, in.records,
                           &score_entropy);
    case Method::margin:
      return rank_by_score("margin", ScoreOrientation::score_ascending, in.records,
                           &score_margin);
    case Method::mcp:
      return select_mcp(in.records, in.records.size());
    case Method::ats:
      return select_ats(in.records, in.records.size());
    case Method::nns:
      if (in.embeddings == nullptr) throw ConfigError("NNS requires embeddings");
      return rank_nns(in.records, *in.embeddings, cfg.nns_k);
    case Method::testrank_lite:
      if (in.embeddings == nullptr) throw ConfigError("testrank_lite requires embeddings");
      return rank_testrank_lite(in.train_records, in.records, *in.embeddings, cfg);
    case Method::bald: {
      if (in.mutant_sets == nullptr) throw ConfigError("BALD requires mutant predictions");
      std::unordered_map<std::string_view, const MutantPredictionSet*> by_id;
      for (const MutantPredictionSet& m : *in.mutant_sets) by_id[m.item_id] = &m;
      std::vector<std::size_t> order(in.records.size());
      std::iota(order.begin(), order.end(), 0);
      std::vector<double> scores(in.records.size());
      for (std::size_t i = 0; i < in.records.size(); ++i) {
        auto it = by_id.find(in.records[i].item_id);
        if (it == by_id.end())
          throw ConfigError("BALD requires mutant predictions for item '" +
                            in.records[i].item_id + "'");
        scores[i] = score_bald(*it->second);
      }
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return in.records[a].item_id < in.records[b].item_id;
      });
      Ranking r;
      r.method = std::string(method_name(Method::bald));
      r.orientation = ScoreOrientation::score_descending;
      r.tie_break = "score_then_id";
      for (std::size_t i : order) {
        r.ids.push_back(in.records[i].item_id);
        r.scores.push_back(scores[i]);
      }
      return r;
    }
  }
  throw ConfigError("unknown detection method");
}

}  // namespace mucs::detectors
