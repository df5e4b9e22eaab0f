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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "mucs/detectors.hpp"
#include "mucs/errors.hpp"
#include "mucs/rng.hpp"
#include "mucs/types.hpp"

using namespace mucs;
using namespace mucs::detectors;

namespace {

PredictionRecord rec(std::string id, std::vector<double> probs) {
  return PredictionRecord::make(std::move(id), ProbVector(std::move(probs)),
                                RecordSource::original, std::nullopt);
}

PredictionRecord labeled_rec(std::string id, std::vector<double> probs, int label) {
  return PredictionRecord::make(std::move(id), ProbVector(std::move(probs)),
                                RecordSource::original, label);
}

std::vector<double> random_probs(Rng& rng, std::size_t classes) {
  std::vector<double> raw(classes);
  double sum = 0.0;
  for (double& v : raw) {
    v = rng.unit() + 1e-6;
    sum += v;
  }
  for (double& v : raw) v /= sum;
  return raw;
}

std::vector<std::string> sorted_ids(const Ranking& r) {
  std::vector<std::string> ids = r.ids;
  std::sort(ids.begin(), ids.end());
  return ids;
}

DetectorInputs records_only(std::span<const PredictionRecord> records) {
  DetectorInputs in;
  in.records = records;
  return in;
}

}  // namespace

TEST_CASE("gini closed forms") {
  CHECK(score_gini(ProbVector({1.0, 0.0})) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(score_gini(ProbVector({0.5, 0.5})) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(score_gini(ProbVector({0.7, 0.2, 0.1})) == doctest::Approx(0.46).epsilon(1e-12));
}

TEST_CASE("entropy closed forms") {
  CHECK(score_entropy(ProbVector({1.0, 0.0})) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(score_entropy(ProbVector({0.5, 0.5})) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(score_entropy(ProbVector({0.2, 0.2, 0.2, 0.2, 0.2})) ==
        doctest::Approx(std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("maxp and margin closed forms") {
  const ProbVector p({0.7, 0.2, 0.1});
  CHECK(score_maxp(p) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(score_margin(p) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(score_margin(ProbVector({0.5, 0.5})) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(score_maxp(ProbVector({1.0, 0.0})) == 1.0);
}

TEST_CASE("maxp ranks the certain prediction least suspicious") {
  std::vector<PredictionRecord> records{rec("sure", {1.0, 0.0}), rec("unsure", {0.55, 0.45})};
  DetectorConfig cfg;
  cfg.method = Method::maxp;
  const Ranking r = run_detector(cfg, records_only(records));
  CHECK(r.ids == std::vector<std::string>{"unsure", "sure"});
  CHECK(r.orientation == ScoreOrientation::score_ascending);
}

TEST_CASE("scalar scores are invariant under class permutation") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> probs = random_probs(rng, 4);
    std::vector<double> permuted = {probs[2], probs[0], probs[3], probs[1]};
    const ProbVector a(probs), b(permuted);
    CHECK(score_gini(a) == doctest::Approx(score_gini(b)).epsilon(1e-12));
    CHECK(score_entropy(a) == doctest::Approx(score_entropy(b)).epsilon(1e-12));
    CHECK(score_maxp(a) == doctest::Approx(score_maxp(b)).epsilon(1e-12));
    CHECK(score_margin(a) == doctest::Approx(score_margin(b)).epsilon(1e-12));
  }
}

TEST_CASE("binary-class equivalence of the four uncertainty rankings") {
  Rng rng(17);
  std::vector<PredictionRecord> records;
  for (int i = 0; i < 200; ++i) {
    const double p = rng.unit();
    records.push_back(rec("r" + std::to_string(i), {p, 1.0 - p}));
  }
  std::vector<std::vector<std::string>> orders;
  for (Method m : {Method::gini, Method::entropy, Method::margin, Method::maxp}) {
    DetectorConfig cfg;
    cfg.method = m;
    orders.push_back(run_detector(cfg, records_only(records)).ids);
  }
  CHECK(orders[0] == orders[1]);
  CHECK(orders[0] == orders[2]);
  CHECK(orders[0] == orders[3]);
}

TEST_CASE("mcp round-robin hand case") {
  // Cluster (0,1): r1 ratio 1.1, r2 ratio 3.0. Cluster (1,2): r3 ratio 1.5.
  std::vector<PredictionRecord> records{
      rec("r1", {0.44, 0.40, 0.16}),
      rec("r2", {0.60, 0.20, 0.20}),
      rec("r3", {0.25, 0.45, 0.30}),
  };
  const Ranking r = select_mcp(records, 2);
  REQUIRE(r.ids.size() == 3);
  CHECK(r.ids[0] == "r1");
  CHECK(r.ids[1] == "r3");
  CHECK(r.ids[2] == "r2");
  CHECK(r.scores[0] == doctest::Approx(1.1).epsilon(1e-9));
}

TEST_CASE("mcp single record and single cluster") {
  std::vector<PredictionRecord> one{rec("only", {0.9, 0.1})};
  CHECK(select_mcp(one, 1).ids == std::vector<std::string>{"only"});

  // All in cluster (0,1): pure ascending-ratio order.
  std::vector<PredictionRecord> records{
      rec("a", {0.8, 0.1, 0.1}),   // ratio 8
      rec("b", {0.50, 0.45, 0.05}),  // ratio 1.11
      rec("c", {0.6, 0.3, 0.1}),   // ratio 2
  };
  CHECK(select_mcp(records, 3).ids == std::vector<std::string>{"b", "c", "a"});
}

TEST_CASE("mcp matches a brute-force round-robin reference on small instances") {
  Rng rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<PredictionRecord> records;
    const std::size_t n = 1 + rng.below(20);
    for (std::size_t i = 0; i < n; ++i)
      records.push_back(rec("i" + std::to_string(i), random_probs(rng, 2 + rng.below(4))));

    // Independent reference: explicit per-cluster queues consumed cyclically.
    struct Item {
      std::string id;
      double ratio;
    };
    std::map<std::pair<int, int>, std::vector<Item>> queues;
    for (const PredictionRecord& r : records) {
      const std::vector<int> order = r.probs.classes_by_prob();
      const double p1 = r.probs.probs()[static_cast<std::size_t>(order[0])];
      const double p2 = r.probs.probs()[static_cast<std::size_t>(order[1])];
      queues[{order[0], order[1]}].push_back({r.item_id, p1 / std::max(p2, 1e-12)});
    }
    for (auto& [key, q] : queues)
      std::sort(q.begin(), q.end(), [](const Item& a, const Item& b) {
        if (a.ratio != b.ratio) return a.ratio < b.ratio;
        return a.id < b.id;
      });
    std::vector<std::string> expected;
    std::size_t taken = 1;
    while (taken > 0) {
      taken = 0;
      for (auto& [key, q] : queues) {
        if (!q.empty()) {
          expected.push_back(q.front().id);
          q.erase(q.begin());
          ++taken;
        }
      }
      if (expected.size() == records.size()) break;
    }

    CHECK(select_mcp(records, records.size()).ids == expected);
  }
}

TEST_CASE("ats rejects 2-class tasks") {
  std::vector<PredictionRecord> records{rec("a", {0.6, 0.4}), rec("b", {0.7, 0.3})};
  CHECK_THROWS_AS(select_ats(records, 1), ConfigError);
}

TEST_CASE("ats: one shared pattern and point degenerates to maxp ascending") {
  // Same pattern {0,1,2} and point (0.5, 0.5); maxp 0.4 < 0.45 < 0.5.
  std::vector<PredictionRecord> records{
      rec("z", {0.40, 0.20, 0.20, 0.20}),
      rec("y", {0.45, 0.225, 0.225, 0.10}),
      rec("x", {0.50, 0.25, 0.25, 0.0}),
  };
  const Ranking r = select_ats(records, 3);
  CHECK(r.ids == std::vector<std::string>{"z", "y", "x"});
}

TEST_CASE("ats: unseen patterns are selected first") {
  std::vector<PredictionRecord> records{
      rec("a", {0.5, 0.3, 0.15, 0.05}),   // pattern {0,1,2}
      rec("b", {0.05, 0.15, 0.3, 0.5}),   // pattern {1,2,3}
  };
  const Ranking r = select_ats(records, 2);
  CHECK(sorted_ids(r) == std::vector<std::string>{"a", "b"});
  CHECK(r.ids.size() == 2);
}

TEST_CASE("ats greedy continuation after a seeded first pick") {
  // One pattern; points A=(0.1,0.1), B=(0.9,0.9), C=(0.5,0.5). With A
  // seeded, brute-force gains give B (dist 1.13 to A) before C (0.57).
  std::vector<PredictionRecord> records{
      rec("A", {0.80, 0.08, 0.08, 0.04}),
      rec("B", {0.34, 0.306, 0.306, 0.048}),
      rec("C", {0.45, 0.225, 0.225, 0.10}),
  };
  const std::vector<std::string> seed{"A"};
  const Ranking r = detail::select_ats_seeded(records, 3, seed);
  CHECK(r.ids == std::vector<std::string>{"A", "B", "C"});

  // Brute-force the two candidate gains for the second pick.
  const double gain_b = std::hypot(0.9 - 0.1, 0.9 - 0.1);
  const double gain_c = std::hypot(0.5 - 0.1, 0.5 - 0.1);
  CHECK(gain_b > gain_c);
  CHECK(r.scores[1] == doctest::Approx(gain_b).epsilon(1e-9));
}

TEST_CASE("nns smoothing hand cases") {
  EmbeddingMap embeddings{{"a", {1.0, 0.0}}, {"b", {1.0, 0.0}}};
  std::vector<PredictionRecord> records{rec("a", {1.0, 0.0}), rec("b", {0.0, 1.0})};
  const std::vector<PredictionRecord> smoothed = smooth_nns(records, embeddings, 1);
  CHECK(smoothed[0].probs.probs() == std::vector<double>{0.5, 0.5});
  CHECK(smoothed[1].probs.probs() == std::vector<double>{0.5, 0.5});
}

TEST_CASE("nns smoothing with an identical neighbor is the identity") {
  EmbeddingMap embeddings{{"a", {1.0, 0.0}}, {"b", {1.0, 0.0}}};
  std::vector<PredictionRecord> records{rec("a", {0.7, 0.3}), rec("b", {0.7, 0.3})};
  const std::vector<PredictionRecord> smoothed = smooth_nns(records, embeddings, 1);
  CHECK(smoothed[0].probs.probs() == records[0].probs.probs());
  CHECK(smoothed[1].probs.probs() == records[1].probs.probs());
}

TEST_CASE("nns with k = n-1 smooths every record to the global mean") {
  EmbeddingMap embeddings{{"a", {1.0, 0.0}}, {"b", {0.9, 0.1}}, {"c", {0.8, 0.2}}};
  std::vector<PredictionRecord> records{rec("a", {0.8, 0.2}), rec("b", {0.5, 0.5}),
                                        rec("c", {0.2, 0.8})};
  const std::vector<PredictionRecord> smoothed = smooth_nns(records, embeddings, 2);
  const double m0 = (0.8 + 0.5 + 0.2) / 3.0;
  const double m1 = (0.2 + 0.5 + 0.8) / 3.0;
  for (const PredictionRecord& r : smoothed) {
    CHECK(r.probs.probs()[0] == doctest::Approx(m0 / (m0 + m1)).epsilon(1e-12));
    CHECK(r.probs.probs()[1] == doctest::Approx(m1 / (m0 + m1)).epsilon(1e-12));
  }
}

TEST_CASE("nns errors") {
  EmbeddingMap embeddings{{"a", {1.0, 0.0}}};
  std::vector<PredictionRecord> records{rec("a", {0.6, 0.4}), rec("missing", {0.6, 0.4})};
  CHECK_THROWS_WITH_AS(smooth_nns(records, embeddings, 1),
                       "missing embedding for item 'missing'", DataError);
  CHECK_THROWS_AS(smooth_nns(records, embeddings, 0), ConfigError);
  CHECK_THROWS_AS(smooth_nns(records, embeddings, 2), ConfigError);  // k >= n
}

TEST_CASE("nns output vectors are valid prob vectors") {
  Rng rng(41);
  EmbeddingMap embeddings;
  std::vector<PredictionRecord> records;
  for (int i = 0; i < 12; ++i) {
    const std::string id = "r" + std::to_string(i);
    embeddings[id] = {rng.unit(), rng.unit(), rng.unit()};
    records.push_back(rec(id, random_probs(rng, 3)));
  }
  for (const PredictionRecord& r : smooth_nns(records, embeddings, 4)) {
    double sum = 0.0;
    for (double v : r.probs.probs()) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("bald closed forms") {
  MutantPredictionSet unanimous{"u", {}, {1, 1, 1, 1, 1, 1, 1, 1, 1, 1}};
  CHECK(score_bald(unanimous) == doctest::Approx(0.0).epsilon(1e-12));
  MutantPredictionSet split{"s", {}, {0, 0, 0, 1, 1, 1, 1, 2, 2, 2}};
  CHECK(score_bald(split) == doctest::Approx(0.6).epsilon(1e-12));
  MutantPredictionSet single{"one", {}, {4}};
  CHECK(score_bald(single) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("testrank-lite ranks items inside the fault cluster first") {
  // Train faults cluster around (1, 0); clean items around (0, 1).
  EmbeddingMap embeddings;
  std::vector<PredictionRecord> train;
  for (int i = 0; i < 5; ++i) {
    const std::string fid = "fault" + std::to_string(i);
    embeddings[fid] = {1.0, 0.02 * i};
    train.push_back(labeled_rec(fid, {0.6, 0.4}, 1));  // predicted 0, label 1 -> fault
    const std::string cid = "clean" + std::to_string(i);
    embeddings[cid] = {0.02 * i, 1.0};
    train.push_back(labeled_rec(cid, {0.6, 0.4}, 0));
  }
  embeddings["inside"] = {1.0, 0.01};
  embeddings["outside"] = {0.01, 1.0};
  std::vector<PredictionRecord> test{rec("inside", {0.6, 0.4}), rec("outside", {0.6, 0.4})};

  DetectorConfig cfg;
  cfg.method = Method::testrank_lite;
  cfg.testrank_k = 3;

  SUBCASE("zero learning rate ranks by the contextual feature alone") {
    cfg.testrank_learning_rate = 0.0;
    const Ranking r = rank_testrank_lite(train, test, embeddings, cfg);
    CHECK(r.ids == std::vector<std::string>{"inside", "outside"});

    // Brute-force contextual features: the 3 nearest train neighbors of
    // "inside" are all faults, those of "outside" all clean.
    CHECK(r.scores[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-9));
    CHECK(r.scores[1] == doctest::Approx(0.5).epsilon(1e-9));
  }

  SUBCASE("trained model keeps the cluster ordering") {
    const Ranking r = rank_testrank_lite(train, test, embeddings, cfg);
    CHECK(r.ids == std::vector<std::string>{"inside", "outside"});
  }
}

TEST_CASE("testrank-lite single test item and error paths") {
  EmbeddingMap embeddings{{"t", {1.0, 0.0}}, {"x", {0.5, 0.5}}};
  std::vector<PredictionRecord> train{labeled_rec("t", {0.9, 0.1}, 1)};
  std::vector<PredictionRecord> test{rec("x", {0.6, 0.4})};
  DetectorConfig cfg;
  cfg.method = Method::testrank_lite;
  CHECK(rank_testrank_lite(train, test, embeddings, cfg).ids == std::vector<std::string>{"x"});
  CHECK_THROWS_AS(rank_testrank_lite({}, test, embeddings, cfg), ConfigError);

  std::vector<PredictionRecord> bad_dim{labeled_rec("t", {0.5, 0.3, 0.2}, 0)};
  CHECK_THROWS_AS(rank_testrank_lite(bad_dim, test, embeddings, cfg), DataError);
}

TEST_CASE("random selection is deterministic and uniform-ish") {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("i" + std::to_string(i));

  const Ranking a = select_random(ids, 5, 99);
  const Ranking b = select_random(ids, 5, 99);
  CHECK(a.ids == b.ids);
  CHECK(select_random(ids, 10, 1).ids != ids);  // seed 1 shuffles this set
  CHECK(sorted_ids(a) == ids);

  std::map<std::string, int> included;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    const Ranking r = select_random(ids, 5, static_cast<std::uint64_t>(t));
    for (std::size_t i = 0; i < 5; ++i) included[r.ids[i]] += 1;
  }
  for (const std::string& id : ids) {
    const double freq = static_cast<double>(included[id]) / trials;
    CHECK(freq > 0.45);
    CHECK(freq < 0.55);
  }
}

TEST_CASE("every detector returns a permutation of its input ids") {
  Rng rng(67);
  EmbeddingMap embeddings;
  std::vector<PredictionRecord> records;
  std::vector<MutantPredictionSet> mutant_sets;
  std::vector<std::string> ids;
  for (int i = 0; i < 30; ++i) {
    const std::string id = "p" + std::to_string(i);
    ids.push_back(id);
    embeddings[id] = {rng.unit(), rng.unit(), rng.unit(), rng.unit()};
    records.push_back(labeled_rec(id, random_probs(rng, 4), static_cast<int>(rng.below(4))));
    MutantPredictionSet set;
    set.item_id = id;
    for (int t = 0; t < 5; ++t) {
      ProbVector v(random_probs(rng, 4));
      set.mutant_labels.push_back(v.argmax());
      set.mutant_probs.push_back(std::move(v));
    }
    mutant_sets.push_back(std::move(set));
  }
  std::vector<PredictionRecord> train;
  for (int i = 0; i < 8; ++i) {
    const std::string id = "train" + std::to_string(i);
    embeddings[id] = {rng.unit(), rng.unit(), rng.unit(), rng.unit()};
    train.push_back(labeled_rec(id, random_probs(rng, 4), static_cast<int>(rng.below(4))));
  }

  DetectorInputs inputs;
  inputs.records = records;
  inputs.embeddings = &embeddings;
  inputs.train_records = train;
  inputs.mutant_sets = &mutant_sets;

  std::vector<std::string> expected = ids;
  std::sort(expected.begin(), expected.end());
  for (Method m : {Method::random, Method::maxp, Method::gini, Method::entropy, Method::margin,
                   Method::mcp, Method::nns, Method::ats, Method::testrank_lite, Method::bald}) {
    DetectorConfig cfg;
    cfg.method = m;
    cfg.seed = 5;
    const Ranking r = run_detector(cfg, inputs);
    CHECK(sorted_ids(r) == expected);
    CHECK(r.scores.size() == r.ids.size());

    const Ranking again = run_detector(cfg, inputs);
    CHECK(r == again);
  }
}

TEST_CASE("score-oriented rankings have monotone scores") {
  Rng rng(71);
  std::vector<PredictionRecord> records;
  for (int i = 0; i < 40; ++i)
    records.push_back(rec("s" + std::to_string(i), random_probs(rng, 5)));
  for (Method m : {Method::maxp, Method::gini, Method::entropy, Method::margin}) {
    DetectorConfig cfg;
    cfg.method = m;
    const Ranking r = run_detector(cfg, records_only(records));
    for (std::size_t i = 1; i < r.scores.size(); ++i) {
      if (r.orientation == ScoreOrientation::score_ascending)
        CHECK(r.scores[i] >= r.scores[i - 1]);
      else
        CHECK(r.scores[i] <= r.scores[i - 1]);
    }
  }
}

TEST_CASE("run_detector validates prerequisites") {
  std::vector<PredictionRecord> binary{rec("a", {0.6, 0.4}), rec("b", {0.5, 0.5})};
  DetectorConfig cfg;
  cfg.method = Method::ats;
  CHECK_THROWS_AS(run_detector(cfg, records_only(binary)), ConfigError);
  cfg.method = Method::nns;
  CHECK_THROWS_AS(run_detector(cfg, records_only(binary)), ConfigError);  // no embeddings
  cfg.method = Method::bald;
  CHECK_THROWS_AS(run_detector(cfg, records_only(binary)), ConfigError);  // no mutant sets
}
