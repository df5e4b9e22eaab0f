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

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "json.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include "mucs/errors.hpp"
#include "mucs/gateway.hpp"
#include "mucs/types.hpp"

using namespace mucs;
using namespace mucs::gateway;
using nlohmann::json;

namespace {

TaskTemplate sentiment_template() { return TaskTemplate::builtin("sentiment"); }

ModelEndpoint stub_endpoint() {
  ModelEndpoint ep;
  ep.base_url = "stub";
  ep.model_name = "stub-model";
  return ep;
}

// Counts sends and tracks the maximum number of concurrent callers.
class CountingTransport : public Transport {
 public:
  explicit CountingTransport(std::string reply, std::chrono::milliseconds delay = {})
      : reply_(std::move(reply)), delay_(delay) {}

  ChatReply send(const ChatRequest&) override {
    const int now = ++concurrent_;
    int seen = max_concurrent_.load();
    while (now > seen && !max_concurrent_.compare_exchange_weak(seen, now)) {
    }
    if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
    ++calls_;
    --concurrent_;
    return {reply_};
  }

  int calls() const { return calls_.load(); }
  int max_concurrent() const { return max_concurrent_.load(); }

 private:
  std::string reply_;
  std::chrono::milliseconds delay_;
  std::atomic<int> calls_{0};
  std::atomic<int> concurrent_{0};
  std::atomic<int> max_concurrent_{0};
};

}  // namespace

TEST_CASE("render_prompt is deterministic and carries the schema") {
  TaskTemplate tmpl = sentiment_template();
  const std::string a = render_prompt(tmpl, "the movie was good");
  const std::string b = render_prompt(tmpl, "the movie was good");
  CHECK(a == b);
  CHECK(a.find("the movie was good") != std::string::npos);
  CHECK(a.find("JSON object") != std::string::npos);
  CHECK(a.find("negative, neutral, positive") != std::string::npos);
}

TEST_CASE("render_prompt emits few-shot examples in class-id order") {
  TaskTemplate tmpl;
  tmpl.task_id = "pc";
  tmpl.class_names = {"c0", "c1", "c2", "c3", "c4"};
  tmpl.instruction = "Classify the program.";
  tmpl.few_shot = {{"example4", 4}, {"example0", 0}, {"example2", 2},
                   {"example1", 1}, {"example3", 3}};
  const std::string rendered = render_prompt(tmpl, "item");
  std::size_t last = 0;
  for (int label = 0; label < 5; ++label) {
    const std::size_t at = rendered.find("example" + std::to_string(label));
    REQUIRE(at != std::string::npos);
    CHECK(at > last);
    last = at;
  }
}

TEST_CASE("parse_reply reads a plain class-probability object") {
  const ProbVector v =
      parse_reply(R"({"negative":0.1,"neutral":0.2,"positive":0.7})", sentiment_template());
  CHECK(v.probs() == std::vector<double>{0.1, 0.2, 0.7});
}

TEST_CASE("parse_reply tolerates surrounding prose and case") {
  const ProbVector v = parse_reply(
      "Sure! Here is my estimate:\n{\"Negative\": 0.5, \"NEUTRAL\": 0.3, \"positive\": 0.2}\n"
      "Let me know if you need more.",
      sentiment_template());
  CHECK(v.probs()[0] == doctest::Approx(0.5));
  CHECK(v.probs()[2] == doctest::Approx(0.2));
}

TEST_CASE("parse_reply renormalizes sums near 1") {
  const ProbVector v =
      parse_reply(R"({"negative":0.1,"neutral":0.22,"positive":0.7})", sentiment_template());
  double sum = 0.0;
  for (double p : v.probs()) sum += p;
  CHECK(std::abs(sum - 1.0) <= 1e-6);
}

TEST_CASE("parse_reply failure modes") {
  const TaskTemplate tmpl = sentiment_template();
  CHECK_THROWS_AS(parse_reply("no json here", tmpl), ParseError);
  CHECK_THROWS_AS(parse_reply(R"({"negative":0.5,"neutral":0.5})", tmpl), ParseError);
  CHECK_THROWS_AS(parse_reply(R"({"negative":0.4,"neutral":0.3,"positive":0.2,"bogus":0.1})",
                              tmpl),
                  ParseError);
  CHECK_THROWS_AS(parse_reply(R"({"negative":"high","neutral":0.5,"positive":0.5})", tmpl),
                  ParseError);
  CHECK_THROWS_AS(parse_reply(R"({"negative":0.9,"neutral":0.5,"positive":0.2})", tmpl),
                  ParseError);  // sum 1.6
  CHECK_THROWS_AS(parse_reply("{broken", tmpl), ParseError);
}

TEST_CASE("scalar clone-detection replies parse to [1-s, s]") {
  const TaskTemplate tmpl = TaskTemplate::builtin("clone");
  const ProbVector v = parse_reply("0.8", tmpl);
  CHECK(v.probs()[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(v.probs()[1] == doctest::Approx(0.8).epsilon(1e-12));

  const ProbVector wrapped = parse_reply("The clone probability is 0.35.", tmpl);
  CHECK(wrapped.probs()[1] == doctest::Approx(0.35).epsilon(1e-12));

  CHECK_THROWS_AS(parse_reply("score: 1.7", tmpl), ParseError);
  CHECK_THROWS_AS(parse_reply("none", tmpl), ParseError);
}

TEST_CASE("predict caches and is idempotent") {
  auto transport = std::make_shared<CountingTransport>(
      R"({"negative":0.1,"neutral":0.2,"positive":0.7})");
  Gateway gw(stub_endpoint(), transport, std::make_shared<ResponseCache>());
  const TaskTemplate tmpl = sentiment_template();

  const ProbVector first = gw.predict(tmpl, "review text");
  CHECK(transport->calls() == 1);
  const ProbVector second = gw.predict(tmpl, "review text");
  CHECK(transport->calls() == 1);  // zero transport calls on the cache hit
  CHECK(first == second);

  const CacheStats stats = gw.cache_stats();
  CHECK(stats.entries == 1);
  CHECK(stats.hits == 1);
  CHECK(stats.misses == 1);
}

TEST_CASE("cache stats start at zero and cost follows the price table") {
  PriceTable prices;
  prices.prices["stub-model"] = {0.03, 0.0};
  auto transport = std::make_shared<CountingTransport>(
      R"({"negative":1.0,"neutral":0.0,"positive":0.0})");
  Gateway gw(stub_endpoint(), transport, std::make_shared<ResponseCache>(), prices);
  const CacheStats fresh = gw.cache_stats();
  CHECK(fresh.entries == 0);
  CHECK(fresh.hits == 0);
  CHECK(fresh.misses == 0);
  CHECK(fresh.estimated_cost == 0.0);

  // A prompt whose rendered form is ~4000 characters = ~1000 tokens.
  const std::string prompt(4000 - static_cast<int>(render_prompt(sentiment_template(), "").size()),
                           'x');
  gw.predict(sentiment_template(), prompt);
  const CacheStats after = gw.cache_stats();
  CHECK(after.estimated_cost == doctest::Approx(0.03).epsilon(1e-6));
}

TEST_CASE("bounded concurrency never exceeds max_in_flight") {
  auto transport = std::make_shared<CountingTransport>(
      R"({"negative":0.2,"neutral":0.3,"positive":0.5})", std::chrono::milliseconds(5));
  ModelEndpoint ep = stub_endpoint();
  ep.max_in_flight = 3;
  Gateway gw(ep, transport, std::make_shared<ResponseCache>());
  const TaskTemplate tmpl = sentiment_template();

  std::vector<std::thread> threads;
  for (int i = 0; i < 16; ++i)
    threads.emplace_back([&gw, &tmpl, i] {
      gw.predict(tmpl, "distinct prompt " + std::to_string(i));
    });
  for (std::thread& t : threads) t.join();

  CHECK(transport->calls() == 16);
  CHECK(transport->max_concurrent() <= 3);
  CHECK(transport->max_concurrent() >= 2);  // the pool actually ran concurrently
}

TEST_CASE("parse retries append stricter reminders and stay byte-stable") {
  const TaskTemplate tmpl = sentiment_template();
  auto run_failing = [&tmpl](std::vector<std::vector<ChatMessage>>& transcript) {
    auto transport = std::make_shared<FnTransport>([&transcript](const ChatRequest& req) {
      transcript.push_back(req.messages);
      return "not parseable";
    });
    ModelEndpoint ep = stub_endpoint();
    ep.max_retries = 2;
    Gateway gw(ep, transport, std::make_shared<ResponseCache>());
    CHECK_THROWS_AS(gw.predict(tmpl, "review"), PredictFailed);
  };

  std::vector<std::vector<ChatMessage>> first, second;
  run_failing(first);
  run_failing(second);
  REQUIRE(first.size() == 3);  // initial + 2 retries
  CHECK(first[1].size() == 3);
  CHECK(first[2].size() == 5);
  CHECK(first[1][2].role == "user");
  CHECK(first[1][2].content.find("could not be parsed") != std::string::npos);
  CHECK(first[2][4].content.find("exactly the keys") != std::string::npos);
  REQUIRE(second.size() == 3);
  for (std::size_t i = 0; i < first.size(); ++i) {
    REQUIRE(first[i].size() == second[i].size());
    for (std::size_t m = 0; m < first[i].size(); ++m) {
      CHECK(first[i][m].role == second[i][m].role);
      CHECK(first[i][m].content == second[i][m].content);
    }
  }
}

TEST_CASE("a reply that recovers on retry is cached once") {
  int calls = 0;
  auto transport = std::make_shared<FnTransport>([&calls](const ChatRequest&) -> std::string {
    ++calls;
    if (calls == 1) return "garbage";
    return R"({"negative":0.3,"neutral":0.3,"positive":0.4})";
  });
  Gateway gw(stub_endpoint(), transport, std::make_shared<ResponseCache>());
  const ProbVector v = gw.predict(sentiment_template(), "review");
  CHECK(calls == 2);
  CHECK(v.probs()[2] == doctest::Approx(0.4));
  gw.predict(sentiment_template(), "review");
  CHECK(calls == 2);  // cache hit
}

TEST_CASE("transport failures are retried then reported with the attempt count") {
  auto transport = std::make_shared<FnTransport>([](const ChatRequest&) -> std::string {
    throw TransportError("connection refused");
  });
  ModelEndpoint ep = stub_endpoint();
  ep.max_retries = 2;
  Gateway gw(ep, transport, std::make_shared<ResponseCache>());
  try {
    gw.predict(sentiment_template(), "review");
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.attempts() == 3);
  }
}

TEST_CASE("oversized prompts are rejected before any transport call") {
  auto transport = std::make_shared<CountingTransport>("{}");
  ModelEndpoint ep = stub_endpoint();
  ep.max_context_tokens = 10;
  Gateway gw(ep, transport, std::make_shared<ResponseCache>());
  CHECK_THROWS_AS(gw.predict(sentiment_template(), "way too long for ten tokens"),
                  PredictFailed);
  CHECK(transport->calls() == 0);
}

TEST_CASE("cache file persists, compacts, and re-derives parsed vectors") {
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "mucs_test_cache.jsonl";
  std::filesystem::remove(path);
  const TaskTemplate tmpl = sentiment_template();
  const std::string raw = R"({"negative":0.25,"neutral":0.25,"positive":0.5})";

  {
    ResponseCache cache(path);
    cache.put({"k1", raw, parse_reply(raw, tmpl), 1, 10, 5});
    cache.put({"k2", raw, parse_reply(raw, tmpl), 2, 10, 5});
    cache.put({"k1", raw, parse_reply(raw, tmpl), 3, 20, 5});  // overwrites k1
  }
  {
    ResponseCache cache(path);
    CHECK(cache.size() == 2);
    const std::optional<CacheEntry> k1 = cache.find("k1");
    REQUIRE(k1.has_value());
    CHECK(k1->timestamp == 3);      // last entry per key wins
    CHECK(k1->raw == raw);          // byte-identical raw reply
    CHECK(k1->parsed == parse_reply(k1->raw, tmpl));  // re-derivable from raw
    CHECK(!cache.find("absent").has_value());
  }
  std::filesystem::remove(path);
}

TEST_CASE("stub transport matches exactly, then by substring, then default") {
  StubTransport stub({{"full prompt", "exact"}, {"prompt", "substr"}}, "fallback");
  CHECK(stub.send({"m", {{"user", "full prompt"}}, 1.0}).content == "exact");
  CHECK(stub.send({"m", {{"user", "a prompt inside"}}, 1.0}).content == "substr");
  CHECK(stub.send({"m", {{"user", "nothing matches"}}, 1.0}).content == "fallback");
  CHECK(stub.calls() == 3);

  StubTransport strict(std::vector<StubTransport::Entry>{{"x", "y"}});
  CHECK_THROWS_AS(strict.send({"m", {{"user", "zzz"}}, 1.0}), TransportError);
}

TEST_CASE("http transport speaks the chat-completion protocol over loopback") {
  httplib::Server server;
  json seen_body;
  std::string seen_auth;
  server.Post("/v1/chat/completions",
              [&](const httplib::Request& req, httplib::Response& res) {
                seen_body = json::parse(req.body);
                if (req.has_header("Authorization"))
                  seen_auth = req.get_header_value("Authorization");
                const json reply{
                    {"choices",
                     {{{"message",
                        {{"role", "assistant"},
                         {"content", R"({"negative":0.2,"neutral":0.3,"positive":0.5})"}}}}}}};
                res.set_content(reply.dump(), "application/json");
              });
  server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("ok", "text/plain");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&server] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpTransport transport("http://127.0.0.1:" + std::to_string(port) + "/v1", "sk-test",
                          std::chrono::milliseconds(5000));
  const ChatReply reply = transport.send(
      {"some-model", {{"user", "classify this"}}, 0.9});
  CHECK(reply.content.find("positive") != std::string::npos);
  CHECK(seen_body.at("model") == "some-model");
  CHECK(seen_body.at("top_p") == 0.9);
  CHECK(seen_body.at("messages").at(0).at("role") == "user");
  CHECK(seen_body.at("messages").at(0).at("content") == "classify this");
  CHECK(seen_auth == "Bearer sk-test");

  // Non-2xx statuses surface as transport errors.
  server.Post("/v1/other", [](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
  });
  HttpTransport bad_path("http://127.0.0.1:" + std::to_string(port) + "/nope", "",
                         std::chrono::milliseconds(5000));
  CHECK_THROWS_AS(bad_path.send({"m", {{"user", "x"}}, 1.0}), TransportError);

  server.stop();
  server_thread.join();

  // A dead endpoint is a transport error too.
  HttpTransport dead("http://127.0.0.1:1", "", std::chrono::milliseconds(200));
  CHECK_THROWS_AS(dead.send({"m", {{"user", "x"}}, 1.0}), TransportError);
}

TEST_CASE("endpoint and template validation") {
  ModelEndpoint ep;
  CHECK_THROWS_AS(ep.validate(), ConfigError);  // empty base_url
  ep = stub_endpoint();
  ep.top_p = 0.0;
  CHECK_THROWS_AS(ep.validate(), ConfigError);

  TaskTemplate tmpl = sentiment_template();
  tmpl.class_names = {"same", "SAME"};
  CHECK_THROWS_AS(tmpl.validate(), ConfigError);
  tmpl = TaskTemplate::builtin("pc");
  CHECK_THROWS_AS(tmpl.validate(), ConfigError);  // class names come from the dataset
  CHECK_THROWS_AS(TaskTemplate::builtin("nope"), ConfigError);
}
