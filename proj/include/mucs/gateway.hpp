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

#ifndef MUCS_GATEWAY_HPP_
#define MUCS_GATEWAY_HPP_

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mucs/types.hpp"

namespace mucs::gateway {

struct ModelEndpoint {
  std::string base_url;          // non-empty; "stub" for table-driven transports
  std::string model_name;
  std::string api_key_env_var;   // bearer token source; empty = no auth header
  double top_p = 1.0;            // (0, 1]
  int max_context_tokens = 16385;
  std::chrono::milliseconds request_timeout{30000};
  int max_retries = 3;
  int max_in_flight = 4;

  void validate() const;
};

struct FewShotExample {
  std::string prompt;
  int label = 0;
};

// Prompt template for one classification task: instruction text demanding a
// JSON object of class name -> probability, plus optional few-shot
// examples (empty = zero-shot).
struct TaskTemplate {
  std::string task_id;
  std::vector<std::string> class_names;  // >= 2, unique
  std::string instruction;
  std::vector<FewShotExample> few_shot;
  PromptKind kind = PromptKind::text;
  // Clone-detection style 2-class tasks: a bare scalar reply s in [0,1]
  // parses as [1-s, s].
  bool scalar_binary = false;

  void validate() const;
  // Templates for the stock task ids (sentiment, clone, pc, tmn). pc ships
  // without class names: the dataset defines its categories.
  static TaskTemplate builtin(std::string_view task_id);
};

// Deterministic rendering: instruction, few-shot examples in class-id
// order, the item prompt, and the output-schema reminder.
std::string render_prompt(const TaskTemplate& tmpl, std::string_view item_prompt);
std::string render_prompt(const TaskTemplate& tmpl, const TestItem& item);

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double top_p = 1.0;
};

struct ChatReply {
  std::string content;  // choices[0].message.content
};

class Transport {
 public:
  virtual ~Transport() = default;
  // Throws TransportError on failure.
  virtual ChatReply send(const ChatRequest& request) = 0;
};

// Table-driven offline transport. The reply for a request is the first
// entry whose match string equals, then contains as a substring, the last
// user message; file order breaks ties.
class StubTransport : public Transport {
 public:
  struct Entry {
    std::string match;
    std::string reply;
  };

  explicit StubTransport(std::vector<Entry> table, std::string default_reply = "");
  // JSON-lines: {"match": ..., "reply": ...} or {"default": ...}.
  static std::shared_ptr<StubTransport> load(const std::filesystem::path& path);

  ChatReply send(const ChatRequest& request) override;
  int calls() const;

 private:
  std::vector<Entry> table_;
  std::string default_reply_;
  mutable std::mutex mu_;
  int calls_ = 0;
};

// Function-backed transport for tests.
class FnTransport : public Transport {
 public:
  using Fn = std::function<std::string(const ChatRequest&)>;
  explicit FnTransport(Fn fn) : fn_(std::move(fn)) {}
  ChatReply send(const ChatRequest& request) override { return {fn_(request)}; }

 private:
  Fn fn_;
};

// JSON chat-completion client: POST {model, messages, top_p} to
// <base_url>/chat/completions with a bearer token, read
// choices[0].message.content.
class HttpTransport : public Transport {
 public:
  HttpTransport(std::string base_url, std::string api_key,
                std::chrono::milliseconds timeout);
  ChatReply send(const ChatRequest& request) override;

 private:
  std::string base_url_;
  std::string api_key_;
  std::chrono::milliseconds timeout_;
};

struct CacheEntry {
  std::string key;  // digest of (model_name, top_p, rendered prompt)
  std::string raw;  // byte-identical raw reply content
  ProbVector parsed;
  std::int64_t timestamp = 0;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

// Durable response cache: append-only JSON-lines, one entry per line,
// compacted on load (the last entry per key wins). Writes are serialized.
class ResponseCache {
 public:
  ResponseCache() = default;  // memory-only
  explicit ResponseCache(std::filesystem::path file);

  std::optional<CacheEntry> find(const std::string& key) const;
  void put(const CacheEntry& entry);
  std::size_t size() const;
  std::pair<std::int64_t, std::int64_t> stored_token_totals() const;

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, CacheEntry> entries_;
  std::optional<std::filesystem::path> file_;
};

struct PriceTable {
  struct Price {
    double input_per_1k = 0.0;
    double output_per_1k = 0.0;
  };
  std::unordered_map<std::string, Price> prices;

  static PriceTable load(const std::filesystem::path& path);
  Price lookup(const std::string& model_name) const;
};

struct CacheStats {
  std::size_t entries = 0;
  std::size_t hits = 0;
  std::size_t misses = 0;
  double estimated_cost = 0.0;
};

// SHA-256 hex digest over (model, top_p, rendered prompt).
std::string cache_key(const std::string& model_name, double top_p,
                      std::string_view rendered_prompt);

// Crude token estimate: ceil(bytes / 4).
std::int64_t estimate_tokens(std::string_view text);

// Turns a raw reply into a probability vector: the first balanced {...}
// block is read as a JSON object whose keys must match the class names
// case-insensitively and exactly (unknown or missing classes fail); for
// scalar_binary templates a bare number s in [0,1] is accepted as [1-s, s].
ProbVector parse_reply(const std::string& content, const TaskTemplate& tmpl);

// Uniform model access: prompt rendering, caching, bounded-concurrency
// transport calls, parse retries with stricter format reminders, and cost
// accounting. Shareable across threads.
class Gateway {
 public:
  Gateway(ModelEndpoint endpoint, std::shared_ptr<Transport> transport,
          std::shared_ptr<ResponseCache> cache, PriceTable prices = {});

  // Cached predictions are returned without touching the transport; the
  // first successful response per key is pinned, which also pins the
  // non-determinism of sampled decoding.
  ProbVector predict(const TaskTemplate& tmpl, std::string_view item_prompt);
  ProbVector predict(const TaskTemplate& tmpl, const TestItem& item);

  CacheStats cache_stats() const;
  const ModelEndpoint& endpoint() const { return endpoint_; }

 private:
  ChatReply bounded_send(const ChatRequest& request);

  ModelEndpoint endpoint_;
  std::shared_ptr<Transport> transport_;
  std::shared_ptr<ResponseCache> cache_;
  PriceTable prices_;

  mutable std::mutex mu_;
  std::condition_variable slot_free_;
  int in_flight_ = 0;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
  double cost_ = 0.0;
};

}  // namespace mucs::gateway

#endif  // MUCS_GATEWAY_HPP_
