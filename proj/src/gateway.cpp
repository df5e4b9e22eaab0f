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

#include "mucs/gateway.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "json.hpp"
#include "mucs/errors.hpp"

namespace mucs::gateway {

using nlohmann::json;

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  static const char* kHex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

// First balanced {...} block, honoring string literals and escapes.
std::optional<std::string> first_json_object(std::string_view s) {
  std::size_t start = s.find('{');
  while (start != std::string_view::npos) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < s.size(); ++i) {
      const char c = s[i];
      if (in_string) {
        if (c == '\\') ++i;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}') {
        --depth;
        if (depth == 0) return std::string(s.substr(start, i - start + 1));
      }
    }
    start = s.find('{', start + 1);
  }
  return std::nullopt;
}

std::optional<double> first_number(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    const bool digit_start = std::isdigit(static_cast<unsigned char>(c)) ||
                             ((c == '.' || c == '-' || c == '+') && i + 1 < s.size() &&
                              std::isdigit(static_cast<unsigned char>(s[i + 1])));
    if (!digit_start) continue;
    char* end = nullptr;
    const std::string tail(s.substr(i));
    const double v = std::strtod(tail.c_str(), &end);
    if (end != tail.c_str()) return v;
  }
  return std::nullopt;
}

std::string join_class_names(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ", ";
    out += names[i];
  }
  return out;
}

// Deterministic per-attempt format reminders; each retry gets stricter.
std::string retry_reminder(int retry_index, const TaskTemplate& tmpl) {
  std::string msg;
  if (tmpl.scalar_binary) {
    msg = "Your previous reply could not be parsed. Respond with only a single number "
          "between 0 and 1, with no other text.";
  } else {
    msg = "Your previous reply could not be parsed. Respond with only a JSON object mapping "
          "every class name to its probability, with no surrounding prose.";
  }
  if (retry_index >= 1 && !tmpl.scalar_binary) {
    msg += " The object must contain exactly the keys " + join_class_names(tmpl.class_names) +
           " with numeric values that sum to 1.";
  }
  return msg;
}

std::int64_t now_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

json cache_entry_to_json(const CacheEntry& e) {
  return json{{"key", e.key},
              {"raw", e.raw},
              {"probs", e.parsed.probs()},
              {"class_names", e.parsed.class_names()},
              {"ts", e.timestamp},
              {"in_tokens", e.input_tokens},
              {"out_tokens", e.output_tokens}};
}

CacheEntry cache_entry_from_json(const json& j) {
  CacheEntry e{j.at("key").get<std::string>(),
               j.at("raw").get<std::string>(),
               ProbVector::already_normalized(j.at("probs").get<std::vector<double>>(),
                                              j.at("class_names").get<std::vector<std::string>>()),
               j.at("ts").get<std::int64_t>(),
               j.at("in_tokens").get<std::int64_t>(),
               j.at("out_tokens").get<std::int64_t>()};
  return e;
}

}  // namespace

void ModelEndpoint::validate() const {
  if (base_url.empty()) throw ConfigError("endpoint base_url must be non-empty");
  if (!(top_p > 0.0) || top_p > 1.0) throw ConfigError("top_p must lie in (0, 1]");
  if (max_context_tokens < 1) throw ConfigError("max_context_tokens must be positive");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
}

void TaskTemplate::validate() const {
  if (class_names.size() < 2) throw ConfigError("task needs at least 2 class names");
  std::vector<std::string> lowered;
  for (const std::string& n : class_names) lowered.push_back(ascii_lower(n));
  std::vector<std::string> sorted = lowered;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ConfigError("class names must be unique (case-insensitive)");
  if (instruction.empty()) throw ConfigError("task instruction must be non-empty");
  if (scalar_binary && class_names.size() != 2)
    throw ConfigError("scalar-reply tasks must have exactly 2 classes");
  for (const FewShotExample& ex : few_shot)
    if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= class_names.size())
      throw ConfigError("few-shot example label out of range");
}

TaskTemplate TaskTemplate::builtin(std::string_view task_id) {
  TaskTemplate t;
  t.task_id = std::string(task_id);
  if (task_id == "sentiment") {
    t.class_names = {"negative", "neutral", "positive"};
    t.kind = PromptKind::text;
    t.instruction =
        "Classify the sentiment of the movie review below as negative, neutral, or positive.";
  } else if (task_id == "clone") {
    t.class_names = {"no_clone", "clone"};
    t.kind = PromptKind::code;
    t.scalar_binary = true;
    t.instruction =
        "Decide whether the two Java code snippets below are clones of each other.";
  } else if (task_id == "pc") {
    t.kind = PromptKind::code;
    t.instruction =
        "Classify the Java program below by the problem it solves, choosing one of the "
        "given category names.";
    // Class names come from the dataset configuration.
  } else if (task_id == "tmn") {
    t.kind = PromptKind::text;
    t.class_names = {"business", "entertainment", "health", "sci_tech",
                     "sport",    "us",            "world"};
    t.instruction = "Classify the news article below into one of the given categories.";
  } else {
    throw ConfigError("unknown builtin task '" + std::string(task_id) + "'");
  }
  return t;
}

std::string render_prompt(const TaskTemplate& tmpl, std::string_view item_prompt) {
  tmpl.validate();
  std::string out = tmpl.instruction;
  out += "\n\n";
  if (!tmpl.scalar_binary) {
    out += "Classes: " + join_class_names(tmpl.class_names) + "\n\n";
  }
  std::vector<FewShotExample> examples = tmpl.few_shot;
  std::stable_sort(examples.begin(), examples.end(),
                   [](const FewShotExample& a, const FewShotExample& b) { return a.label < b.label; });
  for (const FewShotExample& ex : examples) {
    out += "Input: " + ex.prompt + "\n";
    out += "Label: " + tmpl.class_names[static_cast<std::size_t>(ex.label)] + "\n\n";
  }
  out += "Input: ";
  out += item_prompt;
  out += "\n\n";
  if (tmpl.scalar_binary) {
    out += "Respond with a single number between 0 and 1, where 0 means " +
           tmpl.class_names[0] + " and 1 means " + tmpl.class_names[1] + ".";
  } else {
    out += "Respond with a single JSON object mapping each class name to its probability; "
           "the probabilities must sum to 1.";
  }
  return out;
}

std::string render_prompt(const TaskTemplate& tmpl, const TestItem& item) {
  return render_prompt(tmpl, item.prompt);
}

StubTransport::StubTransport(std::vector<Entry> table, std::string default_reply)
    : table_(std::move(table)), default_reply_(std::move(default_reply)) {}

std::shared_ptr<StubTransport> StubTransport::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stub file '" + path.string() + "'");
  std::vector<Entry> table;
  std::string default_reply;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("stub file line " + std::to_string(line_no) + ": " + e.what());
    }
    if (j.contains("default")) {
      default_reply = j.at("default").get<std::string>();
    } else {
      table.push_back({j.at("match").get<std::string>(), j.at("reply").get<std::string>()});
    }
  }
  return std::make_shared<StubTransport>(std::move(table), std::move(default_reply));
}

ChatReply StubTransport::send(const ChatRequest& request) {
  {
    std::lock_guard lk(mu_);
    ++calls_;
  }
  if (request.messages.empty()) throw TransportError("stub received an empty request");
  // Retry turns append reminder messages, so match against the whole user
  // transcript: the original rendered prompt is always part of it.
  std::string transcript;
  for (const ChatMessage& m : request.messages) {
    if (m.role != "user") continue;
    if (!transcript.empty()) transcript += '\n';
    transcript += m.content;
  }
  for (const Entry& e : table_)
    if (e.match == transcript) return {e.reply};
  for (const Entry& e : table_)
    if (!e.match.empty() && transcript.find(e.match) != std::string::npos) return {e.reply};
  if (!default_reply_.empty()) return {default_reply_};
  throw TransportError("no stub entry matches the prompt");
}

int StubTransport::calls() const {
  std::lock_guard lk(mu_);
  return calls_;
}

ResponseCache::ResponseCache(std::filesystem::path file) : file_(std::move(file)) {
  std::ifstream in(*file_);
  if (!in) return;  // a missing file is an empty cache
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      CacheEntry e = cache_entry_from_json(json::parse(line));
      entries_.insert_or_assign(e.key, std::move(e));  // last entry per key wins
    } catch (const std::exception&) {
      // Torn trailing writes are dropped on load.
      continue;
    }
  }
}

std::optional<CacheEntry> ResponseCache::find(const std::string& key) const {
  std::lock_guard lk(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::put(const CacheEntry& entry) {
  std::lock_guard lk(mu_);
  entries_.insert_or_assign(entry.key, entry);
  if (file_) {
    std::ofstream out(*file_, std::ios::app);
    if (!out) throw DataError("cannot append to cache file '" + file_->string() + "'");
    out << cache_entry_to_json(entry).dump() << '\n';
  }
}

std::size_t ResponseCache::size() const {
  std::lock_guard lk(mu_);
  return entries_.size();
}

std::pair<std::int64_t, std::int64_t> ResponseCache::stored_token_totals() const {
  std::lock_guard lk(mu_);
  std::int64_t in = 0, out = 0;
  for (const auto& [key, e] : entries_) {
    in += e.input_tokens;
    out += e.output_tokens;
  }
  return {in, out};
}

PriceTable PriceTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open price table '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("price table: " + std::string(e.what()));
  }
  PriceTable t;
  for (const auto& [model, spec] : j.items()) {
    t.prices[model] = {spec.value("input_per_1k", 0.0), spec.value("output_per_1k", 0.0)};
  }
  return t;
}

PriceTable::Price PriceTable::lookup(const std::string& model_name) const {
  auto it = prices.find(model_name);
  if (it == prices.end()) return {};
  return it->second;
}

std::string cache_key(const std::string& model_name, double top_p,
                      std::string_view rendered_prompt) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", top_p);
  std::string material = model_name;
  material += '\x1f';
  material += buf;
  material += '\x1f';
  material += rendered_prompt;
  return sha256_hex(material);
}

std::int64_t estimate_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

ProbVector parse_reply(const std::string& content, const TaskTemplate& tmpl) {
  const std::optional<std::string> block = first_json_object(content);
  if (block.has_value()) {
    json j;
    try {
      j = json::parse(*block);
    } catch (const json::exception& e) {
      throw ParseError("reply JSON does not parse: " + std::string(e.what()));
    }
    if (!j.is_object()) throw ParseError("reply JSON is not an object");
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < tmpl.class_names.size(); ++i)
      index[ascii_lower(tmpl.class_names[i])] = i;
    std::vector<double> probs(tmpl.class_names.size(), -1.0);
    for (const auto& [key, value] : j.items()) {
      auto it = index.find(ascii_lower(key));
      if (it == index.end()) throw ParseError("reply contains unknown class '" + key + "'");
      if (!value.is_number()) throw ParseError("class '" + key + "' has a non-numeric value");
      if (probs[it->second] >= 0.0)
        throw ParseError("class '" + key + "' appears more than once");
      probs[it->second] = value.get<double>();
    }
    for (std::size_t i = 0; i < probs.size(); ++i)
      if (probs[i] < 0.0)
        throw ParseError("reply is missing class '" + tmpl.class_names[i] + "'");
    try {
      return ProbVector(std::move(probs), tmpl.class_names);
    } catch (const DataError& e) {
      throw ParseError(e.what());
    }
  }
  if (tmpl.scalar_binary) {
    const std::optional<double> s = first_number(content);
    if (!s.has_value()) throw ParseError("no scalar probability found in reply");
    if (*s < 0.0 || *s > 1.0) throw ParseError("scalar probability outside [0, 1]");
    try {
      return ProbVector({1.0 - *s, *s}, tmpl.class_names);
    } catch (const DataError& e) {
      throw ParseError(e.what());
    }
  }
  throw ParseError("no JSON object found in reply");
}

Gateway::Gateway(ModelEndpoint endpoint, std::shared_ptr<Transport> transport,
                 std::shared_ptr<ResponseCache> cache, PriceTable prices)
    : endpoint_(std::move(endpoint)),
      transport_(std::move(transport)),
      cache_(std::move(cache)),
      prices_(std::move(prices)) {
  endpoint_.validate();
  if (!transport_) throw ConfigError("gateway needs a transport");
  if (!cache_) cache_ = std::make_shared<ResponseCache>();
}

ChatReply Gateway::bounded_send(const ChatRequest& request) {
  {
    std::unique_lock lk(mu_);
    slot_free_.wait(lk, [&] { return in_flight_ < endpoint_.max_in_flight; });
    ++in_flight_;
  }
  struct Slot {
    Gateway* g;
    ~Slot() {
      {
        std::lock_guard lk(g->mu_);
        --g->in_flight_;
      }
      g->slot_free_.notify_one();
    }
  } slot{this};
  return transport_->send(request);
}

ProbVector Gateway::predict(const TaskTemplate& tmpl, std::string_view item_prompt) {
  const std::string rendered = render_prompt(tmpl, item_prompt);
  if (estimate_tokens(rendered) > endpoint_.max_context_tokens)
    throw PredictFailed(rendered, "",
                        "rendered prompt exceeds max_context_tokens (" +
                            std::to_string(estimate_tokens(rendered)) + " estimated tokens)");

  const std::string key = cache_key(endpoint_.model_name, endpoint_.top_p, rendered);
  if (std::optional<CacheEntry> hit = cache_->find(key)) {
    std::lock_guard lk(mu_);
    ++hits_;
    return hit->parsed;
  }
  {
    std::lock_guard lk(mu_);
    ++misses_;
  }

  std::vector<ChatMessage> messages{{"user", rendered}};
  const PriceTable::Price price = prices_.lookup(endpoint_.model_name);
  std::string last_raw;
  int attempts = 0;
  const int max_attempts = endpoint_.max_retries + 1;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    ChatReply reply;
    try {
      reply = bounded_send({endpoint_.model_name, messages, endpoint_.top_p});
    } catch (const TransportError& e) {
      ++attempts;
      if (attempt + 1 == max_attempts) throw TransportError(std::string(e.what()), attempts);
      continue;
    }
    ++attempts;

    std::int64_t in_tokens = 0;
    for (const ChatMessage& m : messages) in_tokens += estimate_tokens(m.content);
    const std::int64_t out_tokens = estimate_tokens(reply.content);
    {
      std::lock_guard lk(mu_);
      cost_ += static_cast<double>(in_tokens) / 1000.0 * price.input_per_1k +
               static_cast<double>(out_tokens) / 1000.0 * price.output_per_1k;
    }

    last_raw = reply.content;
    try {
      ProbVector parsed = parse_reply(reply.content, tmpl);
      cache_->put({key, reply.content, parsed, now_seconds(), in_tokens, out_tokens});
      return parsed;
    } catch (const ParseError&) {
      if (attempt + 1 == max_attempts) break;
      messages.push_back({"assistant", reply.content});
      messages.push_back({"user", retry_reminder(attempt, tmpl)});
    }
  }
  throw PredictFailed(rendered, last_raw);
}

ProbVector Gateway::predict(const TaskTemplate& tmpl, const TestItem& item) {
  return predict(tmpl, item.prompt);
}

CacheStats Gateway::cache_stats() const {
  std::lock_guard lk(mu_);
  return {cache_->size(), hits_, misses_, cost_};
}

}  // namespace mucs::gateway
