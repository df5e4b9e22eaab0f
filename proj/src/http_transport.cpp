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

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "json.hpp"
#include "mucs/errors.hpp"
#include "mucs/gateway.hpp"

namespace mucs::gateway {

using nlohmann::json;

namespace {

// Splits "scheme://host[:port]/path/prefix" into the client origin and the
// path prefix ("" when absent).
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  const std::size_t scheme = base_url.find("://");
  const std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
  const std::size_t slash = base_url.find('/', host_start);
  if (slash == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, slash), prefix};
}

}  // namespace

HttpTransport::HttpTransport(std::string base_url, std::string api_key,
                             std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), timeout_(timeout) {}

ChatReply HttpTransport::send(const ChatRequest& request) {
  const auto [origin, prefix] = split_base_url(base_url_);
  httplib::Client client(origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);

  json body{{"model", request.model}, {"top_p", request.top_p}};
  json messages = json::array();
  for (const ChatMessage& m : request.messages)
    messages.push_back({{"role", m.role}, {"content", m.content}});
  body["messages"] = std::move(messages);

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  httplib::Result res =
      client.Post(prefix + "/chat/completions", headers, body.dump(), "application/json");
  if (!res)
    throw TransportError("HTTP request to " + base_url_ + " failed: " +
                         httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw TransportError("HTTP " + std::to_string(res->status) + " from " + base_url_);

  try {
    const json reply = json::parse(res->body);
    return {reply.at("choices").at(0).at("message").at("content").get<std::string>()};
  } catch (const json::exception& e) {
    throw TransportError("malformed chat-completion response: " + std::string(e.what()));
  }
}

}  // namespace mucs::gateway
