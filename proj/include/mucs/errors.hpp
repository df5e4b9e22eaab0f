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

#ifndef MUCS_ERRORS_HPP_
#define MUCS_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace mucs {

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration (unknown method, invalid budget, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input data (dataset lines, prediction files, embeddings).
class DataError : public Error {
 public:
  using Error::Error;
};

// A model reply that could not be turned into a probability vector.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Raised when a prediction cannot be obtained for one item even after
// retries; carries the offending prompt and the last raw model reply.
class PredictFailed : public Error {
 public:
  PredictFailed(std::string prompt, std::string raw_text,
                const std::string& reason = "prediction failed: unparseable model reply")
      : Error(reason),
        prompt_(std::move(prompt)),
        raw_text_(std::move(raw_text)) {}

  const std::string& prompt() const { return prompt_; }
  const std::string& raw_text() const { return raw_text_; }

 private:
  std::string prompt_;
  std::string raw_text_;
};

// HTTP/transport level failure after exhausting retries.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int attempts)
      : Error(what + " (after " + std::to_string(attempts) + " attempts)"),
        attempts_(attempts) {}
  explicit TransportError(const std::string& what) : Error(what), attempts_(1) {}

  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

}  // namespace mucs

#endif  // MUCS_ERRORS_HPP_
