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

#ifndef MUCS_MUTATION_HPP_
#define MUCS_MUTATION_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mucs/rng.hpp"
#include "mucs/types.hpp"

namespace mucs::mutation {

// Prompt mutation operators: five text augmentations applicable to any
// prompt and four code refactorings applicable to code prompts only.
enum class OpKind {
  synonym_replacement,
  random_deletion,
  random_insertion,
  random_swap,
  punctuation_insertion,
  print_adding,
  local_variable_adding,
  dead_if_adding,
  duplication,
};

bool is_text_op(OpKind kind);
std::string_view op_name(OpKind kind);
std::optional<OpKind> op_from_name(std::string_view name);

// All five text ops for text prompts; all nine for code prompts.
std::vector<OpKind> default_op_pool(PromptKind kind);

struct MutationOp {
  OpKind kind = OpKind::random_swap;
  int n = 1;              // words/marks touched by SP, RI, PI
  double t_delete = 0.01; // per-word deletion probability for RD
};

// Flat-file synonym source: UTF-8, one record per line,
// `word<TAB>syn1,syn2,...`. Lookups are case-insensitive on the key.
class SynonymLexicon {
 public:
  SynonymLexicon() = default;
  static SynonymLexicon load(const std::filesystem::path& path);
  static SynonymLexicon from_entries(
      std::vector<std::pair<std::string, std::vector<std::string>>> entries);

  // Synonyms for a word; empty when the word is uncovered.
  std::span<const std::string> lookup(std::string_view word) const;
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, std::vector<std::string>> entries_;
};

struct Token {
  enum class Kind { word, punct, whitespace };
  Kind kind = Kind::word;
  std::string text;

  bool operator==(const Token&) const = default;
};

// Loss-free token carrier: detokenize(tokenize(s)) == s byte for byte.
// Bytes >= 0x80 count as word constituents so UTF-8 sequences stay glued.
struct TokenizedPrompt {
  static TokenizedPrompt tokenize(std::string_view text);
  std::string detokenize() const;

  std::vector<std::size_t> word_positions() const;
  std::size_t word_count() const;

  std::vector<Token> tokens;
};

enum class StatementKind { assignment, declaration, other };

struct CodeLine {
  std::string text;
  int depth_end = 0;  // brace depth after scanning this line
  StatementKind stmt = StatementKind::other;
};

// Brace-aware line scanner for Java-shaped code. Strings, chars and
// comments are skipped when counting braces; statement classification is a
// heuristic over the line's shape, which is all the refactoring operators
// need.
struct CodeScan {
  static CodeScan scan(std::string_view code);
  std::string reassemble() const;

  // Lines inside a method body (depth >= 2 for Java-shaped input):
  // inserting a statement below them is safe.
  std::vector<std::size_t> eligible_lines() const;
  std::vector<std::size_t> eligible_assignments() const;

  std::vector<CodeLine> lines;
  bool trailing_newline = false;
  bool balanced = false;
};

// An operator application; applied==false means the operator was the
// identity on this prompt (no eligible site), which is a permitted outcome.
struct OpResult {
  std::string text;
  bool applied = false;
};

OpResult synonym_replacement(std::string_view prompt, int n, const SynonymLexicon& lexicon,
                             Rng& rng);
OpResult random_deletion(std::string_view prompt, double t_delete, Rng& rng);
OpResult random_insertion(std::string_view prompt, int n, const SynonymLexicon& lexicon,
                          Rng& rng);
OpResult random_swap(std::string_view prompt, Rng& rng);
OpResult punctuation_insertion(std::string_view prompt, int n, Rng& rng);

OpResult print_adding(std::string_view code, Rng& rng);
OpResult local_variable_adding(std::string_view code, Rng& rng);
OpResult dead_if_adding(std::string_view code, Rng& rng);
OpResult duplication(std::string_view code, Rng& rng);

// Dispatch by op kind; code ops on text prompts are a configuration error.
OpResult apply_op(const MutationOp& op, std::string_view prompt, PromptKind kind,
                  const SynonymLexicon& lexicon, Rng& rng);

struct ChainLink {
  OpKind op;
  bool applied = false;

  bool operator==(const ChainLink&) const = default;
};

struct MutantResult {
  std::string text;
  std::vector<ChainLink> chain;
};

// One mutant: K operators drawn uniformly with replacement from the pool,
// applied sequentially. Identity applications are permitted links.
MutantResult make_mutant(std::string_view prompt, PromptKind kind, int K,
                         std::span<const MutationOp> op_pool, const SynonymLexicon& lexicon,
                         Rng& rng);

struct MucsConfig {
  int n_mutants = 10;
  int K = 3;  // 1 is the sensible setting for 2-class code-clone-style tasks
  std::vector<MutationOp> op_pool;  // empty = default pool for the prompt kind
  std::uint64_t seed = 0;
};

using ModelFn = std::function<ProbVector(const std::string&)>;

// Outcome of smoothing one item. When every mutant query succeeds, `record`
// holds the entry-wise mean of the mutant probability vectors
// (source=smoothed). Any failed query marks the item smoothing-failed
// (`record` empty); callers fall back to the original prediction and record
// the fallback. Successful mutants are always retained for BALD.
struct SmoothResult {
  std::optional<PredictionRecord> record;
  MutantPredictionSet mutants;           // size = n_mutants - failed_queries
  std::vector<MutantResult> mutant_texts;  // all n_mutants, in generation order
  int failed_queries = 0;

  bool smoothing_failed() const { return failed_queries > 0; }
};

// Mutation-based prediction-confidence smoothing: generate n mutants of the
// item's prompt, query the model on each, and average the full probability
// vectors. The per-item RNG stream is derived from cfg.seed and the item
// id, so results do not depend on processing order.
SmoothResult mucs_smooth(const TestItem& item, const MucsConfig& cfg,
                         const SynonymLexicon& lexicon, const ModelFn& model_fn);

}  // namespace mucs::mutation

#endif  // MUCS_MUTATION_HPP_
