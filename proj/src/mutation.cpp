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

#include "mucs/mutation.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "mucs/errors.hpp"

namespace mucs::mutation {

namespace {

constexpr std::string_view kPunctuationMarks[] = {".", ",", ";", ":", "?", "!"};

bool is_word_byte(unsigned char c) {
  return std::isalnum(c) || c == '_' || c >= 0x80;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Select `n` distinct indices of `pool` uniformly, in draw order.
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool,
                                                    std::size_t n, Rng& rng) {
  n = std::min(n, pool.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  return pool;
}

// Remove the word token at `pos` together with one adjacent whitespace
// token so the surrounding spacing stays single.
void erase_word(std::vector<Token>& tokens, std::size_t pos) {
  tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(pos));
  if (pos < tokens.size() && tokens[pos].kind == Token::Kind::whitespace) {
    tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(pos));
  } else if (pos > 0 && tokens[pos - 1].kind == Token::Kind::whitespace) {
    tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(pos - 1));
  }
}

// Insert a token at word boundary `b` (0..word_count): before the first
// word for b == 0, otherwise right after word b-1, separated by a space.
void insert_at_boundary(std::vector<Token>& tokens, std::size_t b, Token tok) {
  std::vector<std::size_t> words;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i].kind == Token::Kind::word) words.push_back(i);
  if (b == 0) {
    const std::size_t at = words.empty() ? 0 : words.front();
    auto it = tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(at), std::move(tok));
    tokens.insert(it + 1, Token{Token::Kind::whitespace, " "});
  } else {
    const std::size_t at = words[b - 1] + 1;
    auto it = tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(at),
                            Token{Token::Kind::whitespace, " "});
    tokens.insert(it + 1, std::move(tok));
  }
}

std::string leading_whitespace(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  return std::string(line.substr(0, i));
}

std::string fresh_suffix(Rng& rng) { return std::to_string(rng.below(1000000000)); }

// Indentation for a statement inserted below `line`: reuse its indentation,
// one level deeper when the line opens a block.
std::string insert_indent(const CodeLine& line) {
  std::string indent = leading_whitespace(line.text);
  std::string_view t = trim(line.text);
  if (!t.empty() && t.back() == '{') indent += "    ";
  return indent;
}

OpResult insert_below(const CodeScan& scan, std::size_t line_index, std::string statement) {
  CodeScan copy = scan;
  copy.lines.insert(copy.lines.begin() + static_cast<std::ptrdiff_t>(line_index) + 1,
                    CodeLine{std::move(statement), 0, StatementKind::other});
  return {copy.reassemble(), true};
}

}  // namespace

bool is_text_op(OpKind kind) {
  switch (kind) {
    case OpKind::synonym_replacement:
    case OpKind::random_deletion:
    case OpKind::random_insertion:
    case OpKind::random_swap:
    case OpKind::punctuation_insertion:
      return true;
    default:
      return false;
  }
}

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::synonym_replacement: return "synonym_replacement";
    case OpKind::random_deletion: return "random_deletion";
    case OpKind::random_insertion: return "random_insertion";
    case OpKind::random_swap: return "random_swap";
    case OpKind::punctuation_insertion: return "punctuation_insertion";
    case OpKind::print_adding: return "print_adding";
    case OpKind::local_variable_adding: return "local_variable_adding";
    case OpKind::dead_if_adding: return "dead_if_adding";
    case OpKind::duplication: return "duplication";
  }
  return "unknown";
}

std::optional<OpKind> op_from_name(std::string_view name) {
  for (OpKind k : {OpKind::synonym_replacement, OpKind::random_deletion,
                   OpKind::random_insertion, OpKind::random_swap,
                   OpKind::punctuation_insertion, OpKind::print_adding,
                   OpKind::local_variable_adding, OpKind::dead_if_adding,
                   OpKind::duplication}) {
    if (op_name(k) == name) return k;
  }
  return std::nullopt;
}

std::vector<OpKind> default_op_pool(PromptKind kind) {
  std::vector<OpKind> pool = {OpKind::synonym_replacement, OpKind::random_deletion,
                              OpKind::random_insertion, OpKind::random_swap,
                              OpKind::punctuation_insertion};
  if (kind == PromptKind::code) {
    pool.insert(pool.end(), {OpKind::print_adding, OpKind::local_variable_adding,
                             OpKind::dead_if_adding, OpKind::duplication});
  }
  return pool;
}

SynonymLexicon SynonymLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon file '" + path.string() + "'");
  SynonymLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("lexicon line " + std::to_string(line_no) + ": missing tab separator");
    const std::string word = ascii_lower(trim(std::string_view(line).substr(0, tab)));
    if (word.empty())
      throw DataError("lexicon line " + std::to_string(line_no) + ": empty word");
    std::vector<std::string> syns;
    std::string_view rest = std::string_view(line).substr(tab + 1);
    while (!rest.empty()) {
      const std::size_t comma = rest.find(',');
      std::string_view piece = rest.substr(0, comma);
      piece = trim(piece);
      if (!piece.empty()) syns.emplace_back(piece);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    if (!syns.empty()) lex.entries_[word] = std::move(syns);
  }
  return lex;
}

SynonymLexicon SynonymLexicon::from_entries(
    std::vector<std::pair<std::string, std::vector<std::string>>> entries) {
  SynonymLexicon lex;
  for (auto& [word, syns] : entries)
    if (!syns.empty()) lex.entries_[ascii_lower(word)] = std::move(syns);
  return lex;
}

std::span<const std::string> SynonymLexicon::lookup(std::string_view word) const {
  auto it = entries_.find(ascii_lower(word));
  if (it == entries_.end()) return {};
  return it->second;
}

TokenizedPrompt TokenizedPrompt::tokenize(std::string_view text) {
  TokenizedPrompt out;
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    Token::Kind kind;
    std::size_t j = i;
    if (std::isspace(c)) {
      kind = Token::Kind::whitespace;
      while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    } else if (is_word_byte(c)) {
      kind = Token::Kind::word;
      while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
    } else {
      kind = Token::Kind::punct;
      j = i + 1;
    }
    out.tokens.push_back(Token{kind, std::string(text.substr(i, j - i))});
    i = j;
  }
  return out;
}

std::string TokenizedPrompt::detokenize() const {
  std::string out;
  for (const Token& t : tokens) out += t.text;
  return out;
}

std::vector<std::size_t> TokenizedPrompt::word_positions() const {
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i].kind == Token::Kind::word) pos.push_back(i);
  return pos;
}

std::size_t TokenizedPrompt::word_count() const { return word_positions().size(); }

CodeScan CodeScan::scan(std::string_view code) {
  CodeScan out;
  out.trailing_newline = !code.empty() && code.back() == '\n';

  std::vector<std::string> raw_lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= code.size(); ++i) {
    if (i == code.size() || code[i] == '\n') {
      if (!(i == code.size() && out.trailing_newline))
        raw_lines.emplace_back(code.substr(start, i - start));
      start = i + 1;
    }
  }

  int depth = 0;
  bool in_block_comment = false;
  for (const std::string& raw : raw_lines) {
    std::string effective;  // code chars outside comments and literals
    bool in_string = false, in_char = false;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const char c = raw[i];
      if (in_block_comment) {
        if (c == '*' && i + 1 < raw.size() && raw[i + 1] == '/') {
          in_block_comment = false;
          ++i;
        }
        continue;
      }
      if (in_string) {
        if (c == '\\') ++i;
        else if (c == '"') in_string = false;
        continue;
      }
      if (in_char) {
        if (c == '\\') ++i;
        else if (c == '\'') in_char = false;
        continue;
      }
      if (c == '/' && i + 1 < raw.size() && raw[i + 1] == '/') break;
      if (c == '/' && i + 1 < raw.size() && raw[i + 1] == '*') {
        in_block_comment = true;
        ++i;
        continue;
      }
      if (c == '"') {
        in_string = true;
        continue;
      }
      if (c == '\'') {
        in_char = true;
        continue;
      }
      if (c == '{') ++depth;
      if (c == '}') --depth;
      effective += c;
    }

    CodeLine line;
    line.text = raw;
    line.depth_end = depth;
    const std::string_view eff = trim(effective);
    if (!eff.empty() && eff.back() == ';') {
      bool has_assign = false;
      for (std::size_t i = 0; i < eff.size(); ++i) {
        if (eff[i] != '=') continue;
        const char prev = i > 0 ? eff[i - 1] : '\0';
        const char next = i + 1 < eff.size() ? eff[i + 1] : '\0';
        if (next == '=' || prev == '=' || prev == '<' || prev == '>' || prev == '!') continue;
        has_assign = true;
        break;
      }
      if (has_assign) {
        line.stmt = StatementKind::assignment;
      } else {
        // "Type name;" shape, excluding statement keywords.
        std::istringstream words{std::string(eff.substr(0, eff.size() - 1))};
        std::vector<std::string> parts;
        std::string w;
        while (words >> w) parts.push_back(w);
        static const char* kKeywords[] = {"return", "break",  "continue", "throw",
                                          "goto",   "case",   "import",   "package",
                                          "delete", "assert"};
        auto is_ident = [](const std::string& s) {
          if (s.empty()) return false;
          if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
          return std::all_of(s.begin(), s.end(), [](unsigned char c) {
            return std::isalnum(c) || c == '_';
          });
        };
        bool keyword = false;
        if (!parts.empty())
          for (const char* k : kKeywords)
            if (parts.front() == k) keyword = true;
        if (parts.size() >= 2 && !keyword && is_ident(parts.back()))
          line.stmt = StatementKind::declaration;
      }
    }
    out.lines.push_back(std::move(line));
  }
  out.balanced = depth == 0 && !in_block_comment;
  return out;
}

std::string CodeScan::reassemble() const {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out += lines[i].text;
    if (i + 1 < lines.size() || trailing_newline) out += '\n';
  }
  return out;
}

std::vector<std::size_t> CodeScan::eligible_lines() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < lines.size(); ++i)
    if (lines[i].depth_end >= 2) idx.push_back(i);
  return idx;
}

std::vector<std::size_t> CodeScan::eligible_assignments() const {
  std::vector<std::size_t> idx;
  for (std::size_t i : eligible_lines())
    if (lines[i].stmt == StatementKind::assignment) idx.push_back(i);
  return idx;
}

OpResult synonym_replacement(std::string_view prompt, int n, const SynonymLexicon& lexicon,
                             Rng& rng) {
  TokenizedPrompt tp = TokenizedPrompt::tokenize(prompt);
  std::vector<std::size_t> covered;
  for (std::size_t pos : tp.word_positions())
    if (!lexicon.lookup(tp.tokens[pos].text).empty()) covered.push_back(pos);
  if (covered.empty() || n < 1) return {std::string(prompt), false};
  const std::vector<std::size_t> chosen =
      sample_without_replacement(covered, static_cast<std::size_t>(n), rng);
  for (std::size_t pos : chosen) {
    const std::span<const std::string> syns = lexicon.lookup(tp.tokens[pos].text);
    tp.tokens[pos].text = syns[rng.below(syns.size())];
  }
  return {tp.detokenize(), true};
}

OpResult random_deletion(std::string_view prompt, double t_delete, Rng& rng) {
  TokenizedPrompt tp = TokenizedPrompt::tokenize(prompt);
  const std::vector<std::size_t> words = tp.word_positions();
  if (words.size() < 2) return {std::string(prompt), false};
  std::vector<bool> doomed(words.size(), false);
  std::size_t doomed_count = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (rng.unit() < t_delete) {
      doomed[i] = true;
      ++doomed_count;
    }
  }
  if (doomed_count == words.size()) {
    // Never empty the prompt: keep one uniformly chosen word.
    doomed[rng.below(words.size())] = false;
    --doomed_count;
  }
  if (doomed_count == 0) return {std::string(prompt), false};
  for (std::size_t i = words.size(); i-- > 0;)
    if (doomed[i]) erase_word(tp.tokens, words[i]);
  return {tp.detokenize(), true};
}

OpResult random_insertion(std::string_view prompt, int n, const SynonymLexicon& lexicon,
                          Rng& rng) {
  TokenizedPrompt tp = TokenizedPrompt::tokenize(prompt);
  std::vector<std::size_t> covered;
  for (std::size_t pos : tp.word_positions())
    if (!lexicon.lookup(tp.tokens[pos].text).empty()) covered.push_back(pos);
  if (covered.empty() || n < 1 || tp.word_count() == 0) return {std::string(prompt), false};
  // Selection happens on the original prompt; resolve the chosen words
  // before any insertion shifts token positions.
  std::vector<std::string> chosen_words;
  for (std::size_t pos : sample_without_replacement(covered, static_cast<std::size_t>(n), rng))
    chosen_words.push_back(tp.tokens[pos].text);
  for (const std::string& word : chosen_words) {
    const std::span<const std::string> syns = lexicon.lookup(word);
    const std::string synonym = syns[rng.below(syns.size())];
    const std::size_t boundary = rng.below(tp.word_count() + 1);
    insert_at_boundary(tp.tokens, boundary, Token{Token::Kind::word, synonym});
  }
  return {tp.detokenize(), true};
}

OpResult random_swap(std::string_view prompt, Rng& rng) {
  TokenizedPrompt tp = TokenizedPrompt::tokenize(prompt);
  const std::vector<std::size_t> words = tp.word_positions();
  if (words.size() < 2) return {std::string(prompt), false};
  const std::size_t i = rng.below(words.size());
  std::size_t j = rng.below(words.size() - 1);
  if (j >= i) ++j;
  std::swap(tp.tokens[words[i]].text, tp.tokens[words[j]].text);
  return {tp.detokenize(), true};
}

OpResult punctuation_insertion(std::string_view prompt, int n, Rng& rng) {
  TokenizedPrompt tp = TokenizedPrompt::tokenize(prompt);
  if (tp.word_count() == 0 || n < 1) return {std::string(prompt), false};
  for (int i = 0; i < n; ++i) {
    const std::string_view mark = kPunctuationMarks[rng.below(std::size(kPunctuationMarks))];
    const std::size_t boundary = rng.below(tp.word_count() + 1);
    insert_at_boundary(tp.tokens, boundary, Token{Token::Kind::punct, std::string(mark)});
  }
  return {tp.detokenize(), true};
}

OpResult print_adding(std::string_view code, Rng& rng) {
  const CodeScan scan = CodeScan::scan(code);
  const std::vector<std::size_t> sites = scan.eligible_lines();
  if (sites.empty()) return {std::string(code), false};
  const std::size_t at = sites[rng.below(sites.size())];
  const std::string stmt = insert_indent(scan.lines[at]) + "System.out.println(\"trace_" +
                           fresh_suffix(rng) + "\");";
  return insert_below(scan, at, stmt);
}

OpResult local_variable_adding(std::string_view code, Rng& rng) {
  const CodeScan scan = CodeScan::scan(code);
  const std::vector<std::size_t> sites = scan.eligible_lines();
  if (sites.empty()) return {std::string(code), false};
  const std::size_t at = sites[rng.below(sites.size())];
  const std::string stmt =
      insert_indent(scan.lines[at]) + "int aux_" + fresh_suffix(rng) + " = 0;";
  return insert_below(scan, at, stmt);
}

OpResult dead_if_adding(std::string_view code, Rng& rng) {
  const CodeScan scan = CodeScan::scan(code);
  const std::vector<std::size_t> sites = scan.eligible_lines();
  if (sites.empty()) return {std::string(code), false};
  const std::size_t at = sites[rng.below(sites.size())];
  const std::string stmt = insert_indent(scan.lines[at]) + "if (false) { int aux_" +
                           fresh_suffix(rng) + " = 0; }";
  return insert_below(scan, at, stmt);
}

OpResult duplication(std::string_view code, Rng& rng) {
  const CodeScan scan = CodeScan::scan(code);
  const std::vector<std::size_t> sites = scan.eligible_assignments();
  if (sites.empty()) return {std::string(code), false};
  const std::size_t at = sites[rng.below(sites.size())];
  return insert_below(scan, at, scan.lines[at].text);
}

OpResult apply_op(const MutationOp& op, std::string_view prompt, PromptKind kind,
                  const SynonymLexicon& lexicon, Rng& rng) {
  if (!is_text_op(op.kind) && kind != PromptKind::code)
    throw ConfigError(std::string(op_name(op.kind)) + " applies only to code prompts");
  switch (op.kind) {
    case OpKind::synonym_replacement: return synonym_replacement(prompt, op.n, lexicon, rng);
    case OpKind::random_deletion: return random_deletion(prompt, op.t_delete, rng);
    case OpKind::random_insertion: return random_insertion(prompt, op.n, lexicon, rng);
    case OpKind::random_swap: return random_swap(prompt, rng);
    case OpKind::punctuation_insertion: return punctuation_insertion(prompt, op.n, rng);
    case OpKind::print_adding: return print_adding(prompt, rng);
    case OpKind::local_variable_adding: return local_variable_adding(prompt, rng);
    case OpKind::dead_if_adding: return dead_if_adding(prompt, rng);
    case OpKind::duplication: return duplication(prompt, rng);
  }
  throw ConfigError("unknown mutation operator");
}

MutantResult make_mutant(std::string_view prompt, PromptKind kind, int K,
                         std::span<const MutationOp> op_pool, const SynonymLexicon& lexicon,
                         Rng& rng) {
  if (K < 1) throw ConfigError("perturbation size K must be >= 1");
  if (op_pool.empty()) throw ConfigError("mutation operator pool must be non-empty");
  MutantResult result;
  result.text = std::string(prompt);
  result.chain.reserve(static_cast<std::size_t>(K));
  for (int j = 0; j < K; ++j) {
    const MutationOp& op = op_pool[rng.below(op_pool.size())];
    OpResult applied = apply_op(op, result.text, kind, lexicon, rng);
    result.chain.push_back({op.kind, applied.applied});
    result.text = std::move(applied.text);
  }
  return result;
}

SmoothResult mucs_smooth(const TestItem& item, const MucsConfig& cfg,
                         const SynonymLexicon& lexicon, const ModelFn& model_fn) {
  if (cfg.n_mutants < 1) throw ConfigError("n_mutants must be >= 1");
  std::vector<MutationOp> pool = cfg.op_pool;
  if (pool.empty())
    for (OpKind k : default_op_pool(item.kind)) pool.push_back(MutationOp{k});
  for (const MutationOp& op : pool)
    if (!is_text_op(op.kind) && item.kind != PromptKind::code)
      throw ConfigError("operator pool contains code refactorings but the task is text");

  Rng rng(mix_seed(cfg.seed, item.id));
  SmoothResult out;
  out.mutants.item_id = item.id;
  out.mutant_texts.reserve(static_cast<std::size_t>(cfg.n_mutants));
  for (int i = 0; i < cfg.n_mutants; ++i)
    out.mutant_texts.push_back(make_mutant(item.prompt, item.kind, cfg.K, pool, lexicon, rng));

  for (const MutantResult& mutant : out.mutant_texts) {
    try {
      ProbVector v = model_fn(mutant.text);
      out.mutants.mutant_labels.push_back(v.argmax());
      out.mutants.mutant_probs.push_back(std::move(v));
    } catch (const Error&) {
      ++out.failed_queries;
    }
  }

  if (out.failed_queries == 0)
    out.record = PredictionRecord::make(item.id, mean_prob_vector(out.mutants.mutant_probs),
                                        RecordSource::smoothed, item.true_label);
  return out;
}

}  // namespace mucs::mutation
