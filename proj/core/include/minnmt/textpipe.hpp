/* Copyright 2026 The minnmt Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "minnmt/random.hpp"
#include "minnmt/tensor.hpp"

namespace minnmt {

// ---------------------------------------------------------------------------
// Reversible tokenization

/// U+FFED HALFWIDTH BLACK SQUARE
inline constexpr std::string_view kJoiner = "\xEF\xBF\xAD";
/// U+2027 HYPHENATION POINT, marks a BPE piece continued by the next piece.
inline constexpr std::string_view kContinuation = "\xE2\x80\xA7";
/// U+FFE8 HALFWIDTH FORMS LIGHT VERTICAL, separates a word from its features.
inline constexpr std::string_view kFeatureSeparator = "\xEF\xBF\xA8";

struct TokenizerOptions {
  std::string joiner{kJoiner};
};

/// Collapse runs of ASCII whitespace to one space and trim both ends.
std::string normalize_whitespace(std::string_view line);

/// Split on whitespace and on word/punctuation boundaries. Letters, digits and
/// combining marks form words; every other character is its own token. Where
/// two tokens were adjacent in the input, the joiner is attached to the
/// punctuation side: "Hello, world!" -> Hello ￭, world ￭!
std::vector<std::string> tokenize(std::string_view line, const TokenizerOptions& options = {});

/// Inverse of tokenize on its image, modulo whitespace normalization.
std::string detokenize(std::span<const std::string> tokens, const TokenizerOptions& options = {});

/// True for code points treated as word characters.
bool is_word_codepoint(char32_t cp);

/// Split UTF-8 into code point substrings. Invalid bytes come out one by one.
std::vector<std::string_view> utf8_chars(std::string_view text);

// ---------------------------------------------------------------------------
// Byte pair encoding

inline constexpr std::string_view kEndOfWord = "</w>";

struct BpeModel {
  std::vector<std::pair<std::string, std::string>> merges;  // learning order

  std::size_t size() const { return merges.size(); }
  friend bool operator==(const BpeModel&, const BpeModel&) = default;
};

/// Learn up to `num_merges` merges from a token stream. Each word starts as
/// its characters plus an end-of-word symbol; the most frequent adjacent pair
/// is merged, ties going to the lexicographically smallest pair.
BpeModel learn_bpe(std::span<const std::string> tokens, std::size_t num_merges);
/// Same, from precomputed word counts.
BpeModel learn_bpe(const std::map<std::string, std::int64_t>& word_counts, std::size_t num_merges);

class BpeEncoder {
 public:
  explicit BpeEncoder(const BpeModel& model, std::string continuation = std::string(kContinuation));

  /// Split one token; every piece but the last carries the continuation
  /// marker. Memoized per distinct token.
  std::vector<std::string> encode(std::string_view token) const;

 private:
  std::map<std::pair<std::string, std::string>, std::size_t> rank_;
  std::string continuation_;
  mutable std::unordered_map<std::string, std::vector<std::string>> cache_;
};

std::vector<std::string> apply_bpe(const BpeModel& model, std::string_view token);

/// Glue pieces ending in the continuation marker to their successor.
std::vector<std::string> undo_bpe(std::span<const std::string> pieces,
                                  std::string_view continuation = kContinuation);

inline constexpr std::string_view kBpeHeader = "#minnmt-bpe v1";
void write_bpe(std::ostream& out, const BpeModel& model);
BpeModel read_bpe(std::istream& in);

// ---------------------------------------------------------------------------
// Vocabulary

class Vocab {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::int32_t kBos = 2;
  static constexpr std::int32_t kEos = 3;
  static constexpr std::int32_t kNumSpecial = 4;

  /// Specials only.
  Vocab();
  /// Non-special tokens in id order starting at kNumSpecial.
  explicit Vocab(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  std::int32_t id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::int32_t id) const;
  /// All tokens including specials, indexed by id.
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::vector<std::string> regular_tokens() const;

  std::vector<std::int32_t> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const std::int32_t> ids) const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

/// Most frequent tokens first, ties in lexicographic order, truncated so the
/// vocabulary including specials has at most `max_size` entries.
Vocab build_vocab(std::span<const std::string> tokens, std::size_t max_size);

/// One regular token per line; id = line number - 1 + 4.
void write_vocab(std::ostream& out, const Vocab& vocab);
Vocab read_vocab(std::istream& in);

// ---------------------------------------------------------------------------
// Batches

struct SentencePair {
  std::vector<std::int32_t> src;
  std::vector<std::int32_t> tgt;  // without <s>/</s>
  std::vector<std::vector<std::int32_t>> src_features;  // per factor, aligned with src
  std::vector<std::vector<std::int32_t>> tgt_features;  // per factor, aligned with tgt
};

/// Padded id matrices, row-major. Target rows are <s> w_1 .. w_n </s>.
struct Batch {
  std::size_t rows = 0;
  std::size_t src_len = 0;  // S_max
  std::size_t tgt_len = 0;  // T_max, counting <s> and </s>
  std::vector<std::int32_t> src;
  std::vector<std::int32_t> tgt;
  std::vector<std::size_t> src_lengths;
  std::vector<std::size_t> tgt_lengths;
  std::vector<std::vector<std::int32_t>> src_features;
  std::vector<std::vector<std::int32_t>> tgt_features;
  std::vector<std::size_t> origin;  // index of each row in the input list

  std::int32_t src_at(std::size_t row, std::size_t pos) const { return src[row * src_len + pos]; }
  std::int32_t tgt_at(std::size_t row, std::size_t pos) const { return tgt[row * tgt_len + pos]; }
  bool src_valid(std::size_t row, std::size_t pos) const { return pos < src_lengths[row]; }
  bool tgt_valid(std::size_t row, std::size_t pos) const { return pos < tgt_lengths[row]; }
  /// Non-pad target tokens that are predicted (everything after <s>).
  std::size_t target_tokens() const;
  std::size_t source_tokens() const;
  std::size_t padding_tokens() const;
};

/// Assemble one batch from the given pairs in the given order.
Batch make_batch(std::span<const SentencePair> pairs, std::span<const std::size_t> order);

/// Sort by source length (stable), cut into consecutive groups of
/// `batch_size`, then shuffle the group order with `shuffle_seed`.
std::vector<Batch> make_batches(std::span<const SentencePair> pairs, std::size_t batch_size,
                                std::uint64_t shuffle_seed);

/// Split "word￨f1￨f2" into the word and its features.
std::pair<std::string, std::vector<std::string>> split_features(std::string_view token);

// ---------------------------------------------------------------------------
// Embedding text files (word2vec text format)

/// Escape a token for a whitespace-delimited line: backslash, space, tab,
/// newline and carriage return become \\, \s, \t, \n, \r.
std::string escape_token(std::string_view token);
std::string unescape_token(std::string_view escaped);

/// Rows of `embeddings` ([|V|, D]) in id order, values in shortest
/// round-trip decimal form.
void write_embeddings(std::ostream& out, const Vocab& vocab, const Tensor& embeddings);

/// Rows for in-vocabulary words are copied from the file; every other row is
/// uniform in [-0.1, 0.1] from `rng`.
Tensor load_embeddings(const std::filesystem::path& path, const Vocab& vocab, std::size_t dim, Rng& rng);
Tensor load_embeddings(std::istream& in, const Vocab& vocab, std::size_t dim, Rng& rng,
                       const std::string& source_name = "<stream>");

}  // namespace minnmt
