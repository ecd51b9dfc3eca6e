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

#include "minnmt/textpipe.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include "minnmt/error.hpp"

namespace minnmt {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  if ((lead & 0xF8) == 0xF0) return 4;
  return 1;
}

// Decodes one code point; invalid sequences decode as U+FFFD and consume a byte.
char32_t decode(std::string_view ch) {
  const auto b = [&](std::size_t i) { return static_cast<unsigned char>(ch[i]); };
  switch (ch.size()) {
    case 1: return b(0) < 0x80 ? b(0) : 0xFFFD;
    case 2: return ((b(0) & 0x1F) << 6) | (b(1) & 0x3F);
    case 3: return ((b(0) & 0x0F) << 12) | ((b(1) & 0x3F) << 6) | (b(2) & 0x3F);
    default: return ((b(0) & 0x07) << 18) | ((b(1) & 0x3F) << 12) | ((b(2) & 0x3F) << 6) | (b(3) & 0x3F);
  }
}

struct Range {
  char32_t lo, hi;
};

// Punctuation, symbols and separators outside ASCII. Everything else above
// U+007F counts as a word character (letters, digits, marks).
constexpr Range kNonWord[] = {
    {0x0080, 0x00A9}, {0x00AB, 0x00B1}, {0x00B4, 0x00B4}, {0x00B6, 0x00B8}, {0x00BB, 0x00BB},
    {0x00BF, 0x00BF}, {0x00D7, 0x00D7}, {0x00F7, 0x00F7}, {0x02C2, 0x02C5}, {0x02D2, 0x02DF},
    {0x037E, 0x037E}, {0x0387, 0x0387}, {0x055A, 0x055F}, {0x0589, 0x058A}, {0x05BE, 0x05BE},
    {0x05C0, 0x05C0}, {0x05C3, 0x05C3}, {0x05C6, 0x05C6}, {0x05F3, 0x05F4}, {0x0609, 0x060D},
    {0x061B, 0x061B}, {0x061D, 0x061F}, {0x066A, 0x066D}, {0x06D4, 0x06D4}, {0x0964, 0x0965},
    {0x0970, 0x0970}, {0x0E3F, 0x0E3F}, {0x0E4F, 0x0E4F}, {0x0E5A, 0x0E5B}, {0x10FB, 0x10FB},
    {0x1360, 0x1368}, {0x166D, 0x166E}, {0x2000, 0x206F}, {0x20A0, 0x20CF}, {0x2100, 0x2101},
    {0x2103, 0x2106}, {0x2108, 0x2109}, {0x2114, 0x2114}, {0x2116, 0x2118}, {0x211E, 0x2123},
    {0x2125, 0x2125}, {0x2127, 0x2127}, {0x2129, 0x2129}, {0x212E, 0x212E}, {0x213A, 0x213B},
    {0x2140, 0x2144}, {0x214A, 0x214D}, {0x214F, 0x214F}, {0x2190, 0x245F}, {0x2500, 0x2775},
    {0x2794, 0x2BFF}, {0x2E00, 0x2E7F}, {0x3000, 0x3004}, {0x3008, 0x3020}, {0x3030, 0x3030},
    {0x303D, 0x303F}, {0x30A0, 0x30A0}, {0x30FB, 0x30FB}, {0xFD3E, 0xFD3F}, {0xFE10, 0xFE19},
    {0xFE30, 0xFE6F}, {0xFEFF, 0xFEFF}, {0xFF01, 0xFF0F}, {0xFF1A, 0xFF20}, {0xFF3B, 0xFF40},
    {0xFF5B, 0xFF65}, {0xFFE0, 0xFFEE}, {0xFFF9, 0xFFFD}, {0x1F000, 0x1FAFF},
};

std::string_view strip_prefix(std::string_view s, std::string_view p) {
  return s.starts_with(p) ? s.substr(p.size()) : s;
}

std::string_view strip_suffix(std::string_view s, std::string_view p) {
  return s.ends_with(p) ? s.substr(0, s.size() - p.size()) : s;
}

}  // namespace

bool is_word_codepoint(char32_t cp) {
  if (cp < 0x80) return (cp >= '0' && cp <= '9') || (cp >= 'A' && cp <= 'Z') || (cp >= 'a' && cp <= 'z');
  const auto* it = std::upper_bound(std::begin(kNonWord), std::end(kNonWord), cp,
                                    [](char32_t c, const Range& r) { return c < r.lo; });
  if (it == std::begin(kNonWord)) return true;
  return cp > std::prev(it)->hi;
}

std::vector<std::string_view> utf8_chars(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t n = utf8_length(static_cast<unsigned char>(text[i]));
    bool ok = i + n <= text.size();
    for (std::size_t k = 1; ok && k < n; ++k) ok = (static_cast<unsigned char>(text[i + k]) & 0xC0) == 0x80;
    if (!ok) n = 1;
    out.push_back(text.substr(i, n));
    i += n;
  }
  return out;
}

std::string normalize_whitespace(std::string_view line) {
  std::string out;
  out.reserve(line.size());
  bool pending = false;
  for (char c : line) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view line, const TokenizerOptions& options) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (i == j) break;

    struct Segment {
      std::string text;
      bool word;
    };
    std::vector<Segment> segs;
    for (std::string_view ch : utf8_chars(line.substr(i, j - i))) {
      const bool word = is_word_codepoint(decode(ch));
      if (word && !segs.empty() && segs.back().word)
        segs.back().text += ch;
      else
        segs.push_back({std::string(ch), word});
    }
    for (std::size_t k = 0; k + 1 < segs.size(); ++k) {
      if (!segs[k + 1].word)
        segs[k + 1].text.insert(0, options.joiner);
      else
        segs[k].text += options.joiner;
    }
    for (auto& s : segs) tokens.push_back(std::move(s.text));
    i = j;
  }
  return tokens;
}

std::string detokenize(std::span<const std::string> tokens, const TokenizerOptions& options) {
  const std::string_view joiner = options.joiner;
  std::string out;
  bool glue_next = true;
  for (const std::string& tok : tokens) {
    std::string_view t = tok;
    const bool glue_prev = t.starts_with(joiner);
    if (!glue_next && !glue_prev) out.push_back(' ');
    t = strip_prefix(t, joiner);
    glue_next = t.ends_with(joiner);
    t = strip_suffix(t, joiner);
    out += t;
  }
  return out;
}

// ---------------------------------------------------------------------------

BpeModel learn_bpe(std::span<const std::string> tokens, std::size_t num_merges) {
  std::map<std::string, std::int64_t> counts;
  for (const std::string& t : tokens)
    if (!t.empty()) ++counts[t];
  return learn_bpe(counts, num_merges);
}

BpeModel learn_bpe(const std::map<std::string, std::int64_t>& word_counts, std::size_t num_merges) {
  using Pair = std::pair<std::string, std::string>;
  struct Word {
    std::vector<std::string> symbols;
    std::int64_t count;
  };
  std::vector<Word> words;
  for (const auto& [w, c] : word_counts) {
    if (w.empty() || c <= 0) continue;
    Word word{{}, c};
    for (std::string_view ch : utf8_chars(w)) word.symbols.emplace_back(ch);
    word.symbols.emplace_back(kEndOfWord);
    words.push_back(std::move(word));
  }

  std::map<Pair, std::int64_t> pair_counts;
  std::map<Pair, std::set<std::size_t>> where;
  auto account = [&](std::size_t wi, int sign) {
    const Word& w = words[wi];
    for (std::size_t k = 0; k + 1 < w.symbols.size(); ++k) {
      Pair p{w.symbols[k], w.symbols[k + 1]};
      auto it = pair_counts.try_emplace(p, 0).first;
      it->second += sign * w.count;
      if (sign > 0) where[p].insert(wi);
      if (it->second == 0) pair_counts.erase(it);
    }
  };
  for (std::size_t wi = 0; wi < words.size(); ++wi) account(wi, +1);

  BpeModel model;
  while (model.merges.size() < num_merges && !pair_counts.empty()) {
    auto best = pair_counts.begin();
    for (auto it = pair_counts.begin(); it != pair_counts.end(); ++it)
      if (it->second > best->second) best = it;
    const Pair merge = best->first;
    model.merges.push_back(merge);
    const std::string joined = merge.first + merge.second;

    const std::set<std::size_t> affected = std::move(where[merge]);
    where.erase(merge);
    for (std::size_t wi : affected) {
      account(wi, -1);
      std::vector<std::string>& s = words[wi].symbols;
      std::vector<std::string> merged;
      merged.reserve(s.size());
      for (std::size_t k = 0; k < s.size(); ++k) {
        if (k + 1 < s.size() && s[k] == merge.first && s[k + 1] == merge.second) {
          merged.push_back(joined);
          ++k;
        } else {
          merged.push_back(std::move(s[k]));
        }
      }
      s = std::move(merged);
      account(wi, +1);
    }
  }
  return model;
}

BpeEncoder::BpeEncoder(const BpeModel& model, std::string continuation) : continuation_(std::move(continuation)) {
  for (std::size_t r = 0; r < model.merges.size(); ++r) rank_.try_emplace(model.merges[r], r);
}

std::vector<std::string> BpeEncoder::encode(std::string_view token) const {
  if (token.empty()) return {};
  if (auto it = cache_.find(std::string(token)); it != cache_.end()) return it->second;

  std::vector<std::string> s;
  for (std::string_view ch : utf8_chars(token)) s.emplace_back(ch);
  s.emplace_back(kEndOfWord);
  while (s.size() > 1) {
    std::size_t best_rank = SIZE_MAX;
    const std::pair<std::string, std::string>* best = nullptr;
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
      auto it = rank_.find({s[k], s[k + 1]});
      if (it != rank_.end() && it->second < best_rank) {
        best_rank = it->second;
        best = &it->first;
      }
    }
    if (!best) break;
    std::vector<std::string> merged;
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (k + 1 < s.size() && s[k] == best->first && s[k + 1] == best->second) {
        merged.push_back(s[k] + s[k + 1]);
        ++k;
      } else {
        merged.push_back(std::move(s[k]));
      }
    }
    s = std::move(merged);
  }
  // Drop the end-of-word symbol from the final piece.
  if (s.back() == kEndOfWord)
    s.pop_back();
  else
    s.back().resize(s.back().size() - kEndOfWord.size());
  for (std::size_t k = 0; k + 1 < s.size(); ++k) s[k] += continuation_;
  cache_.emplace(std::string(token), s);
  return s;
}

std::vector<std::string> apply_bpe(const BpeModel& model, std::string_view token) {
  return BpeEncoder(model).encode(token);
}

std::vector<std::string> undo_bpe(std::span<const std::string> pieces, std::string_view continuation) {
  std::vector<std::string> out;
  bool open = false;
  for (const std::string& p : pieces) {
    std::string_view v = p;
    const bool continued = v.ends_with(continuation);
    if (continued) v = strip_suffix(v, continuation);
    if (open)
      out.back() += v;
    else
      out.emplace_back(v);
    open = continued;
  }
  return out;
}

void write_bpe(std::ostream& out, const BpeModel& model) {
  out << kBpeHeader << '\n';
  for (const auto& [a, b] : model.merges) out << a << ' ' << b << '\n';
}

BpeModel read_bpe(std::istream& in) {
  BpeModel model;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (number == 1 && line == kBpeHeader) continue;
    if (line.empty()) continue;
    const std::size_t sp = line.find(' ');
    if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size() || line.find(' ', sp + 1) != std::string::npos)
      throw FormatError("bpe codes line " + std::to_string(number) + ": expected two symbols");
    model.merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  return model;
}

// ---------------------------------------------------------------------------

namespace {
const char* const kSpecials[] = {"<pad>", "<unk>", "<s>", "</s>"};
}

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(std::vector<std::string> tokens) {
  tokens_.assign(std::begin(kSpecials), std::end(kSpecials));
  tokens_.insert(tokens_.end(), std::make_move_iterator(tokens.begin()), std::make_move_iterator(tokens.end()));
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    if (!index_.emplace(tokens_[i], static_cast<std::int32_t>(i)).second)
      throw FormatError("duplicate vocabulary entry '" + tokens_[i] + "'");
}

std::int32_t Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

const std::string& Vocab::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw DimensionError("token id " + std::to_string(id) + " outside vocabulary of size " +
                         std::to_string(tokens_.size()));
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<std::string> Vocab::regular_tokens() const {
  return {tokens_.begin() + kNumSpecial, tokens_.end()};
}

std::vector<std::int32_t> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<std::int32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocab::decode(std::span<const std::int32_t> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (std::int32_t i : ids) out.push_back(token(i));
  return out;
}

Vocab build_vocab(std::span<const std::string> tokens, std::size_t max_size) {
  if (max_size <= static_cast<std::size_t>(Vocab::kNumSpecial))
    throw ConfigError("vocabulary size must exceed the 4 reserved entries, got " + std::to_string(max_size));
  std::map<std::string, std::int64_t> counts;
  for (const auto& t : tokens) ++counts[t];
  for (const char* s : kSpecials) counts.erase(s);
  std::vector<std::pair<std::string, std::int64_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = std::min(ranked.size(), max_size - Vocab::kNumSpecial);
  std::vector<std::string> kept;
  kept.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) kept.push_back(std::move(ranked[i].first));
  return Vocab(std::move(kept));
}

void write_vocab(std::ostream& out, const Vocab& vocab) {
  for (std::size_t i = Vocab::kNumSpecial; i < vocab.size(); ++i) out << vocab.tokens()[i] << '\n';
}

Vocab read_vocab(std::istream& in) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) throw FormatError("vocabulary line " + std::to_string(tokens.size() + 1) + " is empty");
    tokens.push_back(line);
  }
  return Vocab(std::move(tokens));
}

// ---------------------------------------------------------------------------

std::size_t Batch::target_tokens() const {
  std::size_t n = 0;
  for (std::size_t l : tgt_lengths) n += l - 1;
  return n;
}

std::size_t Batch::source_tokens() const { return std::accumulate(src_lengths.begin(), src_lengths.end(), std::size_t{0}); }

std::size_t Batch::padding_tokens() const {
  return rows * src_len - source_tokens() + rows * tgt_len -
         std::accumulate(tgt_lengths.begin(), tgt_lengths.end(), std::size_t{0});
}

Batch make_batch(std::span<const SentencePair> pairs, std::span<const std::size_t> order) {
  if (order.empty()) throw DimensionError("empty batch");
  Batch b;
  b.rows = order.size();
  const std::size_t src_factors = pairs[order[0]].src_features.size();
  const std::size_t tgt_factors = pairs[order[0]].tgt_features.size();
  for (std::size_t i : order) {
    const SentencePair& p = pairs[i];
    if (p.src.empty()) throw DimensionError("sentence pair " + std::to_string(i) + " has an empty source");
    if (p.src_features.size() != src_factors || p.tgt_features.size() != tgt_factors)
      throw DimensionError("sentence pair " + std::to_string(i) + " has a different number of features");
    for (const auto& f : p.src_features)
      if (f.size() != p.src.size()) throw DimensionError("source features misaligned in pair " + std::to_string(i));
    for (const auto& f : p.tgt_features)
      if (f.size() != p.tgt.size()) throw DimensionError("target features misaligned in pair " + std::to_string(i));
    b.src_len = std::max(b.src_len, p.src.size());
    b.tgt_len = std::max(b.tgt_len, p.tgt.size() + 2);
  }
  b.src.assign(b.rows * b.src_len, Vocab::kPad);
  b.tgt.assign(b.rows * b.tgt_len, Vocab::kPad);
  b.src_features.assign(src_factors, std::vector<std::int32_t>(b.rows * b.src_len, Vocab::kPad));
  b.tgt_features.assign(tgt_factors, std::vector<std::int32_t>(b.rows * b.tgt_len, Vocab::kPad));
  for (std::size_t r = 0; r < b.rows; ++r) {
    const SentencePair& p = pairs[order[r]];
    b.origin.push_back(order[r]);
    b.src_lengths.push_back(p.src.size());
    b.tgt_lengths.push_back(p.tgt.size() + 2);
    std::copy(p.src.begin(), p.src.end(), b.src.begin() + static_cast<std::ptrdiff_t>(r * b.src_len));
    std::int32_t* t = b.tgt.data() + r * b.tgt_len;
    t[0] = Vocab::kBos;
    std::copy(p.tgt.begin(), p.tgt.end(), t + 1);
    t[p.tgt.size() + 1] = Vocab::kEos;
    for (std::size_t f = 0; f < src_factors; ++f)
      std::copy(p.src_features[f].begin(), p.src_features[f].end(),
                b.src_features[f].begin() + static_cast<std::ptrdiff_t>(r * b.src_len));
    for (std::size_t f = 0; f < tgt_factors; ++f) {
      std::int32_t* tf = b.tgt_features[f].data() + r * b.tgt_len;
      tf[0] = Vocab::kBos;
      std::copy(p.tgt_features[f].begin(), p.tgt_features[f].end(), tf + 1);
      tf[p.tgt.size() + 1] = Vocab::kEos;
    }
  }
  return b;
}

std::vector<Batch> make_batches(std::span<const SentencePair> pairs, std::size_t batch_size,
                                std::uint64_t shuffle_seed) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pairs[a].src.size() < pairs[b].src.size(); });
  std::vector<Batch> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - i);
    batches.push_back(make_batch(pairs, std::span(order).subspan(i, n)));
  }
  Rng rng(shuffle_seed);
  rng.shuffle(batches);
  return batches;
}

std::pair<std::string, std::vector<std::string>> split_features(std::string_view token) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = token.find(kFeatureSeparator, start);
    parts.emplace_back(token.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
    if (at == std::string_view::npos) break;
    start = at + kFeatureSeparator.size();
  }
  std::string word = std::move(parts.front());
  parts.erase(parts.begin());
  return {std::move(word), std::move(parts)};
}

// ---------------------------------------------------------------------------

std::string escape_token(std::string_view token) {
  std::string out;
  out.reserve(token.size());
  for (char c : token) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case ' ': out += "\\s"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape_token(std::string_view escaped) {
  std::string out;
  out.reserve(escaped.size());
  for (std::size_t i = 0; i < escaped.size(); ++i) {
    if (escaped[i] != '\\') {
      out.push_back(escaped[i]);
      continue;
    }
    if (++i == escaped.size()) throw FormatError("dangling escape in '" + std::string(escaped) + "'");
    switch (escaped[i]) {
      case '\\': out.push_back('\\'); break;
      case 's': out.push_back(' '); break;
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      case 'r': out.push_back('\r'); break;
      default: throw FormatError("unknown escape '\\" + std::string(1, escaped[i]) + "'");
    }
  }
  return out;
}

void write_embeddings(std::ostream& out, const Vocab& vocab, const Tensor& embeddings) {
  if (embeddings.rank() != 2 || embeddings.shape()[0] != vocab.size())
    throw DimensionError("embedding matrix " + shape_string(embeddings.shape()) + " does not match vocabulary of " +
                         std::to_string(vocab.size()));
  const std::size_t dim = embeddings.shape()[1];
  out << vocab.size() << ' ' << dim << '\n';
  char buf[64];
  for (std::size_t r = 0; r < vocab.size(); ++r) {
    out << escape_token(vocab.tokens()[r]);
    for (std::size_t c = 0; c < dim; ++c) {
      auto res = std::to_chars(buf, buf + sizeof buf, embeddings.at(r, c));
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

Tensor load_embeddings(const std::filesystem::path& path, const Vocab& vocab, std::size_t dim, Rng& rng) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file " + path.string());
  return load_embeddings(in, vocab, dim, rng, path.string());
}

Tensor load_embeddings(std::istream& in, const Vocab& vocab, std::size_t dim, Rng& rng,
                       const std::string& source_name) {
  Tensor table({vocab.size(), dim});
  for (double& v : table.storage()) v = rng.uniform(-0.1, 0.1);

  auto fail = [&](std::size_t line, const std::string& what) -> FormatError {
    return FormatError(source_name + ":" + std::to_string(line) + ": " + what);
  };
  auto split = [](std::string_view s) {
    std::vector<std::string_view> f;
    std::size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
      std::size_t j = i;
      while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
      if (j > i) f.push_back(s.substr(i, j - i));
      i = j;
    }
    return f;
  };
  auto parse_size = [&](std::string_view s, std::size_t line) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw fail(line, "expected an integer, got '" + std::string(s) + "'");
    return v;
  };

  std::string line;
  if (!std::getline(in, line)) throw fail(1, "missing header");
  const auto header = split(line);
  if (header.size() != 2) throw fail(1, "header must be '<count> <dimension>'");
  const std::size_t count = parse_size(header[0], 1);
  const std::size_t file_dim = parse_size(header[1], 1);
  if (file_dim != dim)
    throw DimensionError(source_name + " has dimension " + std::to_string(file_dim) + ", model expects " +
                         std::to_string(dim));

  std::size_t rows = 0;
  std::size_t number = 1;
  std::vector<double> values(dim);
  while (std::getline(in, line)) {
    ++number;
    const auto fields = split(line);
    if (fields.empty()) continue;
    if (fields.size() != dim + 1)
      throw fail(number, "expected a word and " + std::to_string(dim) + " values, got " +
                             std::to_string(fields.size()) + " fields");
    for (std::size_t c = 0; c < dim; ++c) {
      std::string_view f = fields[c + 1];
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), values[c]);
      if (ec != std::errc{} || p != f.data() + f.size() || !std::isfinite(values[c]))
        throw fail(number, "bad value '" + std::string(f) + "'");
    }
    ++rows;
    const std::string word = unescape_token(fields[0]);
    if (!vocab.contains(word)) continue;
    const auto r = static_cast<std::size_t>(vocab.id(word));
    for (std::size_t c = 0; c < dim; ++c) table.storage()[r * dim + c] = values[c];
  }
  if (rows != count)
    throw fail(number, "header announces " + std::to_string(count) + " rows, file has " + std::to_string(rows));
  return table;
}

}  // namespace minnmt
