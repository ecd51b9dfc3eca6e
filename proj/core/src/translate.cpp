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

#include "minnmt/translate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "minnmt/error.hpp"
#include "minnmt/textpipe.hpp"

namespace minnmt {

void BeamConfig::validate() const {
  if (beam_size == 0) throw ConfigError("beam size must be at least 1");
  if (n_best == 0 || n_best > beam_size)
    throw ConfigError("n_best must be in [1, beam size], got " + std::to_string(n_best));
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Candidate {
  double score;
  std::int32_t token;
  std::size_t hyp;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.token != b.token) return a.token < b.token;
  return a.hyp < b.hyp;
}

struct Live {
  std::vector<std::int32_t> tokens;
  std::vector<std::vector<std::int32_t>> features;
  double score = 0;
};

struct Sentence {
  std::size_t max_length = 0;
  std::vector<Live> live;
  std::vector<Hypothesis> finished;
  bool done = false;
};

// Bounded best-first list with a record of the best candidate it rejected.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) { items_.reserve(k + 1); }

  void offer(const Candidate& c) {
    if (items_.size() == k_) {
      if (!better(c, items_.back())) {
        best_pruned_ = std::max(best_pruned_, c.score);
        return;
      }
      best_pruned_ = std::max(best_pruned_, items_.back().score);
      items_.pop_back();
    }
    items_.insert(std::upper_bound(items_.begin(), items_.end(), c, better), c);
  }
  const std::vector<Candidate>& items() const { return items_; }
  double best_pruned() const { return best_pruned_; }

 private:
  std::size_t k_;
  std::vector<Candidate> items_;
  double best_pruned_ = kNegInf;
};

double rank_of(double score, std::size_t length, LengthNorm norm) {
  return norm == LengthNorm::kByLength ? score / static_cast<double>(length) : score;
}

}  // namespace

std::vector<std::vector<Hypothesis>> beam_search_batch(const StepModel& model, std::span<const SourceSentence> sources,
                                                       const BeamConfig& beam, const BeamObserver& observer) {
  beam.validate();
  std::vector<std::vector<Hypothesis>> results(sources.size());
  if (sources.empty()) return results;
  const std::size_t k = beam.beam_size;
  const std::size_t factors = model.config().tgt_factors.size();

  std::vector<Sentence> sent(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    sent[i].max_length = beam.max_length_for(sources[i].ids.size());
    Live start;
    start.features.resize(factors);
    sent[i].live.push_back(std::move(start));
  }
  auto session = model.start(sources);
  StepResult out;
  std::vector<std::int32_t> prev;
  std::vector<std::size_t> parents;
  std::vector<double> feat_bonus;
  std::vector<std::vector<std::int32_t>> feat_best(factors);

  for (std::size_t t = 0;; ++t) {
    prev.clear();
    for (const auto& s : sent) {
      if (s.done) continue;
      for (const auto& h : s.live) prev.push_back(h.tokens.empty() ? Vocab::kBos : h.tokens.back());
    }
    if (prev.empty()) break;
    session->step(prev, out);
    const std::size_t rows = out.rows;

    // Target features are predicted independently of the word: take the
    // argmax of each factor and add its log-prob to every candidate.
    feat_bonus.assign(rows, 0.0);
    for (std::size_t f = 0; f < factors; ++f) {
      const std::size_t V = out.feature_vocab[f];
      feat_best[f].assign(rows, Vocab::kUnk);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* lp = out.feature_log_probs[f].data() + r * V;
        std::int32_t best = -1;
        for (std::size_t v = 0; v < V; ++v) {
          if (static_cast<std::int32_t>(v) == Vocab::kPad || static_cast<std::int32_t>(v) == Vocab::kBos) continue;
          if (best < 0 || lp[v] > lp[best]) best = static_cast<std::int32_t>(v);
        }
        feat_best[f][r] = best;
        feat_bonus[r] += lp[best];
      }
    }

    parents.clear();
    std::size_t row = 0, next_row = 0;
    for (std::size_t i = 0; i < sent.size(); ++i) {
      Sentence& s = sent[i];
      if (s.done) continue;
      const bool force_eos = t + 1 >= s.max_length;
      TopK top(k);
      const std::size_t first_row = row;
      for (std::size_t h = 0; h < s.live.size(); ++h, ++row) {
        const double* lp = out.row(row);
        const double base = s.live[h].score;
        for (std::size_t v = 0; v < out.vocab; ++v) {
          const auto tok = static_cast<std::int32_t>(v);
          if (tok == Vocab::kPad || tok == Vocab::kBos) continue;
          if (force_eos && tok != Vocab::kEos) continue;
          top.offer({base + lp[v] + feat_bonus[row], tok, h});
        }
      }

      std::vector<Live> next;
      BeamStep ev;
      ev.sentence = i;
      ev.step = t;
      ev.best_pruned = top.best_pruned();
      for (const Candidate& c : top.items()) {
        ev.kept.push_back(c.score);
        const Live& parent = s.live[c.hyp];
        Live child;
        child.tokens = parent.tokens;
        child.tokens.push_back(c.token);
        child.features = parent.features;
        for (std::size_t f = 0; f < factors; ++f) child.features[f].push_back(feat_best[f][first_row + c.hyp]);
        child.score = c.score;
        if (c.token == Vocab::kEos) {
          Hypothesis fin;
          fin.rank_score = rank_of(c.score, child.tokens.size(), beam.length_norm);
          fin.tokens = std::move(child.tokens);
          fin.features = std::move(child.features);
          fin.score = c.score;
          s.finished.push_back(std::move(fin));
        } else {
          parents.push_back(first_row + c.hyp);
          next.push_back(std::move(child));
        }
      }

      if (next.empty()) {
        s.done = true;
      } else if (s.finished.size() >= k) {
        std::vector<double> ranks;
        for (const auto& f : s.finished) ranks.push_back(f.rank_score);
        std::nth_element(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(k - 1), ranks.end(),
                         std::greater<>());
        const double bound = rank_of(next.front().score, s.max_length, beam.length_norm);
        if (bound <= ranks[k - 1]) s.done = true;
      }
      if (s.done) {
        parents.resize(parents.size() - next.size());
        next.clear();
      }
      next_row += next.size();
      s.live = std::move(next);
      ev.last = s.done;
      if (observer) observer(ev);
    }
    if (next_row == 0) break;
    session->reorder(parents);
  }

  for (std::size_t i = 0; i < sent.size(); ++i) {
    auto& fin = sent[i].finished;
    std::stable_sort(fin.begin(), fin.end(),
                     [](const Hypothesis& a, const Hypothesis& b) { return a.rank_score > b.rank_score; });
    if (fin.size() > beam.n_best) fin.resize(beam.n_best);
    results[i] = std::move(fin);
  }
  return results;
}

std::vector<Hypothesis> beam_search(const StepModel& model, const SourceSentence& source, const BeamConfig& beam,
                                    const BeamObserver& observer) {
  return std::move(beam_search_batch(model, std::span<const SourceSentence>(&source, 1), beam, observer).front());
}

Translations translate_batch(const StepModel& model, std::span<const SourceSentence> sources, const BeamConfig& beam,
                             std::size_t batch_size) {
  beam.validate();
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  const auto start = std::chrono::steady_clock::now();
  Translations tr;
  tr.nbest.resize(sources.size());
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    tr.stats.source_tokens += sources[i].ids.size();
    if (sources[i].ids.empty()) {
      Hypothesis h;
      h.tokens = {Vocab::kEos};
      h.features.assign(model.config().tgt_factors.size(), std::vector<std::int32_t>{Vocab::kEos});
      tr.nbest[i].push_back(std::move(h));
    } else {
      order.push_back(i);
    }
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sources[a].ids.size() < sources[b].ids.size(); });
  std::vector<SourceSentence> chunk;
  for (std::size_t pos = 0; pos < order.size(); pos += batch_size) {
    const std::size_t end = std::min(order.size(), pos + batch_size);
    chunk.clear();
    for (std::size_t j = pos; j < end; ++j) chunk.push_back(sources[order[j]]);
    auto res = beam_search_batch(model, chunk, beam);
    for (std::size_t j = pos; j < end; ++j) tr.nbest[order[j]] = std::move(res[j - pos]);
  }
  tr.stats.sentences = sources.size();
  tr.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  tr.stats.tokens_per_second =
      tr.stats.seconds > 0 ? static_cast<double>(tr.stats.source_tokens) / tr.stats.seconds : 0.0;
  return tr;
}

PairScore score_pair(const StepModel& model, const SourceSentence& source, std::span<const std::int32_t> tgt,
                     std::span<const std::vector<std::int32_t>> tgt_features) {
  const std::size_t T = tgt.size() + 1;
  if (!tgt_features.empty()) {
    if (tgt_features.size() != model.config().tgt_factors.size())
      throw DimensionError("score_pair got " + std::to_string(tgt_features.size()) + " target features, model has " +
                           std::to_string(model.config().tgt_factors.size()));
    for (const auto& f : tgt_features)
      if (f.size() != T)
        throw DimensionError("target feature row has " + std::to_string(f.size()) + " entries, expected " +
                             std::to_string(T));
  }
  auto session = model.start(std::span<const SourceSentence>(&source, 1));
  StepResult out;
  PairScore ps;
  ps.tokens = T;
  std::int32_t prev = Vocab::kBos;
  for (std::size_t t = 0; t < T; ++t) {
    session->step(std::span<const std::int32_t>(&prev, 1), out);
    const std::int32_t next = t < tgt.size() ? tgt[t] : Vocab::kEos;
    if (next < 0 || static_cast<std::size_t>(next) >= out.vocab)
      throw DimensionError("target id " + std::to_string(next) + " outside vocabulary of " + std::to_string(out.vocab));
    ps.log_prob += out.row(0)[next];
    for (std::size_t f = 0; f < tgt_features.size(); ++f) {
      const std::int32_t id = tgt_features[f][t];
      if (id < 0 || static_cast<std::size_t>(id) >= out.feature_vocab[f])
        throw DimensionError("target feature id " + std::to_string(id) + " out of range");
      ps.log_prob += out.feature_log_probs[f][static_cast<std::size_t>(id)];
    }
    prev = next;
  }
  ps.perplexity = std::exp(-ps.log_prob / static_cast<double>(T));
  return ps;
}

}  // namespace minnmt
