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

// Beam search over any StepModel, batched translation and teacher-forced
// scoring.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "minnmt/decoding.hpp"

namespace minnmt {

enum class LengthNorm { kNone, kByLength };

struct BeamConfig {
  std::size_t beam_size = 5;
  std::size_t max_length = 0;  // output tokens including </s>; 0 means 2*S + 5
  std::size_t n_best = 1;
  LengthNorm length_norm = LengthNorm::kNone;

  void validate() const;
  std::size_t max_length_for(std::size_t source_length) const {
    return max_length ? max_length : 2 * source_length + 5;
  }
};

struct Hypothesis {
  std::vector<std::int32_t> tokens;                // ends with </s>
  std::vector<std::vector<std::int32_t>> features;  // per target factor, aligned with tokens
  double score = 0;                                // sum of chosen log-probs, word and features
  double rank_score = 0;                           // score, or score / length under length norm
};

/// Reported once per sentence per search step.
struct BeamStep {
  std::size_t sentence = 0;  // index into the sources passed to the search
  std::size_t step = 0;
  std::vector<double> kept;  // scores of the kept candidates, best first
  double best_pruned = 0;    // -inf when nothing was pruned
  bool last = false;         // the search for this sentence ended at this step
};
using BeamObserver = std::function<void(const BeamStep&)>;

/// Searches all sources together, sharing encoder and decoder steps.
/// Returns up to n_best hypotheses per source, best first.
std::vector<std::vector<Hypothesis>> beam_search_batch(const StepModel& model, std::span<const SourceSentence> sources,
                                                       const BeamConfig& beam, const BeamObserver& observer = {});

std::vector<Hypothesis> beam_search(const StepModel& model, const SourceSentence& source, const BeamConfig& beam,
                                    const BeamObserver& observer = {});

struct ThroughputStats {
  std::size_t sentences = 0;
  std::size_t source_tokens = 0;
  double seconds = 0;
  double tokens_per_second = 0;
};

struct Translations {
  std::vector<std::vector<Hypothesis>> nbest;  // input order
  ThroughputStats stats;
};

/// Buckets sources by length into batches of at most batch_size and decodes
/// each batch together. An empty source yields a lone </s> with score 0.
Translations translate_batch(const StepModel& model, std::span<const SourceSentence> sources, const BeamConfig& beam,
                             std::size_t batch_size);

struct PairScore {
  double log_prob = 0;
  double perplexity = 1;
  std::size_t tokens = 0;  // target tokens plus </s>
};

/// Teacher-forced log-probability of tgt followed by </s>. If target
/// features are given they must cover tgt plus the final position, and their
/// log-probs are added.
PairScore score_pair(const StepModel& model, const SourceSentence& source, std::span<const std::int32_t> tgt,
                     std::span<const std::vector<std::int32_t>> tgt_features = {});

}  // namespace minnmt
