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

// Corpus BLEU-4 and perplexity.

#include <array>
#include <span>
#include <string>
#include <vector>

#include "minnmt/decoding.hpp"
#include "minnmt/textpipe.hpp"

namespace minnmt {

struct BleuReport {
  double bleu = 0;                         // percent
  std::array<double, 4> precisions{};      // clipped n-gram precisions
  std::array<std::size_t, 4> matches{};    // clipped n-gram matches
  std::array<std::size_t, 4> totals{};     // candidate n-grams
  double brevity_penalty = 0;
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;
};

/// Corpus-level BLEU-4 over tokenized text. An order with no candidate
/// n-grams at all counts as precision 1. With `smooth`, every precision is
/// (matches + 1) / (totals + 1).
BleuReport bleu(std::span<const std::vector<std::string>> candidates,
                std::span<const std::vector<std::string>> references, bool smooth = false);

struct PerplexityReport {
  double perplexity = 1;
  double nll = 0;
  std::size_t tokens = 0;
};

/// exp(total NLL / total predicted target tokens), each target followed by
/// </s>. Target features are scored when the model has target factors.
PerplexityReport corpus_perplexity(const StepModel& model, std::span<const SentencePair> pairs);

}  // namespace minnmt
