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

#include "minnmt/eval.hpp"

#include <cmath>
#include <map>

#include "minnmt/error.hpp"
#include "minnmt/translate.hpp"

namespace minnmt {

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[Ngram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

}  // namespace

BleuReport bleu(std::span<const std::vector<std::string>> candidates,
                std::span<const std::vector<std::string>> references, bool smooth) {
  if (candidates.size() != references.size())
    throw DimensionError("bleu: " + std::to_string(candidates.size()) + " candidates but " +
                         std::to_string(references.size()) + " references");
  BleuReport r;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    r.candidate_length += candidates[s].size();
    r.reference_length += references[s].size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto cand = ngram_counts(candidates[s], n);
      const auto ref = ngram_counts(references[s], n);
      for (const auto& [g, c] : cand) {
        r.totals[n - 1] += c;
        auto it = ref.find(g);
        if (it != ref.end()) r.matches[n - 1] += std::min(c, it->second);
      }
    }
  }
  bool any_zero = false;
  double log_sum = 0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (smooth)
      r.precisions[n] = static_cast<double>(r.matches[n] + 1) / static_cast<double>(r.totals[n] + 1);
    else
      r.precisions[n] = r.totals[n] == 0 ? 1.0 : static_cast<double>(r.matches[n]) / static_cast<double>(r.totals[n]);
    if (r.precisions[n] == 0) any_zero = true;
    else log_sum += std::log(r.precisions[n]);
  }
  if (r.candidate_length == 0)
    r.brevity_penalty = r.reference_length == 0 ? 1.0 : 0.0;
  else
    r.brevity_penalty = std::min(1.0, std::exp(1.0 - static_cast<double>(r.reference_length) /
                                                         static_cast<double>(r.candidate_length)));
  r.bleu = any_zero ? 0.0 : 100.0 * r.brevity_penalty * std::exp(log_sum / 4.0);
  return r;
}

PerplexityReport corpus_perplexity(const StepModel& model, std::span<const SentencePair> pairs) {
  if (pairs.empty()) throw DimensionError("corpus_perplexity: no pairs");
  const std::size_t factors = model.config().tgt_factors.size();
  PerplexityReport rep;
  for (const SentencePair& p : pairs) {
    SourceSentence src{p.src, p.src_features};
    std::vector<std::vector<std::int32_t>> feats;
    if (factors) {
      if (p.tgt_features.size() != factors) throw DimensionError("pair lacks target features");
      feats = p.tgt_features;
      for (auto& f : feats) f.push_back(Vocab::kEos);
    }
    const PairScore s = score_pair(model, src, p.tgt, feats);
    rep.nll -= s.log_prob;
    rep.tokens += s.tokens;
  }
  rep.perplexity = std::exp(rep.nll / static_cast<double>(rep.tokens));
  return rep;
}

}  // namespace minnmt
