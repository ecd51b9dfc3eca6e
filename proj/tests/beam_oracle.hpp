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

// Exhaustive search oracle for beam search.

#include <limits>
#include <vector>

#include "minnmt/decoding.hpp"
#include "minnmt/textpipe.hpp"
#include "minnmt/translate.hpp"

namespace minnmt::testing {

// Scores every sequence of at most max_len tokens ending in </s> with
// teacher forcing and returns the best.
struct Enumerated {
  std::vector<std::int32_t> tokens;
  double score = -std::numeric_limits<double>::infinity();
};

inline void enumerate(const StepModel& m, const SourceSentence& src, std::vector<std::int32_t>& prefix, std::size_t max_len,
               Enumerated& best) {
  const double s = score_pair(m, src, prefix).log_prob;
  if (s > best.score) {
    best.score = s;
    best.tokens = prefix;
    best.tokens.push_back(Vocab::kEos);
  }
  if (prefix.size() + 1 >= max_len) return;
  for (std::int32_t v = 0; v < static_cast<std::int32_t>(m.config().tgt_vocab_size); ++v) {
    if (v == Vocab::kPad || v == Vocab::kBos || v == Vocab::kEos) continue;
    prefix.push_back(v);
    enumerate(m, src, prefix, max_len, best);
    prefix.pop_back();
  }
}

}  // namespace minnmt::testing
