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

// Seeded copy task: the target repeats the source.

#include <vector>

#include "minnmt/model_config.hpp"
#include "minnmt/random.hpp"
#include "minnmt/textpipe.hpp"

namespace minnmt::testing {

/// `words` regular types (ids 4 .. 4 + words - 1), lengths uniform in [1, max_len].
inline std::vector<SentencePair> copy_task(std::size_t n, std::size_t words, std::size_t max_len, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SentencePair> out(n);
  for (auto& p : out) {
    const std::size_t len = 1 + rng.below(max_len);
    for (std::size_t i = 0; i < len; ++i)
      p.src.push_back(Vocab::kNumSpecial + static_cast<std::int32_t>(rng.below(words)));
    p.tgt = p.src;
  }
  return out;
}

inline ModelConfig copy_config(std::size_t words = 20, std::size_t rnn = 64, std::size_t emb = 32) {
  ModelConfig c;
  c.num_layers = 1;
  c.rnn_size = rnn;
  c.embedding_dim = emb;
  c.cell = CellKind::kLstm;
  c.attention = AttentionKind::kDot;
  c.input_feed = true;
  c.dropout = 0.3;
  c.src_vocab_size = words + Vocab::kNumSpecial;
  c.tgt_vocab_size = words + Vocab::kNumSpecial;
  return c;
}

}  // namespace minnmt::testing
