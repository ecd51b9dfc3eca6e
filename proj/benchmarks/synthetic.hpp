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
// Deterministic copy-task data for the model benchmarks.

#include <vector>

#include "minnmt/model_config.hpp"
#include "minnmt/random.hpp"
#include "minnmt/textpipe.hpp"

namespace minnmt::bench {

inline std::vector<SentencePair> copy_pairs(std::size_t n, std::size_t words, std::size_t max_len, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SentencePair> out(n);
  for (auto& p : out) {
    for (std::size_t i = 0, len = 1 + rng.below(max_len); i < len; ++i)
      p.src.push_back(Vocab::kNumSpecial + static_cast<std::int32_t>(rng.below(words)));
    p.tgt = p.src;
  }
  return out;
}

inline ModelConfig bench_config(std::size_t vocab, std::size_t rnn, std::size_t emb) {
  ModelConfig c;
  c.num_layers = 2;
  c.rnn_size = rnn;
  c.embedding_dim = emb;
  c.attention = AttentionKind::kGeneral;
  c.dropout = 0;
  c.src_vocab_size = vocab;
  c.tgt_vocab_size = vocab;
  return c;
}

}  // namespace minnmt::bench
