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

// Attention encoder-decoder recorded on a tape.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "minnmt/model_config.hpp"
#include "minnmt/random.hpp"
#include "minnmt/tape.hpp"
#include "minnmt/textpipe.hpp"

namespace minnmt {

/// Inverted dropout between stacked layers: each unit is zeroed with
/// probability `rate` and survivors are scaled by 1 / (1 - rate).
struct Dropout {
  Rng* rng = nullptr;
  double rate = 0.0;

  bool active() const { return rng && rate > 0.0; }
  Var apply(Var x) const;
};

struct LstmWeights {
  Var Wx, Wh, b;
};

struct CellState {
  Var h;
  Var c;  // LSTM only
};

/// gates = x Wx + h Wh + b, split i, f, g, o.
/// c' = f*c + i*g, h' = o*tanh(c').
CellState lstm_step(Var x, CellState state, const LstmWeights& w);

struct GruWeights {
  Var Wx, Wh, Uc, b;
};

/// z, r = sigmoid(x Wx[:, :2r] + h Wh + b[:2r]),
/// n = tanh(x Wx[:, 2r:] + (r*h) Uc + b[2r:]), h' = (1-z)*h + z*n.
Var gru_step(Var x, Var h, const GruWeights& w);

/// Parameters of one model bound to one tape. Every parameter is registered
/// up front, so gradients cover all of them.
class ModelGraph {
 public:
  ModelGraph(Tape& tape, const ModelConfig& config, const ParamMap& params);

  Tape& tape() const { return *tape_; }
  const ModelConfig& config() const { return config_; }
  Var param(const std::string& name) const;

  CellState cell(const std::string& prefix, Var x, CellState state) const;
  CellState zero_state(std::size_t rows) const;

 private:
  Tape* tape_;
  ModelConfig config_;
  std::map<std::string, Var> vars_;
};

struct EncoderOut {
  Var memory;                       // [B, S, r], top layer
  std::vector<std::uint8_t> mask;   // [B, S], 1 at real tokens
  std::vector<CellState> final;     // per layer, state after each row's last token
  std::size_t rows = 0;
  std::size_t steps = 0;
};

/// Padded steps carry the previous state forward unchanged.
EncoderOut encode(const ModelGraph& g, const Batch& batch, const Dropout& dropout = {});

struct AttentionOut {
  Var context;  // [B, r]
  Var weights;  // [B, S]
  Var hidden;   // tanh([context; h_t] Wc), [B, r]
};

AttentionOut global_attention(const ModelGraph& g, Var h_t, const EncoderOut& enc);

struct DecoderState {
  std::vector<CellState> layers;
  std::optional<Var> feed;  // previous attentional hidden, input feeding only
};

/// Encoder final states per layer; zero input feed.
DecoderState initial_decoder_state(const ModelGraph& g, const EncoderOut& enc);

struct GeneratorOut {
  Var log_probs;                        // [B, Vt]
  std::vector<Var> feature_log_probs;   // per target factor, [B, Vf]
};

GeneratorOut generator_factored(const ModelGraph& g, Var hidden);

struct StepOut {
  GeneratorOut out;
  AttentionOut attention;
};

StepOut decode_step(const ModelGraph& g, std::span<const std::int32_t> prev_ids, DecoderState& state,
                    const EncoderOut& enc, const Dropout& dropout = {});

struct NllGraph {
  Var loss;                  // total NLL / tokens
  std::size_t tokens = 0;    // predicted target tokens
};

/// Teacher-forced negative log-likelihood, summed over non-pad target
/// positions (and target feature heads) and divided by the token count.
NllGraph forward_nll(const ModelGraph& g, const Batch& batch, const Dropout& dropout = {});

}  // namespace minnmt
