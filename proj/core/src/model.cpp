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

#include "minnmt/model.hpp"

#include "minnmt/error.hpp"

namespace minnmt {

Var Dropout::apply(Var x) const {
  if (!active()) return x;
  const std::size_t n = shape_size(x.shape());
  std::vector<double> mask(n);
  const double keep = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng->uniform01() < rate ? 0.0 : keep;
  return mul_const(x, std::move(mask));
}

CellState lstm_step(Var x, CellState state, const LstmWeights& w) {
  const std::size_t r = state.h.dim(1);
  Var gates = add_row(add(matmul(x, w.Wx), matmul(state.h, w.Wh)), w.b);
  if (gates.dim(1) != 4 * r) throw DimensionError("lstm gates have width " + std::to_string(gates.dim(1)) + ", expected " + std::to_string(4 * r));
  Var i = sigmoid(slice_cols(gates, 0, r));
  Var f = sigmoid(slice_cols(gates, r, 2 * r));
  Var g = tanh(slice_cols(gates, 2 * r, 3 * r));
  Var o = sigmoid(slice_cols(gates, 3 * r, 4 * r));
  Var c = add(mul(f, state.c), mul(i, g));
  return {mul(o, tanh(c)), c};
}

Var gru_step(Var x, Var h, const GruWeights& w) {
  const std::size_t r = h.dim(1);
  Var xb = add_row(matmul(x, w.Wx), w.b);
  if (xb.dim(1) != 3 * r) throw DimensionError("gru input projection has width " + std::to_string(xb.dim(1)) + ", expected " + std::to_string(3 * r));
  Var zr = sigmoid(add(slice_cols(xb, 0, 2 * r), matmul(h, w.Wh)));
  Var z = slice_cols(zr, 0, r);
  Var reset = slice_cols(zr, r, 2 * r);
  Var cand = tanh(add(slice_cols(xb, 2 * r, 3 * r), matmul(mul(reset, h), w.Uc)));
  return add(mul(one_minus(z), h), mul(z, cand));
}

ModelGraph::ModelGraph(Tape& tape, const ModelConfig& config, const ParamMap& params)
    : tape_(&tape), config_(config) {
  check_parameters(config, params);
  for (const auto& [name, value] : params) vars_.emplace(name, tape.parameter(name, value));
}

Var ModelGraph::param(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw DimensionError("no parameter '" + name + "'");
  return it->second;
}

CellState ModelGraph::cell(const std::string& prefix, Var x, CellState state) const {
  if (config_.cell == CellKind::kLstm)
    return lstm_step(x, state, {param(prefix + "Wx"), param(prefix + "Wh"), param(prefix + "b")});
  return {gru_step(x, state.h, {param(prefix + "Wx"), param(prefix + "Wh"), param(prefix + "Uc"), param(prefix + "b")}),
          Var{}};
}

CellState ModelGraph::zero_state(std::size_t rows) const {
  const Tensor zeros = Tensor::zeros({rows, config_.rnn_size});
  CellState s{tape_->constant(zeros), Var{}};
  if (config_.cell == CellKind::kLstm) s.c = tape_->constant(zeros);
  return s;
}

namespace {

std::vector<std::int32_t> column(const std::vector<std::int32_t>& ids, std::size_t rows, std::size_t width,
                                 std::size_t pos) {
  std::vector<std::int32_t> out(rows);
  for (std::size_t b = 0; b < rows; ++b) out[b] = ids[b * width + pos];
  return out;
}

}  // namespace

EncoderOut encode(const ModelGraph& g, const Batch& batch, const Dropout& dropout) {
  const ModelConfig& c = g.config();
  if (batch.src_features.size() != c.src_factors.size())
    throw DimensionError("batch has " + std::to_string(batch.src_features.size()) + " source features, model expects " +
                         std::to_string(c.src_factors.size()));
  EncoderOut enc;
  enc.rows = batch.rows;
  enc.steps = batch.src_len;
  enc.mask.resize(enc.rows * enc.steps);
  for (std::size_t b = 0; b < enc.rows; ++b)
    for (std::size_t s = 0; s < enc.steps; ++s) enc.mask[b * enc.steps + s] = batch.src_valid(b, s);

  std::vector<CellState> states(c.num_layers, g.zero_state(enc.rows));
  std::vector<Var> outputs;
  for (std::size_t s = 0; s < enc.steps; ++s) {
    Var x = gather(g.param("src_emb"), column(batch.src, enc.rows, enc.steps, s));
    for (std::size_t f = 0; f < c.src_factors.size(); ++f)
      x = concat_cols(x, gather(g.param("src_feat." + std::to_string(f)),
                                column(batch.src_features[f], enc.rows, enc.steps, s)));
    std::vector<std::uint8_t> valid(enc.rows);
    bool all_valid = true;
    for (std::size_t b = 0; b < enc.rows; ++b) {
      valid[b] = batch.src_valid(b, s);
      all_valid = all_valid && valid[b];
    }
    for (std::size_t l = 0; l < c.num_layers; ++l) {
      if (l > 0) x = dropout.apply(x);
      CellState next = g.cell("enc." + std::to_string(l) + ".", x, states[l]);
      if (!all_valid) {
        next.h = select_rows(valid, next.h, states[l].h);
        if (c.cell == CellKind::kLstm) next.c = select_rows(valid, next.c, states[l].c);
      }
      states[l] = next;
      x = next.h;
    }
    outputs.push_back(x);
  }
  enc.memory = stack(outputs);
  enc.final = std::move(states);
  return enc;
}

AttentionOut global_attention(const ModelGraph& g, Var h_t, const EncoderOut& enc) {
  Var query = g.config().attention == AttentionKind::kGeneral ? matmul(h_t, g.param("attn.Wa")) : h_t;
  AttentionOut a;
  a.weights = softmax_rows(batch_dot(enc.memory, query), enc.mask);
  a.context = weighted_sum(enc.memory, a.weights, enc.mask);
  a.hidden = tanh(matmul(concat_cols(a.context, h_t), g.param("attn.Wc")));
  return a;
}

DecoderState initial_decoder_state(const ModelGraph& g, const EncoderOut& enc) {
  DecoderState st;
  st.layers = enc.final;
  if (g.config().input_feed) st.feed = g.tape().constant(Tensor::zeros({enc.rows, g.config().rnn_size}));
  return st;
}

GeneratorOut generator_factored(const ModelGraph& g, Var hidden) {
  GeneratorOut out;
  out.log_probs = log_softmax_rows(add_row(matmul(hidden, g.param("gen.W")), g.param("gen.b")));
  for (std::size_t f = 0; f < g.config().tgt_factors.size(); ++f) {
    const std::string p = "gen_feat." + std::to_string(f) + ".";
    out.feature_log_probs.push_back(log_softmax_rows(add_row(matmul(hidden, g.param(p + "W")), g.param(p + "b"))));
  }
  return out;
}

StepOut decode_step(const ModelGraph& g, std::span<const std::int32_t> prev_ids, DecoderState& state,
                    const EncoderOut& enc, const Dropout& dropout) {
  const ModelConfig& c = g.config();
  if (prev_ids.size() != enc.rows)
    throw DimensionError("decode step got " + std::to_string(prev_ids.size()) + " ids for " +
                         std::to_string(enc.rows) + " rows");
  Var x = gather(g.param("tgt_emb"), std::vector<std::int32_t>(prev_ids.begin(), prev_ids.end()));
  if (c.input_feed) {
    if (!state.feed) throw DimensionError("input feeding is on but the decoder state has no feed vector");
    x = concat_cols(x, *state.feed);
  }
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    if (l > 0) x = dropout.apply(x);
    state.layers[l] = g.cell("dec." + std::to_string(l) + ".", x, state.layers[l]);
    x = state.layers[l].h;
  }
  StepOut out;
  out.attention = global_attention(g, x, enc);
  if (c.input_feed) state.feed = out.attention.hidden;
  out.out = generator_factored(g, out.attention.hidden);
  return out;
}

NllGraph forward_nll(const ModelGraph& g, const Batch& batch, const Dropout& dropout) {
  const ModelConfig& c = g.config();
  if (batch.tgt_features.size() != c.tgt_factors.size())
    throw DimensionError("batch has " + std::to_string(batch.tgt_features.size()) + " target features, model expects " +
                         std::to_string(c.tgt_factors.size()));
  const EncoderOut enc = encode(g, batch, dropout);
  DecoderState state = initial_decoder_state(g, enc);
  NllGraph nll;
  nll.tokens = batch.target_tokens();
  std::optional<Var> total;
  for (std::size_t t = 0; t + 1 < batch.tgt_len; ++t) {
    const auto prev = column(batch.tgt, batch.rows, batch.tgt_len, t);
    const auto next = column(batch.tgt, batch.rows, batch.tgt_len, t + 1);
    std::vector<double> weights(batch.rows);
    for (std::size_t b = 0; b < batch.rows; ++b) weights[b] = batch.tgt_valid(b, t + 1) ? 1.0 : 0.0;
    const StepOut step = decode_step(g, prev, state, enc, dropout);
    Var term = pick_nll(step.out.log_probs, next, weights);
    for (std::size_t f = 0; f < c.tgt_factors.size(); ++f)
      term = add(term, pick_nll(step.out.feature_log_probs[f],
                                column(batch.tgt_features[f], batch.rows, batch.tgt_len, t + 1), weights));
    total = total ? add(*total, term) : term;
  }
  if (!total || nll.tokens == 0) throw DimensionError("batch has no target tokens to predict");
  nll.loss = scale(*total, 1.0 / static_cast<double>(nll.tokens));
  return nll;
}

}  // namespace minnmt
