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

#include <gtest/gtest.h>

#include <cmath>

#include "minnmt/error.hpp"
#include "minnmt/model.hpp"
#include "model_fixtures.hpp"
#include "test_util.hpp"

namespace minnmt {
namespace {

using testing::batch_of;
using testing::finite_difference_check;
using testing::random_pairs;
using testing::random_tensor;
using testing::scaled_parameters;
using testing::tiny_config;

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(Lstm, ZeroWeightsAndInputsGiveZeroState) {
  Tape tape;
  Var zero = tape.constant(Tensor::zeros({2, 3}));
  Var h = tape.constant(Tensor::zeros({2, 3}));
  LstmWeights w{tape.constant(Tensor::zeros({3, 12})), tape.constant(Tensor::zeros({3, 12})),
                tape.constant(Tensor::zeros({12}))};
  CellState s = lstm_step(zero, {h, h}, w);
  EXPECT_EQ(s.h.value(), Tensor::zeros({2, 3}));
  EXPECT_EQ(s.c.value(), Tensor::zeros({2, 3}));
}

// One-unit cell written out by hand.
TEST(Lstm, ScalarOracle) {
  const double x = 0.7, h = -0.3, c = 0.4;
  const double wx[4] = {0.5, -1.2, 0.8, 0.3}, wh[4] = {-0.4, 0.9, 1.1, -0.7}, b[4] = {0.1, 0.2, -0.3, 0.05};
  double pre[4];
  for (int k = 0; k < 4; ++k) pre[k] = (x * wx[k] + h * wh[k]) + b[k];
  const double i = sig(pre[0]), f = sig(pre[1]), g = std::tanh(pre[2]), o = sig(pre[3]);
  const double c2 = f * c + i * g;
  const double h2 = o * std::tanh(c2);

  Tape tape;
  LstmWeights w{tape.constant(Tensor::matrix({{wx[0], wx[1], wx[2], wx[3]}})),
                tape.constant(Tensor::matrix({{wh[0], wh[1], wh[2], wh[3]}})),
                tape.constant(Tensor::vector({b[0], b[1], b[2], b[3]}))};
  CellState s = lstm_step(tape.constant(Tensor::matrix({{x}})),
                          {tape.constant(Tensor::matrix({{h}})), tape.constant(Tensor::matrix({{c}}))}, w);
  EXPECT_NEAR(s.c.value()[0], c2, 1e-15);
  EXPECT_NEAR(s.h.value()[0], h2, 1e-15);
}

TEST(Lstm, ShapeMismatch) {
  Tape tape;
  LstmWeights w{tape.constant(Tensor::zeros({3, 8})), tape.constant(Tensor::zeros({3, 8})),
                tape.constant(Tensor::zeros({8}))};
  Var h = tape.constant(Tensor::zeros({1, 3}));
  EXPECT_THROW(lstm_step(tape.constant(Tensor::zeros({1, 3})), {h, h}, w), DimensionError);
  EXPECT_THROW(lstm_step(tape.constant(Tensor::zeros({1, 2})), {h, h}, w), DimensionError);
}

TEST(Gru, ZeroWeightsAndStateGiveZero) {
  Tape tape;
  GruWeights w{tape.constant(Tensor::zeros({2, 9})), tape.constant(Tensor::zeros({3, 6})),
               tape.constant(Tensor::zeros({3, 3})), tape.constant(Tensor::zeros({9}))};
  Var h = gru_step(tape.constant(Tensor::zeros({1, 2})), tape.constant(Tensor::zeros({1, 3})), w);
  EXPECT_EQ(h.value(), Tensor::zeros({1, 3}));
}

TEST(Gru, ScalarOracle) {
  const double x = -0.6, h = 0.45;
  const double wx[3] = {0.9, -0.5, 1.3}, wh[2] = {0.2, -1.1}, uc = 0.7, b[3] = {-0.1, 0.3, 0.2};
  const double z = sig((x * wx[0] + b[0]) + h * wh[0]);
  const double r = sig((x * wx[1] + b[1]) + h * wh[1]);
  const double n = std::tanh((x * wx[2] + b[2]) + (r * h) * uc);
  const double h2 = (1.0 - z) * h + z * n;

  Tape tape;
  GruWeights w{tape.constant(Tensor::matrix({{wx[0], wx[1], wx[2]}})), tape.constant(Tensor::matrix({{wh[0], wh[1]}})),
               tape.constant(Tensor::matrix({{uc}})), tape.constant(Tensor::vector({b[0], b[1], b[2]}))};
  Var out = gru_step(tape.constant(Tensor::matrix({{x}})), tape.constant(Tensor::matrix({{h}})), w);
  EXPECT_NEAR(out.value()[0], h2, 1e-15);
}

TEST(Cells, GradientsMatchFiniteDifferences) {
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(300 + trial);
    std::map<std::string, Tensor> lstm{{"x", random_tensor(rng, {2, 3})},  {"h", random_tensor(rng, {2, 4})},
                                       {"c", random_tensor(rng, {2, 4})},  {"Wx", random_tensor(rng, {3, 16})},
                                       {"Wh", random_tensor(rng, {4, 16})}, {"b", random_tensor(rng, {16})}};
    Tensor r1 = random_tensor(rng, {2, 4}), r2 = random_tensor(rng, {2, 4});
    auto lstm_loss = [&](Tape& t, const std::map<std::string, Var>& v) {
      CellState s = lstm_step(v.at("x"), {v.at("h"), v.at("c")}, {v.at("Wx"), v.at("Wh"), v.at("b")});
      return add(sum(mul(s.h, t.constant(r1))), sum(mul(s.c, t.constant(r2))));
    };
    const auto rl = finite_difference_check(lstm, lstm_loss);
    EXPECT_LT(rl.max_rel_error, 1e-6) << rl.worst;

    std::map<std::string, Tensor> gru{{"x", random_tensor(rng, {2, 3})},  {"h", random_tensor(rng, {2, 4})},
                                      {"Wx", random_tensor(rng, {3, 12})}, {"Wh", random_tensor(rng, {4, 8})},
                                      {"Uc", random_tensor(rng, {4, 4})},  {"b", random_tensor(rng, {12})}};
    auto gru_loss = [&](Tape& t, const std::map<std::string, Var>& v) {
      return sum(mul(gru_step(v.at("x"), v.at("h"), {v.at("Wx"), v.at("Wh"), v.at("Uc"), v.at("b")}), t.constant(r1)));
    };
    const auto rg = finite_difference_check(gru, gru_loss);
    EXPECT_LT(rg.max_rel_error, 1e-6) << rg.worst;
  }
}

// ---------------------------------------------------------------------------

ParamMap zero_parameters(const ModelConfig& c) {
  ParamMap p;
  for (const auto& [name, shape] : parameter_shapes(c)) p.emplace(name, Tensor::zeros(shape));
  return p;
}

TEST(Config, ParameterShapesAndKeyValueRoundTrip) {
  ModelConfig c = tiny_config();
  c.attention = AttentionKind::kGeneral;
  c.src_factors = {{5, 2}};
  c.tgt_factors = {3, 6};
  const auto shapes = parameter_shapes(c);
  EXPECT_EQ(shapes.at("enc.0.Wx"), (Shape{5, 16}));
  EXPECT_EQ(shapes.at("dec.0.Wx"), (Shape{7, 16}));
  EXPECT_EQ(shapes.at("attn.Wa"), (Shape{4, 4}));
  EXPECT_EQ(shapes.at("attn.Wc"), (Shape{8, 4}));
  EXPECT_EQ(shapes.at("gen_feat.1.W"), (Shape{4, 6}));
  EXPECT_EQ(ModelConfig::from_kv(c.to_kv()), c);
  c.cell = CellKind::kGru;
  EXPECT_EQ(parameter_shapes(c).at("dec.0.Uc"), (Shape{4, 4}));
  EXPECT_EQ(ModelConfig::from_kv(c.to_kv()), c);
  auto kv = c.to_kv();
  kv["mystery"] = "1";
  EXPECT_THROW(ModelConfig::from_kv(kv), FormatError);
  c.num_layers = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, InitIsUniformAndSeeded) {
  const ModelConfig c = tiny_config();
  Rng a(5), b(5), d(6);
  const ParamMap pa = init_parameters(c, a), pb = init_parameters(c, b), pd = init_parameters(c, d);
  EXPECT_EQ(pa, pb);
  EXPECT_NE(pa, pd);
  for (const auto& [name, t] : pa)
    for (double v : t.storage()) EXPECT_LE(std::abs(v), 0.1) << name;
  ParamMap bad = pa;
  bad.erase("gen.b");
  EXPECT_THROW(check_parameters(c, bad), DimensionError);
}

TEST(Encode, SingleTokenWithZeroParametersIsZero) {
  const ModelConfig c = tiny_config();
  const ParamMap p = zero_parameters(c);
  Tape tape;
  ModelGraph g(tape, c, p);
  std::vector<SentencePair> pairs{{{5}, {6}, {}, {}}};
  EncoderOut enc = encode(g, batch_of(pairs));
  EXPECT_EQ(enc.memory.value(), Tensor::zeros({1, 1, 4}));
}

TEST(Encode, StackedLayerEqualsIndependentRunOverLowerOutputs) {
  for (CellKind kind : {CellKind::kLstm, CellKind::kGru}) {
    ModelConfig c = tiny_config(9, 2, 5, 3);
    c.cell = kind;
    const ParamMap p = scaled_parameters(c, 17, 0.5);
    Rng rng(3);
    const auto pairs = random_pairs(rng, c, 3, 6);
    const Batch batch = batch_of(pairs);

    Tape tape;
    ModelGraph g(tape, c, p);
    const EncoderOut enc = encode(g, batch);

    // Layer 0 alone, then layer 1 run over its outputs on a separate tape.
    ModelConfig one = c;
    one.num_layers = 1;
    ParamMap p1;
    for (const auto& [name, shape] : parameter_shapes(one)) p1.emplace(name, p.at(name));
    Tape t1;
    ModelGraph g1(t1, one, p1);
    const EncoderOut lower = encode(g1, batch);
    const Tensor& low = lower.memory.value();

    Tape t2;
    ModelGraph g2(t2, c, p);
    CellState st = g2.zero_state(batch.rows);
    for (std::size_t s = 0; s < batch.src_len; ++s) {
      Tensor x({batch.rows, c.rnn_size});
      for (std::size_t b = 0; b < batch.rows; ++b)
        for (std::size_t j = 0; j < c.rnn_size; ++j) x.at(b, j) = low[(b * batch.src_len + s) * c.rnn_size + j];
      CellState next = g2.cell("enc.1.", t2.constant(x), st);
      std::vector<std::uint8_t> valid(batch.rows);
      for (std::size_t b = 0; b < batch.rows; ++b) valid[b] = batch.src_valid(b, s);
      next.h = select_rows(valid, next.h, st.h);
      if (kind == CellKind::kLstm) next.c = select_rows(valid, next.c, st.c);
      st = next;
      const Tensor& top = enc.memory.value();
      for (std::size_t b = 0; b < batch.rows; ++b)
        for (std::size_t j = 0; j < c.rnn_size; ++j)
          ASSERT_EQ(top[(b * batch.src_len + s) * c.rnn_size + j], st.h.value().at(b, j));
    }
  }
}

TEST(Encode, OutOfRangeIdIsRejected) {
  const ModelConfig c = tiny_config();
  const ParamMap p = zero_parameters(c);
  Tape tape;
  ModelGraph g(tape, c, p);
  std::vector<SentencePair> pairs{{{7}, {6}, {}, {}}};
  EXPECT_THROW(encode(g, batch_of(pairs)), DimensionError);
}

// Row outputs do not depend on what else is in the batch, in particular not
// on padded positions of other rows.
TEST(Encode, PaddedPositionsDoNotReachAttention) {
  const ModelConfig c = tiny_config(9, 2, 5, 3);
  const ParamMap p = scaled_parameters(c, 8, 0.6);
  std::vector<SentencePair> both{{{4, 5, 6, 7, 8}, {4}, {}, {}}, {{6, 5}, {4}, {}, {}}};
  std::vector<SentencePair> alone{both[1]};
  auto run = [&](const std::vector<SentencePair>& pairs, std::size_t row) {
    Tape tape;
    ModelGraph g(tape, c, p);
    const EncoderOut enc = encode(g, batch_of(pairs));
    DecoderState st = initial_decoder_state(g, enc);
    std::vector<std::int32_t> prev(pairs.size(), Vocab::kBos);
    std::vector<double> out;
    for (int t = 0; t < 3; ++t) {
      const StepOut s = decode_step(g, prev, st, enc);
      const Tensor& lp = s.out.log_probs.value();
      for (std::size_t j = 0; j < c.tgt_vocab_size; ++j) out.push_back(lp.at(row, j));
      const Tensor& w = s.attention.weights.value();
      for (std::size_t j = pairs[row].src.size(); j < enc.steps; ++j) EXPECT_EQ(w.at(row, j), 0.0);
      std::fill(prev.begin(), prev.end(), 5 + t);
    }
    return out;
  };
  EXPECT_EQ(run(both, 1), run(alone, 0));
}

// ---------------------------------------------------------------------------

struct AttentionFixture {
  ModelConfig c;
  ParamMap p;
  Tape tape;
  ModelGraph g;

  explicit AttentionFixture(std::size_t r, AttentionKind kind = AttentionKind::kDot)
      : c([&] {
          ModelConfig cc = tiny_config(7, 1, r, r);
          cc.attention = kind;
          return cc;
        }()),
        p(scaled_parameters(c, 1, 0.5)),
        g(tape, c, p) {}

  EncoderOut memory(const Tensor& m, std::vector<std::uint8_t> mask = {}) {
    EncoderOut e;
    e.rows = m.shape()[0];
    e.steps = m.shape()[1];
    e.memory = tape.constant(m);
    e.mask = mask.empty() ? std::vector<std::uint8_t>(e.rows * e.steps, 1) : std::move(mask);
    return e;
  }
};

TEST(Attention, SingleStepPutsAllWeightOnIt) {
  AttentionFixture f(3);
  Tensor m({1, 1, 3}, {0.2, -0.5, 0.9});
  const AttentionOut a = global_attention(f.g, f.tape.constant(Tensor::matrix({{1, 2, 3}})), f.memory(m));
  EXPECT_EQ(a.weights.value(), Tensor::matrix({{1.0}}));
  EXPECT_EQ(a.context.value(), Tensor::matrix({{0.2, -0.5, 0.9}}));
}

TEST(Attention, IdenticalStatesGiveUniformWeights) {
  AttentionFixture f(2);
  Tensor m({1, 4, 2}, {0.3, -0.7, 0.3, -0.7, 0.3, -0.7, 0.3, -0.7});
  const AttentionOut a = global_attention(f.g, f.tape.constant(Tensor::matrix({{1.5, 0.25}})), f.memory(m));
  for (std::size_t s = 0; s < 4; ++s) EXPECT_EQ(a.weights.value()[s], 0.25);
  EXPECT_NEAR(a.context.value()[0], 0.3, 1e-15);
  EXPECT_NEAR(a.context.value()[1], -0.7, 1e-15);
}

TEST(Attention, HandComputedDotCase) {
  AttentionFixture f(2);
  Tensor m({1, 3, 2}, {1, 0, 0, 1, 1, 1});
  Var h = f.tape.constant(Tensor::matrix({{1, 2}}));
  const AttentionOut a = global_attention(f.g, h, f.memory(m));
  // Scores 1, 2, 3.
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  const double w[3] = {std::exp(1.0) / z, std::exp(2.0) / z, std::exp(3.0) / z};
  for (int s = 0; s < 3; ++s) EXPECT_NEAR(a.weights.value()[s], w[s], 1e-15);
  EXPECT_NEAR(a.context.value()[0], w[0] + w[2], 1e-15);
  EXPECT_NEAR(a.context.value()[1], w[1] + w[2], 1e-15);
  // Attentional hidden: tanh([context; h] Wc).
  const Tensor& wc = f.p.at("attn.Wc");
  const double in[4] = {w[0] + w[2], w[1] + w[2], 1, 2};
  for (std::size_t j = 0; j < 2; ++j) {
    double acc = 0;
    for (std::size_t k = 0; k < 4; ++k) acc += in[k] * wc.at(k, j);
    EXPECT_NEAR(a.hidden.value()[j], std::tanh(acc), 1e-14);
  }
}

TEST(Attention, GeneralScoreUsesProjection) {
  AttentionFixture f(2, AttentionKind::kGeneral);
  Tensor m({1, 2, 2}, {1, 0, 0, 1});
  const AttentionOut a = global_attention(f.g, f.tape.constant(Tensor::matrix({{1, 1}})), f.memory(m));
  const Tensor& wa = f.p.at("attn.Wa");
  // h^T Wa h_s with h = [1, 1]: column sums of Wa.
  const double s0 = wa.at(0, 0) + wa.at(1, 0), s1 = wa.at(0, 1) + wa.at(1, 1);
  EXPECT_NEAR(a.weights.value()[0], 1.0 / (1.0 + std::exp(s1 - s0)), 1e-15);
}

TEST(Attention, WeightsAreADistributionZeroAtMaskedPositions) {
  AttentionFixture f(4);
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 1 + rng.below(4), steps = 1 + rng.below(7);
    std::vector<std::uint8_t> mask(rows * steps);
    for (std::size_t b = 0; b < rows; ++b) {
      const std::size_t len = 1 + rng.below(steps);
      for (std::size_t s = 0; s < steps; ++s) mask[b * steps + s] = s < len;
    }
    const AttentionOut a = global_attention(f.g, f.tape.constant(random_tensor(rng, {rows, 4})),
                                            f.memory(random_tensor(rng, {rows, steps, 4}), mask));
    const Tensor& w = a.weights.value();
    for (std::size_t b = 0; b < rows; ++b) {
      double total = 0;
      for (std::size_t s = 0; s < steps; ++s) {
        const double v = w.at(b, s);
        EXPECT_GE(v, 0.0);
        if (!mask[b * steps + s]) {
          EXPECT_EQ(v, 0.0);
        }
        total += v;
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Attention, AllMaskedRowIsAnError) {
  AttentionFixture f(2);
  EXPECT_THROW(global_attention(f.g, f.tape.constant(Tensor::matrix({{1, 1}})),
                                f.memory(Tensor::zeros({1, 2, 2}), {0, 0})),
               InvalidMaskError);
}

// With the encoder replaced by a per-position embedding lookup, swapping two
// source positions swaps their attention weights.
TEST(Attention, EquivariantUnderSourcePermutation) {
  AttentionFixture f(4);
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::int32_t> ids(5);
    for (auto& id : ids) id = static_cast<std::int32_t>(rng.below(7));
    const std::size_t i = rng.below(5), j = rng.below(5);
    std::vector<std::int32_t> swapped = ids;
    std::swap(swapped[i], swapped[j]);
    Var h = f.tape.constant(random_tensor(rng, {1, 4}));
    auto weights = [&](const std::vector<std::int32_t>& order) {
      std::vector<Var> steps;
      for (std::int32_t id : order) steps.push_back(gather(f.g.param("src_emb"), {id}));
      EncoderOut e;
      e.rows = 1;
      e.steps = order.size();
      e.memory = stack(steps);
      e.mask.assign(order.size(), 1);
      return global_attention(f.g, h, e).weights.value();
    };
    Tensor a = weights(ids), b = weights(swapped);
    std::swap(b.storage()[i], b.storage()[j]);
    for (std::size_t s = 0; s < 5; ++s) EXPECT_NEAR(a[s], b[s], 1e-15);
  }
}

// ---------------------------------------------------------------------------

TEST(DecodeStep, LogProbsAreNormalizedAndFeedStartsAtZero) {
  ModelConfig c = tiny_config(9, 2, 5, 3);
  c.tgt_factors = {4};
  const ParamMap p = scaled_parameters(c, 4, 0.8);
  Rng rng(1);
  const Batch batch = batch_of(random_pairs(rng, c, 3, 5));
  Tape tape;
  ModelGraph g(tape, c, p);
  const EncoderOut enc = encode(g, batch);
  DecoderState st = initial_decoder_state(g, enc);
  ASSERT_TRUE(st.feed.has_value());
  EXPECT_EQ(st.feed->value(), Tensor::zeros({3, 5}));
  std::vector<std::int32_t> prev(3, Vocab::kBos);
  for (int t = 0; t < 4; ++t) {
    const StepOut s = decode_step(g, prev, st, enc);
    for (const Var& lp : {s.out.log_probs, s.out.feature_log_probs[0]}) {
      const Tensor& v = lp.value();
      for (std::size_t b = 0; b < 3; ++b) {
        double z = 0;
        for (std::size_t k = 0; k < v.shape()[1]; ++k) z += std::exp(v.at(b, k));
        EXPECT_NEAR(std::log(z), 0.0, 1e-10);
      }
    }
    EXPECT_EQ(st.feed->value(), s.attention.hidden.value());
    for (auto& id : prev) id = static_cast<std::int32_t>(4 + t);
  }
}

// With input feeding the first step matches a feed-free model using the
// embedding rows of Wx, since the feed is zero; later steps differ.
TEST(DecodeStep, InputFeedingOnlyMattersAfterTheFirstStep) {
  const ModelConfig c = tiny_config(9, 1, 4, 3);
  ModelConfig nofeed = c;
  nofeed.input_feed = false;
  const ParamMap p = scaled_parameters(c, 21, 0.9);
  ParamMap q = p;
  Tensor wx({3, 16});
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t k = 0; k < 16; ++k) wx.at(r, k) = p.at("dec.0.Wx").at(r, k);
  q.at("dec.0.Wx") = wx;

  std::vector<SentencePair> pairs{{{4, 5, 6}, {4}, {}, {}}};
  auto steps = [&](const ModelConfig& cfg, const ParamMap& params) {
    Tape tape;
    ModelGraph g(tape, cfg, params);
    const EncoderOut enc = encode(g, batch_of(pairs));
    DecoderState st = initial_decoder_state(g, enc);
    std::vector<Tensor> out;
    for (std::int32_t prev : {Vocab::kBos, 7}) {
      const std::int32_t ids[] = {prev};
      out.push_back(decode_step(g, ids, st, enc).out.log_probs.value());
    }
    return out;
  };
  const auto with = steps(c, p), without = steps(nofeed, q);
  EXPECT_TRUE(bitwise_equal(with[0], without[0]));
  EXPECT_FALSE(bitwise_equal(with[1], without[1]));
}

TEST(Generator, ZeroWeightsGiveUniformHeads) {
  ModelConfig c = tiny_config();
  c.tgt_factors = {3, 1};
  const ParamMap p = zero_parameters(c);
  Tape tape;
  ModelGraph g(tape, c, p);
  const GeneratorOut out = generator_factored(g, tape.constant(Tensor::filled({2, 4}, 0.3)));
  for (double v : out.log_probs.value().storage()) EXPECT_DOUBLE_EQ(v, -std::log(7.0));
  for (double v : out.feature_log_probs[0].value().storage()) EXPECT_DOUBLE_EQ(v, -std::log(3.0));
  for (double v : out.feature_log_probs[1].value().storage()) EXPECT_EQ(v, 0.0);
}

TEST(Generator, JointDistributionOverProductSpaceSumsToOne) {
  ModelConfig c = tiny_config();
  c.tgt_factors = {3, 2};
  const ParamMap p = scaled_parameters(c, 6, 1.0);
  Tape tape;
  ModelGraph g(tape, c, p);
  Rng rng(2);
  const GeneratorOut out = generator_factored(g, tape.constant(random_tensor(rng, {1, 4})));
  const Tensor &w = out.log_probs.value(), &f0 = out.feature_log_probs[0].value(), &f1 = out.feature_log_probs[1].value();
  double total = 0;
  for (std::size_t a = 0; a < 7; ++a)
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t d = 0; d < 2; ++d) total += std::exp(w[a] + f0[b] + f1[d]);
  EXPECT_NEAR(total, 1.0, 1e-12);
}

// ---------------------------------------------------------------------------

TEST(ForwardNll, ZeroModelCostsLogVPerToken) {
  for (std::size_t v : {7u, 20u, 113u}) {
    const ModelConfig c = tiny_config(v, 2, 4, 3);
    const ParamMap p = zero_parameters(c);
    Rng rng(v);
    const Batch batch = batch_of(random_pairs(rng, c, 5, 7));
    Tape tape;
    ModelGraph g(tape, c, p);
    const NllGraph nll = forward_nll(g, batch);
    EXPECT_NEAR(nll.loss.value()[0], std::log(static_cast<double>(v)), 1e-12);
    EXPECT_EQ(nll.tokens, batch.target_tokens());
  }
}

// Oracle: run decode_step position by position for a single pair and add up
// -log p of each reference token.
double stepwise_nll(const ModelConfig& c, const ParamMap& p, const SentencePair& pair) {
  Tape tape;
  ModelGraph g(tape, c, p);
  const std::vector<SentencePair> one{pair};
  const EncoderOut enc = encode(g, batch_of(one));
  DecoderState st = initial_decoder_state(g, enc);
  std::vector<std::int32_t> seq{Vocab::kBos};
  seq.insert(seq.end(), pair.tgt.begin(), pair.tgt.end());
  seq.push_back(Vocab::kEos);
  double total = 0;
  for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
    const std::int32_t prev[] = {seq[t]};
    const StepOut s = decode_step(g, prev, st, enc);
    total -= s.out.log_probs.value().at(0, static_cast<std::size_t>(seq[t + 1]));
    for (std::size_t f = 0; f < c.tgt_factors.size(); ++f) {
      const std::int32_t fid = t + 1 < seq.size() - 1 ? pair.tgt_features[f][t] : Vocab::kEos;
      total -= s.out.feature_log_probs[f].value().at(0, static_cast<std::size_t>(fid));
    }
  }
  return total;
}

TEST(ForwardNll, MatchesStepwiseOracleAndPadsContributeNothing) {
  for (CellKind kind : {CellKind::kLstm, CellKind::kGru}) {
    ModelConfig c = tiny_config(11, 2, 5, 4);
    c.cell = kind;
    c.attention = AttentionKind::kGeneral;
    c.src_factors = {{4, 2}};
    c.tgt_factors = {5};
    const ParamMap p = scaled_parameters(c, 31, 0.7);
    Rng rng(8);
    const auto pairs = random_pairs(rng, c, 6, 6);
    double oracle = 0;
    for (const auto& pr : pairs) oracle += stepwise_nll(c, p, pr);

    const Batch batch = batch_of(pairs);
    Tape tape;
    ModelGraph g(tape, c, p);
    const NllGraph nll = forward_nll(g, batch);
    EXPECT_NEAR(nll.loss.value()[0] * static_cast<double>(nll.tokens), oracle, 1e-10);
  }
}

TEST(ForwardNll, TinyModelGradientMatchesFiniteDifferences) {
  struct Variant {
    const char* name;
    CellKind cell;
    AttentionKind attention;
    bool feed;
    std::size_t layers;
    bool factors;
  };
  const Variant variants[] = {
      {"lstm-dot-feed", CellKind::kLstm, AttentionKind::kDot, true, 1, false},
      {"gru-general", CellKind::kGru, AttentionKind::kGeneral, false, 2, false},
      {"lstm-factored", CellKind::kLstm, AttentionKind::kGeneral, true, 2, true},
  };
  for (const Variant& v : variants) {
    ModelConfig c = tiny_config(7, v.layers, 4, 3);
    c.cell = v.cell;
    c.attention = v.attention;
    c.input_feed = v.feed;
    if (v.factors) {
      c.src_factors = {{3, 2}};
      c.tgt_factors = {5};
    }
    ParamMap p = scaled_parameters(c, 99, 0.5);
    Rng rng(4);
    auto pairs = random_pairs(rng, c, 2, 3, 3);
    pairs[1].src.pop_back();
    if (v.factors) pairs[1].src_features[0].pop_back();
    const Batch batch = batch_of(pairs);
    auto loss = [&](Tape& tape, const std::map<std::string, Var>&) { return forward_nll(ModelGraph(tape, c, p), batch).loss; };
    const auto r = finite_difference_check(p, loss, 1e-5);
    EXPECT_LT(r.max_rel_error, 1e-5) << v.name << ": " << r.worst;
    EXPECT_EQ(r.checked, [&] {
      std::size_t n = 0;
      for (const auto& [name, t] : p) n += t.size();
      return n;
    }());
  }
}

TEST(ForwardNll, DropoutIsSeededAndOnlyBetweenLayers) {
  ModelConfig c = tiny_config(9, 1, 4, 3);
  c.dropout = 0.5;
  const ParamMap p = scaled_parameters(c, 2, 0.5);
  Rng data(1);
  const Batch batch = batch_of(random_pairs(data, c, 3, 4));
  auto loss = [&](const ModelConfig& cfg, std::uint64_t seed, bool train) {
    Rng rng(seed);
    Tape tape;
    ModelGraph g(tape, cfg, p);
    return forward_nll(g, batch, train ? Dropout{&rng, cfg.dropout} : Dropout{}).loss.value()[0];
  };
  // One layer: nothing to drop.
  EXPECT_EQ(loss(c, 1, true), loss(c, 1, false));

  ModelConfig two = tiny_config(9, 2, 4, 3);
  two.dropout = 0.5;
  const ParamMap p2 = scaled_parameters(two, 2, 0.5);
  auto loss2 = [&](std::uint64_t seed, bool train) {
    Rng rng(seed);
    Tape tape;
    ModelGraph g(tape, two, p2);
    return forward_nll(g, batch, train ? Dropout{&rng, two.dropout} : Dropout{}).loss.value()[0];
  };
  EXPECT_EQ(loss2(3, true), loss2(3, true));
  EXPECT_NE(loss2(3, true), loss2(4, true));
  EXPECT_NE(loss2(3, true), loss2(3, false));
}

}  // namespace
}  // namespace minnmt
