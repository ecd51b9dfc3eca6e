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

#include "minnmt/tape_decoder.hpp"

#include "minnmt/error.hpp"
#include "minnmt/model.hpp"

namespace minnmt {

namespace {

// Copies rows of a [rows, d] tensor.
Tensor take_rows(const Tensor& t, std::span<const std::size_t> rows) {
  const std::size_t d = t.shape()[1];
  std::vector<double> out(rows.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(t.storage().begin() + static_cast<std::ptrdiff_t>(rows[i] * d),
              t.storage().begin() + static_cast<std::ptrdiff_t>((rows[i] + 1) * d),
              out.begin() + static_cast<std::ptrdiff_t>(i * d));
  return Tensor({rows.size(), d}, std::move(out));
}

class TapeSession final : public DecodeSession {
 public:
  TapeSession(const ModelConfig& config, const ParamMap& params, std::span<const SourceSentence> sources)
      : config_(config), params_(params) {
    std::vector<SentencePair> pairs(sources.size());
    std::vector<std::size_t> order(sources.size());
    for (std::size_t i = 0; i < sources.size(); ++i) {
      pairs[i].src = sources[i].ids;
      pairs[i].src_features = sources[i].features;
      pairs[i].tgt_features.assign(config.tgt_factors.size(), {});
      order[i] = i;
    }
    const Batch batch = make_batch(pairs, order);
    Tape tape;
    ModelGraph g(tape, config_, params_);
    const EncoderOut enc = encode(g, batch);
    steps_ = enc.steps;
    memory_ = enc.memory.value();
    mask_ = enc.mask;
    for (const auto& s : enc.final) {
      h_.push_back(s.h.value());
      if (config_.cell == CellKind::kLstm) c_.push_back(s.c.value());
    }
    if (config_.input_feed) feed_ = Tensor::zeros({sources.size(), config_.rnn_size});
    row_source_.resize(sources.size());
    for (std::size_t i = 0; i < sources.size(); ++i) row_source_[i] = i;
  }

  std::size_t rows() const override { return row_source_.size(); }
  const std::vector<std::size_t>& row_source() const override { return row_source_; }

  void step(std::span<const std::int32_t> prev, StepResult& out) override {
    const std::size_t rows = row_source_.size();
    const std::size_t r = config_.rnn_size, plane = steps_ * r;
    Tape tape;
    ModelGraph g(tape, config_, params_);
    EncoderOut enc;
    enc.rows = rows;
    enc.steps = steps_;
    std::vector<double> mem(rows * plane);
    enc.mask.resize(rows * steps_);
    for (std::size_t i = 0; i < rows; ++i) {
      const std::size_t s = row_source_[i];
      std::copy(memory_.storage().begin() + static_cast<std::ptrdiff_t>(s * plane),
                memory_.storage().begin() + static_cast<std::ptrdiff_t>((s + 1) * plane),
                mem.begin() + static_cast<std::ptrdiff_t>(i * plane));
      std::copy(mask_.begin() + static_cast<std::ptrdiff_t>(s * steps_),
                mask_.begin() + static_cast<std::ptrdiff_t>((s + 1) * steps_),
                enc.mask.begin() + static_cast<std::ptrdiff_t>(i * steps_));
    }
    enc.memory = tape.constant(Tensor({rows, steps_, r}, std::move(mem)));
    DecoderState state;
    for (std::size_t l = 0; l < h_.size(); ++l)
      state.layers.push_back({tape.constant(h_[l]), c_.empty() ? Var{} : tape.constant(c_[l])});
    if (config_.input_feed) state.feed = tape.constant(feed_);
    const StepOut so = decode_step(g, prev, state, enc);
    for (std::size_t l = 0; l < h_.size(); ++l) {
      h_[l] = state.layers[l].h.value();
      if (!c_.empty()) c_[l] = state.layers[l].c.value();
    }
    if (config_.input_feed) feed_ = state.feed->value();
    out.rows = rows;
    out.vocab = config_.tgt_vocab_size;
    out.log_probs = so.out.log_probs.value().storage();
    out.feature_vocab = config_.tgt_factors;
    out.feature_log_probs.clear();
    for (const Var& f : so.out.feature_log_probs) out.feature_log_probs.push_back(f.value().storage());
  }

  void reorder(std::span<const std::size_t> parents) override {
    for (std::size_t p : parents)
      if (p >= row_source_.size()) throw DimensionError("reorder parent " + std::to_string(p) + " out of range");
    for (auto& h : h_) h = take_rows(h, parents);
    for (auto& c : c_) c = take_rows(c, parents);
    if (config_.input_feed) feed_ = take_rows(feed_, parents);
    std::vector<std::size_t> src(parents.size());
    for (std::size_t i = 0; i < parents.size(); ++i) src[i] = row_source_[parents[i]];
    row_source_.swap(src);
  }

 private:
  const ModelConfig& config_;
  const ParamMap& params_;
  std::size_t steps_ = 0;
  Tensor memory_;
  std::vector<std::uint8_t> mask_;
  std::vector<Tensor> h_, c_;
  Tensor feed_;
  std::vector<std::size_t> row_source_;
};

}  // namespace

TapeStepModel::TapeStepModel(const ModelConfig& config, const ParamMap& params) : config_(config), params_(&params) {
  check_parameters(config_, params);
}

std::unique_ptr<DecodeSession> TapeStepModel::start(std::span<const SourceSentence> sources) const {
  return std::make_unique<TapeSession>(config_, *params_, sources);
}

}  // namespace minnmt
