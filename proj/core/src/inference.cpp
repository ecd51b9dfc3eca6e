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

#include "minnmt/inference.hpp"

#include "minnmt/error.hpp"
#include "minnmt/kernels.hpp"

namespace minnmt {

namespace k = kernels;

template <typename T>
InferenceModel<T>::InferenceModel(const ModelConfig& config, const ParamMap& params) : config_(config) {
  check_parameters(config, params);
  for (const auto& [name, t] : params) {
    Matrix m;
    m.rows = t.rank() == 1 ? 1 : t.shape()[0];
    m.cols = t.rank() == 1 ? t.shape()[0] : t.shape()[1];
    m.data.assign(t.storage().begin(), t.storage().end());
    params_.emplace(name, std::move(m));
  }
}

template <typename T>
const typename InferenceModel<T>::Matrix& InferenceModel<T>::param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw DimensionError("no parameter '" + name + "'");
  return it->second;
}

template <typename T>
std::size_t InferenceModel<T>::parameter_bytes() const {
  std::size_t n = 0;
  for (const auto& [name, m] : params_) n += m.data.size() * sizeof(T);
  return n;
}

namespace {

template <typename T>
class Session final : public DecodeSession {
 public:
  using Matrix = typename InferenceModel<T>::Matrix;

  Session(const InferenceModel<T>& model, std::span<const SourceSentence> sources);

  std::size_t rows() const override { return row_source_.size(); }
  const std::vector<std::size_t>& row_source() const override { return row_source_; }
  void step(std::span<const std::int32_t> prev, StepResult& out) override;
  void reorder(std::span<const std::size_t> parents) override;

 private:
  // One layer for `rows` rows: reads x [rows, in] and the layer state, writes
  // the new state into h_out / c_out.
  void cell(const std::string& prefix, std::size_t rows, const T* x, std::size_t in, const T* h, const T* c,
            T* h_out, T* c_out);

  const InferenceModel<T>& m_;
  const ModelConfig& c_;
  std::size_t r_;
  std::size_t steps_ = 0;
  std::vector<std::size_t> lengths_;
  std::vector<T> memory_;  // [sources, steps, r]
  std::vector<std::size_t> row_source_;
  std::vector<std::vector<T>> h_, c_state_;  // per layer [rows, r]
  std::vector<T> feed_;                      // [rows, r]
  // Scratch.
  std::vector<T> x_, gates_, hw_, tmp_, h_new_, c_new_, query_, scores_, ctx_, cat_, logits_;
};

template <typename T>
Session<T>::Session(const InferenceModel<T>& model, std::span<const SourceSentence> sources)
    : m_(model), c_(model.config()), r_(model.config().rnn_size) {
  const std::size_t B = sources.size();
  for (std::size_t b = 0; b < B; ++b) {
    if (sources[b].ids.empty()) throw DimensionError("source " + std::to_string(b) + " is empty");
    if (sources[b].features.size() != c_.src_factors.size())
      throw DimensionError("source " + std::to_string(b) + " has " + std::to_string(sources[b].features.size()) +
                           " features, model expects " + std::to_string(c_.src_factors.size()));
    lengths_.push_back(sources[b].ids.size());
    steps_ = std::max(steps_, sources[b].ids.size());
  }
  const std::size_t L = c_.num_layers;
  h_.assign(L, std::vector<T>(B * r_, T(0)));
  if (c_.cell == CellKind::kLstm) c_state_.assign(L, std::vector<T>(B * r_, T(0)));
  memory_.assign(B * steps_ * r_, T(0));

  const Matrix& emb = m_.param("src_emb");
  const std::size_t in0 = c_.encoder_input_dim(0);
  std::vector<T> h_new(B * r_), c_new(B * r_);
  for (std::size_t s = 0; s < steps_; ++s) {
    x_.assign(B * in0, T(0));
    for (std::size_t b = 0; b < B; ++b) {
      auto id_at = [&](const std::vector<std::int32_t>& ids, std::size_t vocab) {
        const std::int32_t id = s < ids.size() ? ids[s] : Vocab::kPad;
        if (id < 0 || static_cast<std::size_t>(id) >= vocab)
          throw DimensionError("source id " + std::to_string(id) + " outside vocabulary of " + std::to_string(vocab));
        return static_cast<std::size_t>(id);
      };
      T* xb = x_.data() + b * in0;
      const T* e = emb.row(id_at(sources[b].ids, emb.rows));
      std::copy(e, e + emb.cols, xb);
      std::size_t off = emb.cols;
      for (std::size_t f = 0; f < c_.src_factors.size(); ++f) {
        if (sources[b].features[f].size() != sources[b].ids.size())
          throw DimensionError("source " + std::to_string(b) + " features misaligned");
        const Matrix& fe = m_.param("src_feat." + std::to_string(f));
        const T* fr = fe.row(id_at(sources[b].features[f], fe.rows));
        std::copy(fr, fr + fe.cols, xb + off);
        off += fe.cols;
      }
    }
    const T* x = x_.data();
    std::size_t in = in0;
    for (std::size_t l = 0; l < L; ++l) {
      cell("enc." + std::to_string(l) + ".", B, x, in, h_[l].data(),
           c_.cell == CellKind::kLstm ? c_state_[l].data() : nullptr, h_new.data(), c_new.data());
      for (std::size_t b = 0; b < B; ++b) {
        if (s >= lengths_[b]) continue;
        std::copy(h_new.begin() + b * r_, h_new.begin() + (b + 1) * r_, h_[l].begin() + b * r_);
        if (c_.cell == CellKind::kLstm)
          std::copy(c_new.begin() + b * r_, c_new.begin() + (b + 1) * r_, c_state_[l].begin() + b * r_);
      }
      x = h_[l].data();
      in = r_;
    }
    for (std::size_t b = 0; b < B; ++b)
      std::copy(h_[L - 1].begin() + b * r_, h_[L - 1].begin() + (b + 1) * r_,
                memory_.begin() + (b * steps_ + s) * r_);
  }
  row_source_.resize(B);
  for (std::size_t b = 0; b < B; ++b) row_source_[b] = b;
  if (c_.input_feed) feed_.assign(B * r_, T(0));
}

template <typename T>
void Session<T>::cell(const std::string& prefix, std::size_t rows, const T* x, std::size_t in, const T* h,
                      const T* c, T* h_out, T* c_out) {
  const std::size_t r = r_;
  const Matrix& wx = m_.param(prefix + "Wx");
  const Matrix& wh = m_.param(prefix + "Wh");
  const Matrix& bias = m_.param(prefix + "b");
  if (c_.cell == CellKind::kLstm) {
    gates_.resize(rows * 4 * r);
    hw_.resize(rows * 4 * r);
    k::gemm(rows, in, 4 * r, x, wx.data.data(), gates_.data());
    k::gemm(rows, r, 4 * r, h, wh.data.data(), hw_.data());
    k::add(rows * 4 * r, gates_.data(), hw_.data(), gates_.data());
    k::add_row(rows, 4 * r, gates_.data(), bias.data.data(), gates_.data());
    for (std::size_t b = 0; b < rows; ++b) {
      const T* g = gates_.data() + b * 4 * r;
      for (std::size_t j = 0; j < r; ++j) {
        const T i = k::sigmoid(g[j]);
        const T f = k::sigmoid(g[r + j]);
        const T gg = std::tanh(g[2 * r + j]);
        const T o = k::sigmoid(g[3 * r + j]);
        const T fc = f * c[b * r + j];
        const T ig = i * gg;
        const T cn = fc + ig;
        c_out[b * r + j] = cn;
        h_out[b * r + j] = o * std::tanh(cn);
      }
    }
    return;
  }
  const Matrix& uc = m_.param(prefix + "Uc");
  gates_.resize(rows * 3 * r);
  hw_.resize(rows * 2 * r);
  tmp_.resize(rows * r);
  k::gemm(rows, in, 3 * r, x, wx.data.data(), gates_.data());
  k::add_row(rows, 3 * r, gates_.data(), bias.data.data(), gates_.data());
  k::gemm(rows, r, 2 * r, h, wh.data.data(), hw_.data());
  for (std::size_t b = 0; b < rows; ++b) {
    T* zr = hw_.data() + b * 2 * r;
    const T* xb = gates_.data() + b * 3 * r;
    for (std::size_t j = 0; j < 2 * r; ++j) zr[j] = k::sigmoid(xb[j] + zr[j]);
    for (std::size_t j = 0; j < r; ++j) tmp_[b * r + j] = zr[r + j] * h[b * r + j];
  }
  h_new_.resize(rows * r);
  k::gemm(rows, r, r, tmp_.data(), uc.data.data(), h_new_.data());
  for (std::size_t b = 0; b < rows; ++b) {
    const T* zr = hw_.data() + b * 2 * r;
    const T* xb = gates_.data() + b * 3 * r;
    for (std::size_t j = 0; j < r; ++j) {
      const T cand = std::tanh(xb[2 * r + j] + h_new_[b * r + j]);
      const T z = zr[j];
      const T keep = (T(1) - z) * h[b * r + j];
      const T take = z * cand;
      h_out[b * r + j] = keep + take;
    }
  }
}

template <typename T>
void Session<T>::step(std::span<const std::int32_t> prev, StepResult& out) {
  const std::size_t rows = row_source_.size();
  if (prev.size() != rows)
    throw DimensionError("decode step got " + std::to_string(prev.size()) + " ids for " + std::to_string(rows) + " rows");
  const std::size_t r = r_, E = c_.embedding_dim;
  const Matrix& emb = m_.param("tgt_emb");
  const std::size_t in0 = c_.decoder_input_dim(0);
  x_.resize(rows * in0);
  for (std::size_t b = 0; b < rows; ++b) {
    const std::int32_t id = prev[b];
    if (id < 0 || static_cast<std::size_t>(id) >= emb.rows)
      throw DimensionError("target id " + std::to_string(id) + " outside vocabulary of " + std::to_string(emb.rows));
    const T* e = emb.row(static_cast<std::size_t>(id));
    std::copy(e, e + E, x_.data() + b * in0);
    if (c_.input_feed) std::copy(feed_.begin() + b * r, feed_.begin() + (b + 1) * r, x_.data() + b * in0 + E);
  }
  c_new_.resize(rows * r);
  std::vector<T> h_out(rows * r);
  const T* x = x_.data();
  std::size_t in = in0;
  for (std::size_t l = 0; l < c_.num_layers; ++l) {
    const bool lstm = c_.cell == CellKind::kLstm;
    cell("dec." + std::to_string(l) + ".", rows, x, in, h_[l].data(), lstm ? c_state_[l].data() : nullptr,
         h_out.data(), c_new_.data());
    h_[l].swap(h_out);
    if (lstm) c_state_[l].assign(c_new_.begin(), c_new_.end());
    h_out.resize(rows * r);
    x = h_[l].data();
    in = r;
  }
  const T* top = x;

  // Global attention over each row's own source.
  const T* query = top;
  if (c_.attention == AttentionKind::kGeneral) {
    query_.resize(rows * r);
    k::gemm(rows, r, r, top, m_.param("attn.Wa").data.data(), query_.data());
    query = query_.data();
  }
  cat_.resize(rows * 2 * r);
  scores_.resize(steps_);
  std::vector<T> weights(steps_);
  for (std::size_t b = 0; b < rows; ++b) {
    const std::size_t src = row_source_[b], len = lengths_[src];
    const T* mem = memory_.data() + src * steps_ * r;
    k::dot_rows(len, r, mem, query + b * r, scores_.data());
    k::softmax_row(len, scores_.data(), static_cast<const std::uint8_t*>(nullptr), weights.data());
    k::weighted_sum(len, r, mem, weights.data(), static_cast<const std::uint8_t*>(nullptr), cat_.data() + b * 2 * r);
    std::copy(top + b * r, top + (b + 1) * r, cat_.data() + b * 2 * r + r);
  }
  ctx_.resize(rows * r);
  k::gemm(rows, 2 * r, r, cat_.data(), m_.param("attn.Wc").data.data(), ctx_.data());
  k::tanh(rows * r, ctx_.data(), ctx_.data());
  const T* hidden = ctx_.data();

  auto head = [&](const Matrix& w, const Matrix& bias, std::vector<double>& dst) {
    const std::size_t V = w.cols;
    logits_.resize(rows * V);
    k::gemm(rows, r, V, hidden, w.data.data(), logits_.data());
    k::add_row(rows, V, logits_.data(), bias.data.data(), logits_.data());
    for (std::size_t b = 0; b < rows; ++b) k::log_softmax_row(V, logits_.data() + b * V, logits_.data() + b * V);
    dst.assign(logits_.begin(), logits_.end());
  };
  out.rows = rows;
  out.vocab = c_.tgt_vocab_size;
  head(m_.param("gen.W"), m_.param("gen.b"), out.log_probs);
  out.feature_vocab = c_.tgt_factors;
  out.feature_log_probs.resize(c_.tgt_factors.size());
  for (std::size_t f = 0; f < c_.tgt_factors.size(); ++f) {
    const std::string p = "gen_feat." + std::to_string(f) + ".";
    head(m_.param(p + "W"), m_.param(p + "b"), out.feature_log_probs[f]);
  }
  if (c_.input_feed) feed_.assign(ctx_.begin(), ctx_.end());
}

template <typename T>
void Session<T>::reorder(std::span<const std::size_t> parents) {
  const std::size_t r = r_;
  auto gather_rows = [&](std::vector<T>& v) {
    std::vector<T> out(parents.size() * r);
    for (std::size_t i = 0; i < parents.size(); ++i)
      std::copy(v.begin() + parents[i] * r, v.begin() + (parents[i] + 1) * r, out.begin() + i * r);
    v.swap(out);
  };
  for (std::size_t p : parents)
    if (p >= row_source_.size()) throw DimensionError("reorder parent " + std::to_string(p) + " out of range");
  for (auto& h : h_) gather_rows(h);
  for (auto& c : c_state_) gather_rows(c);
  if (c_.input_feed) gather_rows(feed_);
  std::vector<std::size_t> src(parents.size());
  for (std::size_t i = 0; i < parents.size(); ++i) src[i] = row_source_[parents[i]];
  row_source_.swap(src);
}

}  // namespace

template <typename T>
std::unique_ptr<DecodeSession> InferenceModel<T>::start(std::span<const SourceSentence> sources) const {
  return std::make_unique<Session<T>>(*this, sources);
}

template class InferenceModel<float>;
template class InferenceModel<double>;

std::unique_ptr<StepModel> make_inference_model(const ModelConfig& config, const ParamMap& params,
                                                Precision precision) {
  if (precision == Precision::kFloat32) return std::make_unique<InferenceModel<float>>(config, params);
  return std::make_unique<InferenceModel<double>>(config, params);
}

LoadedModel load_for_inference(const std::filesystem::path& path) {
  ModelFile file = load_model(path);
  const Precision p = file.precision;
  LoadedModel out;
  out.model = make_inference_model(file.config, file.params, p);
  file.params.clear();
  out.file = std::move(file);
  return out;
}

LoadedModel load_for_inference(const std::filesystem::path& path, Precision precision) {
  ModelFile file = load_model(path);
  LoadedModel out;
  out.model = make_inference_model(file.config, file.params, precision);
  file.params.clear();
  out.file = std::move(file);
  return out;
}

}  // namespace minnmt
