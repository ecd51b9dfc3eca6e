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

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "minnmt/random.hpp"
#include "minnmt/tensor.hpp"

namespace minnmt {

enum class CellKind { kLstm, kGru };
enum class AttentionKind { kDot, kGeneral };

const char* to_string(CellKind kind);
const char* to_string(AttentionKind kind);
CellKind parse_cell_kind(const std::string& name);
AttentionKind parse_attention_kind(const std::string& name);

/// Source-side word feature: its vocabulary size and embedding width.
struct FactorSpec {
  std::size_t vocab_size = 0;
  std::size_t embedding_dim = 0;

  friend bool operator==(const FactorSpec&, const FactorSpec&) = default;
};

struct ModelConfig {
  std::size_t num_layers = 2;
  std::size_t rnn_size = 500;
  std::size_t embedding_dim = 300;
  CellKind cell = CellKind::kLstm;
  AttentionKind attention = AttentionKind::kDot;
  bool input_feed = true;
  double dropout = 0.3;
  std::size_t src_vocab_size = 0;
  std::size_t tgt_vocab_size = 0;
  /// Embedded and concatenated to the source word embedding.
  std::vector<FactorSpec> src_factors;
  /// Vocabulary sizes of target features, each predicted by its own head.
  std::vector<std::size_t> tgt_factors;

  void validate() const;

  /// Gate blocks per cell: 4 for LSTM (i, f, g, o), 3 for GRU (z, r, candidate).
  std::size_t gate_count() const { return cell == CellKind::kLstm ? 4 : 3; }
  std::size_t encoder_input_dim(std::size_t layer) const;
  std::size_t decoder_input_dim(std::size_t layer) const;

  /// Flat key/value form stored in model files.
  std::map<std::string, std::string> to_kv() const;
  static ModelConfig from_kv(const std::map<std::string, std::string>& kv);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Named parameter tensors.
using ParamMap = std::map<std::string, Tensor>;

/// Every parameter name and shape implied by a configuration.
///
///   src_emb [Vs, E], src_feat.{f} [Vf, Ef], tgt_emb [Vt, E]
///   {enc,dec}.{l}.Wx [in, G*r], .Wh, .b [G*r]
///     LSTM: Wh [r, 4r]; GRU: Wh [r, 2r] and Uc [r, r]
///   attn.Wa [r, r] (general only), attn.Wc [2r, r]
///   gen.W [r, Vt], gen.b [Vt], gen_feat.{f}.W [r, Vf], gen_feat.{f}.b [Vf]
std::map<std::string, Shape> parameter_shapes(const ModelConfig& config);

/// Uniform in [-0.1, 0.1], drawn in parameter-name order.
ParamMap init_parameters(const ModelConfig& config, Rng& rng);

/// Throws DimensionError naming the first missing, extra or misshapen tensor.
void check_parameters(const ModelConfig& config, const ParamMap& params);

}  // namespace minnmt
