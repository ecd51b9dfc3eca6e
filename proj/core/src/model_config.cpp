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

#include "minnmt/model_config.hpp"

#include <charconv>
#include <sstream>

#include "minnmt/error.hpp"

namespace minnmt {

const char* to_string(CellKind kind) { return kind == CellKind::kLstm ? "lstm" : "gru"; }
const char* to_string(AttentionKind kind) { return kind == AttentionKind::kDot ? "dot" : "general"; }

CellKind parse_cell_kind(const std::string& name) {
  if (name == "lstm") return CellKind::kLstm;
  if (name == "gru") return CellKind::kGru;
  throw ConfigError("unknown cell kind '" + name + "' (expected lstm or gru)");
}

AttentionKind parse_attention_kind(const std::string& name) {
  if (name == "dot") return AttentionKind::kDot;
  if (name == "general") return AttentionKind::kGeneral;
  throw ConfigError("unknown attention kind '" + name + "' (expected dot or general)");
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(num_layers, "num_layers");
  positive(rnn_size, "rnn_size");
  positive(embedding_dim, "embedding_dim");
  positive(src_vocab_size, "src_vocab_size");
  positive(tgt_vocab_size, "tgt_vocab_size");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  for (const FactorSpec& f : src_factors) {
    positive(f.vocab_size, "source feature vocabulary size");
    positive(f.embedding_dim, "source feature embedding size");
  }
  for (std::size_t v : tgt_factors) positive(v, "target feature vocabulary size");
}

std::size_t ModelConfig::encoder_input_dim(std::size_t layer) const {
  if (layer > 0) return rnn_size;
  std::size_t d = embedding_dim;
  for (const FactorSpec& f : src_factors) d += f.embedding_dim;
  return d;
}

std::size_t ModelConfig::decoder_input_dim(std::size_t layer) const {
  if (layer > 0) return rnn_size;
  return embedding_dim + (input_feed ? rnn_size : 0);
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::size_t parse_size(const std::string& key, const std::string& s) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw FormatError("config field '" + key + "': expected an integer, got '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

}  // namespace

std::map<std::string, std::string> ModelConfig::to_kv() const {
  std::map<std::string, std::string> kv;
  kv["num_layers"] = std::to_string(num_layers);
  kv["rnn_size"] = std::to_string(rnn_size);
  kv["embedding_dim"] = std::to_string(embedding_dim);
  kv["cell"] = to_string(cell);
  kv["attention"] = to_string(attention);
  kv["input_feed"] = input_feed ? "1" : "0";
  kv["dropout"] = format_double(dropout);
  kv["src_vocab_size"] = std::to_string(src_vocab_size);
  kv["tgt_vocab_size"] = std::to_string(tgt_vocab_size);
  std::string sf;
  for (const FactorSpec& f : src_factors)
    sf += (sf.empty() ? "" : ",") + std::to_string(f.vocab_size) + ":" + std::to_string(f.embedding_dim);
  kv["src_factors"] = sf;
  std::string tf;
  for (std::size_t v : tgt_factors) tf += (tf.empty() ? "" : ",") + std::to_string(v);
  kv["tgt_factors"] = tf;
  return kv;
}

ModelConfig ModelConfig::from_kv(const std::map<std::string, std::string>& kv) {
  const ModelConfig defaults;
  const auto known = defaults.to_kv();
  for (const auto& [k, v] : kv)
    if (!known.count(k)) throw FormatError("unknown config field '" + k + "'");
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("missing config field '" + key + "'");
    return it->second;
  };
  ModelConfig c;
  c.num_layers = parse_size("num_layers", get("num_layers"));
  c.rnn_size = parse_size("rnn_size", get("rnn_size"));
  c.embedding_dim = parse_size("embedding_dim", get("embedding_dim"));
  c.cell = parse_cell_kind(get("cell"));
  c.attention = parse_attention_kind(get("attention"));
  const std::string& feed = get("input_feed");
  if (feed != "0" && feed != "1") throw FormatError("config field 'input_feed' must be 0 or 1");
  c.input_feed = feed == "1";
  const std::string& drop = get("dropout");
  auto [p, ec] = std::from_chars(drop.data(), drop.data() + drop.size(), c.dropout);
  if (ec != std::errc{} || p != drop.data() + drop.size()) throw FormatError("config field 'dropout' is not a number");
  c.src_vocab_size = parse_size("src_vocab_size", get("src_vocab_size"));
  c.tgt_vocab_size = parse_size("tgt_vocab_size", get("tgt_vocab_size"));
  for (const std::string& item : split(get("src_factors"), ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 2) throw FormatError("config field 'src_factors' malformed: '" + item + "'");
    c.src_factors.push_back({parse_size("src_factors", parts[0]), parse_size("src_factors", parts[1])});
  }
  for (const std::string& item : split(get("tgt_factors"), ','))
    c.tgt_factors.push_back(parse_size("tgt_factors", item));
  c.validate();
  return c;
}

std::map<std::string, Shape> parameter_shapes(const ModelConfig& c) {
  c.validate();
  const std::size_t r = c.rnn_size, g = c.gate_count();
  std::map<std::string, Shape> s;
  s["src_emb"] = {c.src_vocab_size, c.embedding_dim};
  s["tgt_emb"] = {c.tgt_vocab_size, c.embedding_dim};
  for (std::size_t f = 0; f < c.src_factors.size(); ++f)
    s["src_feat." + std::to_string(f)] = {c.src_factors[f].vocab_size, c.src_factors[f].embedding_dim};
  for (const char* side : {"enc", "dec"}) {
    for (std::size_t l = 0; l < c.num_layers; ++l) {
      const std::string p = std::string(side) + "." + std::to_string(l) + ".";
      const std::size_t in = side[0] == 'e' ? c.encoder_input_dim(l) : c.decoder_input_dim(l);
      s[p + "Wx"] = {in, g * r};
      s[p + "b"] = {g * r};
      if (c.cell == CellKind::kLstm) {
        s[p + "Wh"] = {r, 4 * r};
      } else {
        s[p + "Wh"] = {r, 2 * r};
        s[p + "Uc"] = {r, r};
      }
    }
  }
  if (c.attention == AttentionKind::kGeneral) s["attn.Wa"] = {r, r};
  s["attn.Wc"] = {2 * r, r};
  s["gen.W"] = {r, c.tgt_vocab_size};
  s["gen.b"] = {c.tgt_vocab_size};
  for (std::size_t f = 0; f < c.tgt_factors.size(); ++f) {
    s["gen_feat." + std::to_string(f) + ".W"] = {r, c.tgt_factors[f]};
    s["gen_feat." + std::to_string(f) + ".b"] = {c.tgt_factors[f]};
  }
  return s;
}

ParamMap init_parameters(const ModelConfig& config, Rng& rng) {
  ParamMap params;
  for (const auto& [name, shape] : parameter_shapes(config)) {
    Tensor t(shape);
    for (double& v : t.storage()) v = rng.uniform(-0.1, 0.1);
    params.emplace(name, std::move(t));
  }
  return params;
}

void check_parameters(const ModelConfig& config, const ParamMap& params) {
  const auto shapes = parameter_shapes(config);
  for (const auto& [name, shape] : shapes) {
    auto it = params.find(name);
    if (it == params.end()) throw DimensionError("missing parameter '" + name + "'");
    if (it->second.shape() != shape)
      throw DimensionError("parameter '" + name + "' has shape " + shape_string(it->second.shape()) + ", expected " +
                           shape_string(shape));
  }
  for (const auto& [name, t] : params)
    if (!shapes.count(name)) throw DimensionError("unexpected parameter '" + name + "'");
}

}  // namespace minnmt
