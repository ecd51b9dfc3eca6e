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

#include "minnmt/model_file.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "minnmt/error.hpp"
#include "minnmt/io.hpp"

namespace minnmt {

namespace {

class Writer {
 public:
  void bytes(std::string_view b) { out_ += b; }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  void block(std::string_view tag, const Writer& payload) {
    bytes(tag);
    u64(payload.out_.size());
    bytes(payload.out_);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(std::string_view data, const std::string& source) : data_(data), source_(source) {}

  std::string_view bytes(std::size_t n) {
    if (n > data_.size() - pos_) fail("truncated");
    std::string_view v = data_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  std::uint32_t u32() {
    auto b = bytes(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(i)]);
    return v;
  }
  std::uint64_t u64() {
    auto b = bytes(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(i)]);
    return v;
  }
  std::string str() { return std::string(bytes(u32())); }
  bool done() const { return pos_ == data_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(source_ + ": " + what + " at byte " + std::to_string(pos_));
  }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
  const std::string& source_;
};

void write_kv(Writer& w, const std::map<std::string, std::string>& kv) {
  w.u32(static_cast<std::uint32_t>(kv.size()));
  for (const auto& [k, v] : kv) {
    w.str(k);
    w.str(v);
  }
}

std::map<std::string, std::string> read_kv(Reader& r) {
  std::map<std::string, std::string> kv;
  for (std::uint32_t n = r.u32(); n > 0; --n) {
    std::string k = r.str();
    kv[k] = r.str();
  }
  return kv;
}

std::string vocab_name(const char* side, std::size_t f) { return std::string(side) + "_feat." + std::to_string(f); }

}  // namespace

void ModelFile::validate() const {
  config.validate();
  auto check = [](const char* what, std::size_t have, std::size_t want) {
    if (have != want)
      throw FormatError(std::string(what) + " vocabulary has " + std::to_string(have) + " entries, config says " +
                        std::to_string(want));
  };
  check("source", src_vocab.size(), config.src_vocab_size);
  check("target", tgt_vocab.size(), config.tgt_vocab_size);
  if (src_feature_vocabs.size() != config.src_factors.size() || tgt_feature_vocabs.size() != config.tgt_factors.size())
    throw FormatError("feature vocabulary count does not match the config");
  for (std::size_t f = 0; f < src_feature_vocabs.size(); ++f)
    check("source feature", src_feature_vocabs[f].size(), config.src_factors[f].vocab_size);
  for (std::size_t f = 0; f < tgt_feature_vocabs.size(); ++f)
    check("target feature", tgt_feature_vocabs[f].size(), config.tgt_factors[f]);
  check_parameters(config, params);
}

std::string serialize_model(const ModelFile& m) {
  m.validate();
  if (m.precision != Precision::kFloat32 && m.precision != Precision::kFloat64)
    throw ConfigError("precision must be 32 or 64");
  Writer w;
  w.bytes("MNMT");
  w.u32(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(m.precision));

  Writer conf;
  write_kv(conf, m.config.to_kv());
  w.block("CONF", conf);

  auto vocab_block = [&](const std::string& name, const Vocab& v) {
    Writer b;
    b.str(name);
    const auto tokens = v.regular_tokens();
    b.u32(static_cast<std::uint32_t>(tokens.size()));
    for (const auto& t : tokens) b.str(t);
    w.block("VOCB", b);
  };
  vocab_block("src", m.src_vocab);
  vocab_block("tgt", m.tgt_vocab);
  for (std::size_t f = 0; f < m.src_feature_vocabs.size(); ++f) vocab_block(vocab_name("src", f), m.src_feature_vocabs[f]);
  for (std::size_t f = 0; f < m.tgt_feature_vocabs.size(); ++f) vocab_block(vocab_name("tgt", f), m.tgt_feature_vocabs[f]);

  for (const auto& [name, t] : m.params) {
    Writer b;
    b.str(name);
    b.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) b.u64(d);
    for (double v : t.storage()) {
      if (m.precision == Precision::kFloat64)
        b.u64(std::bit_cast<std::uint64_t>(v));
      else
        b.u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    w.block("TENS", b);
  }
  if (!m.train_state.empty()) {
    Writer b;
    write_kv(b, m.train_state);
    w.block("OPTM", b);
  }
  w.block(std::string_view("END\0", 4), Writer{});
  return w.take();
}

ModelFile parse_model(std::string_view bytes, const std::string& source) {
  Reader r(bytes, source);
  if (bytes.size() < 4 || bytes.substr(0, 4) != "MNMT") r.fail("not a model file (bad magic)");
  r.bytes(4);
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion)
    r.fail("unsupported model format version " + std::to_string(version) + " (this build reads version " +
           std::to_string(kModelFormatVersion) + ")");
  const std::uint32_t precision = r.u32();
  if (precision != 32 && precision != 64) r.fail("unknown precision " + std::to_string(precision));

  ModelFile m;
  m.precision = static_cast<Precision>(precision);
  bool have_config = false, ended = false;
  std::map<std::string, Vocab> vocabs;
  while (!ended) {
    const std::string tag(r.bytes(4));
    const std::uint64_t len = r.u64();
    Reader b(r.bytes(len), source);
    if (tag == "CONF") {
      if (have_config) r.fail("duplicate config block");
      m.config = ModelConfig::from_kv(read_kv(b));
      have_config = true;
    } else if (tag == "VOCB") {
      std::string name = b.str();
      std::vector<std::string> tokens(b.u32());
      for (auto& t : tokens) t = b.str();
      if (!vocabs.emplace(name, Vocab(std::move(tokens))).second) r.fail("duplicate vocabulary '" + name + "'");
    } else if (tag == "TENS") {
      std::string name = b.str();
      Shape shape(b.u32());
      if (shape.empty()) r.fail("tensor '" + name + "' has rank 0");
      std::size_t total = 1;
      for (auto& d : shape) {
        d = b.u64();
        if (d == 0 || d > (std::size_t{1} << 32)) r.fail("tensor '" + name + "' has a bad dimension");
        total *= d;
      }
      std::vector<double> values(total);
      for (double& v : values) {
        v = precision == 64 ? std::bit_cast<double>(b.u64()) : static_cast<double>(std::bit_cast<float>(b.u32()));
        if (!std::isfinite(v)) r.fail("tensor '" + name + "' holds a non-finite value");
      }
      if (!m.params.emplace(name, Tensor(std::move(shape), std::move(values))).second)
        r.fail("duplicate tensor '" + name + "'");
    } else if (tag == "OPTM") {
      m.train_state = read_kv(b);
    } else if (tag == std::string_view("END\0", 4)) {
      ended = true;
    } else {
      r.fail("unknown block tag");
    }
    if (!b.done()) r.fail("block " + tag.substr(0, 3) + " has trailing bytes");
  }
  if (!r.done()) r.fail("trailing bytes after end block");
  if (!have_config) r.fail("missing config block");

  auto take = [&](const std::string& name) {
    auto it = vocabs.find(name);
    if (it == vocabs.end()) r.fail("missing vocabulary '" + name + "'");
    Vocab v = std::move(it->second);
    vocabs.erase(it);
    return v;
  };
  m.src_vocab = take("src");
  m.tgt_vocab = take("tgt");
  for (std::size_t f = 0; f < m.config.src_factors.size(); ++f) m.src_feature_vocabs.push_back(take(vocab_name("src", f)));
  for (std::size_t f = 0; f < m.config.tgt_factors.size(); ++f) m.tgt_feature_vocabs.push_back(take(vocab_name("tgt", f)));
  if (!vocabs.empty()) r.fail("unexpected vocabulary '" + vocabs.begin()->first + "'");
  try {
    m.validate();
  } catch (const Error& e) {
    throw FormatError(source + ": " + e.what());
  }
  return m;
}

void save_model(const std::filesystem::path& path, const ModelFile& model) {
  write_file_atomic(path, serialize_model(model));
}

ModelFile load_model(const std::filesystem::path& path) { return parse_model(read_file(path), path.string()); }

}  // namespace minnmt
