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

#include "dataset.hpp"

#include <bit>
#include <cstring>

#include "minnmt/error.hpp"
#include "minnmt/io.hpp"

namespace minnmt::cli {

namespace {

static_assert(std::endian::native == std::endian::little, "dataset I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_ids(std::string& out, const std::vector<std::int32_t>& ids) {
  out.append(reinterpret_cast<const char*>(ids.data()), ids.size() * sizeof(std::int32_t));
}

class Reader {
 public:
  Reader(std::string_view bytes, const std::string& name) : bytes_(bytes), name_(name) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::vector<std::int32_t> ids(std::size_t n, const char* what) {
    need(n * sizeof(std::int32_t), what);
    std::vector<std::int32_t> v(n);
    std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(std::int32_t));
    pos_ += n * sizeof(std::int32_t);
    for (std::int32_t id : v)
      if (id < 0) fail(std::string("negative id in ") + what);
    return v;
  }

  bool done() const { return pos_ == bytes_.size(); }
  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError(name_ + ": " + msg + " at byte " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) fail(std::string("truncated ") + what);
  }

  std::string_view bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_dataset(const Dataset& data) {
  std::string out = "MNDS";
  put<std::uint32_t>(out, kDatasetVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.src_factors));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.tgt_factors));
  put<std::uint64_t>(out, data.pairs.size());
  for (const SentencePair& p : data.pairs) {
    if (p.src_features.size() != data.src_factors || p.tgt_features.size() != data.tgt_factors)
      throw DimensionError("pair has the wrong number of features");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.src.size()));
    put_ids(out, p.src);
    for (const auto& f : p.src_features) {
      if (f.size() != p.src.size()) throw DimensionError("source features are not aligned with words");
      put_ids(out, f);
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.tgt.size()));
    put_ids(out, p.tgt);
    for (const auto& f : p.tgt_features) {
      if (f.size() != p.tgt.size()) throw DimensionError("target features are not aligned with words");
      put_ids(out, f);
    }
  }
  return out;
}

Dataset parse_dataset(std::string_view bytes, const std::string& source_name) {
  Reader r(bytes, source_name);
  if (bytes.substr(0, 4) != "MNDS") r.fail("not a dataset file (bad magic)");
  r.get<std::uint32_t>("magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kDatasetVersion) r.fail("unsupported dataset version " + std::to_string(version));
  Dataset d;
  d.src_factors = r.get<std::uint32_t>("header");
  d.tgt_factors = r.get<std::uint32_t>("header");
  const auto n = r.get<std::uint64_t>("header");
  // Every pair takes at least 8 bytes; reject absurd counts before reserving.
  if (n > bytes.size() / 8) r.fail("pair count exceeds file size");
  d.pairs.resize(n);
  for (SentencePair& p : d.pairs) {
    const std::size_t s = r.get<std::uint32_t>("source length");
    p.src = r.ids(s, "source ids");
    for (std::size_t f = 0; f < d.src_factors; ++f) p.src_features.push_back(r.ids(s, "source features"));
    const std::size_t t = r.get<std::uint32_t>("target length");
    p.tgt = r.ids(t, "target ids");
    for (std::size_t f = 0; f < d.tgt_factors; ++f) p.tgt_features.push_back(r.ids(t, "target features"));
  }
  if (!r.done()) r.fail("trailing bytes");
  return d;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  write_file_atomic(path, serialize_dataset(data));
}

Dataset load_dataset(const std::filesystem::path& path) { return parse_dataset(read_file(path), path.string()); }

void check_dataset_ids(const Dataset& data, std::size_t src_vocab, std::size_t tgt_vocab,
                       const std::vector<std::size_t>& src_factor_vocabs,
                       const std::vector<std::size_t>& tgt_factor_vocabs, const std::string& source_name) {
  if (data.src_factors != src_factor_vocabs.size() || data.tgt_factors != tgt_factor_vocabs.size())
    throw FormatError(source_name + ": feature count does not match the vocabularies");
  auto check = [&](const std::vector<std::int32_t>& ids, std::size_t limit, std::size_t pair, const char* what) {
    for (std::int32_t id : ids)
      if (static_cast<std::size_t>(id) >= limit)
        throw FormatError(source_name + ": pair " + std::to_string(pair) + " has " + what + " id " +
                          std::to_string(id) + " outside a vocabulary of " + std::to_string(limit));
  };
  for (std::size_t i = 0; i < data.pairs.size(); ++i) {
    const SentencePair& p = data.pairs[i];
    check(p.src, src_vocab, i, "source");
    check(p.tgt, tgt_vocab, i, "target");
    for (std::size_t f = 0; f < p.src_features.size(); ++f) check(p.src_features[f], src_factor_vocabs[f], i, "source feature");
    for (std::size_t f = 0; f < p.tgt_features.size(); ++f) check(p.tgt_features[f], tgt_factor_vocabs[f], i, "target feature");
  }
}

}  // namespace minnmt::cli
