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

// Binarized parallel corpus: token ids and lengths for every pair.
//
//   "MNDS" u32 version, u32 source factors, u32 target factors, u64 pairs,
//   then per pair: u32 S, S x i32 source ids, per source factor S x i32,
//                  u32 T, T x i32 target ids, per target factor T x i32.
//
// All integers little-endian.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "minnmt/textpipe.hpp"

namespace minnmt::cli {

inline constexpr std::uint32_t kDatasetVersion = 1;

struct Dataset {
  std::size_t src_factors = 0;
  std::size_t tgt_factors = 0;
  std::vector<SentencePair> pairs;
};

std::string serialize_dataset(const Dataset& data);
Dataset parse_dataset(std::string_view bytes, const std::string& source_name = "<memory>");
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

/// Throws FormatError if any id is out of range for the given sizes.
void check_dataset_ids(const Dataset& data, std::size_t src_vocab, std::size_t tgt_vocab,
                       const std::vector<std::size_t>& src_factor_vocabs,
                       const std::vector<std::size_t>& tgt_factor_vocabs, const std::string& source_name);

}  // namespace minnmt::cli
