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

// Binary model file, little-endian throughout:
//
//   "MNMT" u32 version u32 precision(32|64)
//   blocks: tag[4] u64 payload_bytes payload
//     CONF  key/value pairs of ModelConfig
//     VOCB  one per vocabulary: name, regular tokens in id order
//     TENS  one per parameter, sorted by name: name, rank, u64 dims, values
//     OPTM  optional key/value training state (checkpoints)
//     END\0 empty, must be last
//
// Strings are u32 length + bytes. Values are IEEE binary32 or binary64 per
// the precision field.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "minnmt/model_config.hpp"
#include "minnmt/textpipe.hpp"

namespace minnmt {

inline constexpr std::uint32_t kModelFormatVersion = 1;

enum class Precision : std::uint32_t { kFloat32 = 32, kFloat64 = 64 };

struct ModelFile {
  ModelConfig config;
  Vocab src_vocab;
  Vocab tgt_vocab;
  std::vector<Vocab> src_feature_vocabs;
  std::vector<Vocab> tgt_feature_vocabs;
  ParamMap params;
  Precision precision = Precision::kFloat64;
  std::map<std::string, std::string> train_state;

  /// Vocabulary sizes against the config, parameter shapes against the
  /// config. Throws FormatError or DimensionError.
  void validate() const;
};

std::string serialize_model(const ModelFile& model);
ModelFile parse_model(std::string_view bytes, const std::string& source_name = "<memory>");

void save_model(const std::filesystem::path& path, const ModelFile& model);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace minnmt
