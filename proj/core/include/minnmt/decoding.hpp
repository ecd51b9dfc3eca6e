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

// Interface between beam search and a model that can run decoder steps for
// many rows at once. Implemented by the forward-only runtime and by the
// training stack.

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "minnmt/model_config.hpp"

namespace minnmt {

struct SourceSentence {
  std::vector<std::int32_t> ids;
  std::vector<std::vector<std::int32_t>> features;  // per source factor, aligned with ids
};

/// Next-token distributions for every live row.
struct StepResult {
  std::size_t rows = 0;
  std::size_t vocab = 0;
  std::vector<double> log_probs;                       // [rows, vocab]
  std::vector<std::size_t> feature_vocab;              // per target factor
  std::vector<std::vector<double>> feature_log_probs;  // per target factor, [rows, Vf]

  const double* row(std::size_t r) const { return log_probs.data() + r * vocab; }
};

/// Decoder state for a set of rows. Each row belongs to one of the sources
/// the session was started with.
class DecodeSession {
 public:
  virtual ~DecodeSession() = default;

  virtual std::size_t rows() const = 0;
  /// Source index of each row.
  virtual const std::vector<std::size_t>& row_source() const = 0;
  /// Feed one token per row, advance every row by one step.
  virtual void step(std::span<const std::int32_t> prev, StepResult& out) = 0;
  /// New row i continues old row parents[i]. Rows may be dropped or repeated.
  virtual void reorder(std::span<const std::size_t> parents) = 0;
};

class StepModel {
 public:
  virtual ~StepModel() = default;

  virtual const ModelConfig& config() const = 0;
  /// Encodes all sources together. The session starts with one row per
  /// source, in order. Sources must be non-empty.
  virtual std::unique_ptr<DecodeSession> start(std::span<const SourceSentence> sources) const = 0;
};

}  // namespace minnmt
