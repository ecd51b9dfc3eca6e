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

// Decoder steps run through the tape-recorded model, for cross-checking the
// forward-only runtime and for translating during training.

#include "minnmt/decoding.hpp"

namespace minnmt {

class TapeStepModel final : public StepModel {
 public:
  /// Parameters are borrowed and must outlive the model and its sessions.
  TapeStepModel(const ModelConfig& config, const ParamMap& params);

  const ModelConfig& config() const override { return config_; }
  std::unique_ptr<DecodeSession> start(std::span<const SourceSentence> sources) const override;

 private:
  ModelConfig config_;
  const ParamMap* params_;
};

}  // namespace minnmt
