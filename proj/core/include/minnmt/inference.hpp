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

// Forward-only model for deployment: parameters and scratch buffers only, no
// tape. In 64-bit mode it performs the same arithmetic, in the same order, as
// the tape-recorded model, so both produce bit-identical scores.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "minnmt/decoding.hpp"
#include "minnmt/model_file.hpp"

namespace minnmt {

template <typename T>
class InferenceModel final : public StepModel {
 public:
  InferenceModel(const ModelConfig& config, const ParamMap& params);

  const ModelConfig& config() const override { return config_; }
  std::unique_ptr<DecodeSession> start(std::span<const SourceSentence> sources) const override;

  /// Bytes held by parameters.
  std::size_t parameter_bytes() const;

  struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<T> data;
    const T* row(std::size_t r) const { return data.data() + r * cols; }
  };
  const Matrix& param(const std::string& name) const;

 private:
  ModelConfig config_;
  std::map<std::string, Matrix> params_;
};

extern template class InferenceModel<float>;
extern template class InferenceModel<double>;

/// Load a model file for translation, in its stored precision unless
/// `precision` overrides it.
struct LoadedModel {
  ModelFile file;  // vocabularies and config; parameters moved out
  std::unique_ptr<StepModel> model;
};

LoadedModel load_for_inference(const std::filesystem::path& path);
LoadedModel load_for_inference(const std::filesystem::path& path, Precision precision);
std::unique_ptr<StepModel> make_inference_model(const ModelConfig& config, const ParamMap& params, Precision precision);

}  // namespace minnmt
