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

#include <CLI11.hpp>

namespace minnmt::cli {

// Each registers a subcommand whose callback runs the command.
void add_preprocess(CLI::App& app);
void add_translate(CLI::App& app);
void add_tokenize(CLI::App& app);
void add_detokenize(CLI::App& app);
void add_learn_bpe(CLI::App& app);
void add_export_embeddings(CLI::App& app);
void add_eval_bleu(CLI::App& app);
void add_train(CLI::App& app);  // in the training-enabled library only

/// Translate options on `app` itself, for the deployment-only binary.
void setup_translate(CLI::App& app);

}  // namespace minnmt::cli
