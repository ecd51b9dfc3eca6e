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

#include "cli/commands.hpp"
#include "cli/common.hpp"

int main(int argc, char** argv) {
  CLI::App app{"minnmt: train and run attention encoder-decoder translation models"};
  app.require_subcommand(1);
  minnmt::cli::add_preprocess(app);
  minnmt::cli::add_train(app);
  minnmt::cli::add_translate(app);
  minnmt::cli::add_tokenize(app);
  minnmt::cli::add_detokenize(app);
  minnmt::cli::add_learn_bpe(app);
  minnmt::cli::add_export_embeddings(app);
  minnmt::cli::add_eval_bleu(app);
  return minnmt::cli::run_app(app, argc, argv);
}
