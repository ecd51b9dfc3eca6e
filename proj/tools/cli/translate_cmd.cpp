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

#include <iostream>
#include <memory>

#include "commands.hpp"
#include "common.hpp"
#include "minnmt/error.hpp"
#include "minnmt/inference.hpp"
#include "minnmt/translate.hpp"

namespace minnmt::cli {

namespace {

struct TranslateOptions {
  std::string model;
  std::string input = "-";
  std::string output = "-";
  std::size_t beam = 5;
  std::size_t batch_size = 30;
  std::size_t max_length = 0;
  std::size_t n_best = 1;
  bool length_norm = false;
  bool tokenized_output = false;
  std::string precision = "model";
  bool quiet = false;
  TextOptions text;
};

void run_translate(const TranslateOptions& o) {
  BeamConfig beam;
  beam.beam_size = o.beam;
  beam.max_length = o.max_length;
  beam.n_best = o.n_best;
  beam.length_norm = o.length_norm ? LengthNorm::kByLength : LengthNorm::kNone;
  beam.validate();
  if (o.batch_size == 0) throw ConfigError("batch size must be at least 1");

  LoadedModel lm = o.precision == "model" ? load_for_inference(o.model)
                   : load_for_inference(o.model, o.precision == "32" ? Precision::kFloat32 : Precision::kFloat64);
  const ModelFile& mf = lm.file;
  const LineSplitter src_split(o.text, mf.config.src_factors.size());
  const LineSplitter tgt_join(o.text, 0);

  const std::vector<std::string> lines = read_text_lines(o.input);
  std::vector<SourceSentence> sources(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const TokenizedLine t = src_split.split(lines[i], i + 1);
    sources[i].ids = mf.src_vocab.encode(t.words);
    for (std::size_t f = 0; f < t.features.size(); ++f)
      sources[i].features.push_back(mf.src_feature_vocabs[f].encode(t.features[f]));
  }

  const Translations tr = translate_batch(*lm.model, sources, beam, o.batch_size);

  std::vector<std::string> out;
  for (std::size_t i = 0; i < tr.nbest.size(); ++i) {
    for (const Hypothesis& h : tr.nbest[i]) {
      const std::size_t n = h.tokens.empty() ? 0 : h.tokens.size() - 1;  // drop </s>
      TokenizedLine t;
      t.words = mf.tgt_vocab.decode(std::span(h.tokens).first(n));
      for (std::size_t f = 0; f < h.features.size(); ++f)
        t.features.push_back(mf.tgt_feature_vocabs[f].decode(std::span(h.features[f]).first(n)));
      std::string text = tgt_join.join(t, o.tokenized_output);
      if (o.n_best > 1) {
        char score[64];
        std::snprintf(score, sizeof score, "%.6f", h.score);
        text = std::to_string(i) + " ||| " + text + " ||| " + score;
      }
      out.push_back(std::move(text));
    }
  }
  write_text_lines(o.output, out);
  if (!o.quiet)
    print_json_line(std::cerr, {{"sentences", tr.stats.sentences},
                                {"source_tokens", tr.stats.source_tokens},
                                {"seconds", tr.stats.seconds},
                                {"tokens_per_second", tr.stats.tokens_per_second}});
}

void add_options(CLI::App& app, std::shared_ptr<TranslateOptions> o) {
  app.add_option("--model", o->model, "Model file")->required()->check(CLI::ExistingFile);
  app.add_option("--input", o->input, "Source text, one sentence per line ('-' for stdin)")->capture_default_str();
  app.add_option("--output", o->output, "Translations ('-' for stdout)")->capture_default_str();
  app.add_option("--beam", o->beam, "Beam size")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--batch-size", o->batch_size, "Sentences decoded together")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--max-length", o->max_length, "Maximum output length including </s> (0: 2 * source + 5)")
      ->capture_default_str();
  app.add_option("--n-best", o->n_best, "Hypotheses per sentence; above 1 prints 'index ||| text ||| score'")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_flag("--length-norm", o->length_norm, "Rank finished hypotheses by score / length");
  app.add_flag("--tokenized-output", o->tokenized_output, "Write tokens instead of detokenized text");
  app.add_option("--precision", o->precision, "Arithmetic precision: model, 32 or 64")
      ->capture_default_str()
      ->check(CLI::IsMember({"model", "32", "64"}));
  app.add_flag("--quiet", o->quiet, "Do not print throughput statistics on stderr");
  add_text_options(app, o->text);
  app.callback([o] { run_translate(*o); });
}

}  // namespace

void add_translate(CLI::App& app) {
  add_options(*app.add_subcommand("translate", "Translate text with a trained model"),
              std::make_shared<TranslateOptions>());
}

void setup_translate(CLI::App& app) { add_options(app, std::make_shared<TranslateOptions>()); }

}  // namespace minnmt::cli
