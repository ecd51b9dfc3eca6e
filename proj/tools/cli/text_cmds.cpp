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
#include <map>
#include <memory>
#include <sstream>

#include "commands.hpp"
#include "common.hpp"
#include "dataset.hpp"
#include "minnmt/error.hpp"
#include "minnmt/eval.hpp"
#include "minnmt/io.hpp"
#include "minnmt/model_file.hpp"

namespace minnmt::cli {

namespace {

struct StreamOptions {
  std::string input = "-";
  std::string output = "-";
  std::string joiner{kJoiner};
};

void add_stream_options(CLI::App& app, StreamOptions& o) {
  app.add_option("--input", o.input, "Input file ('-' for stdin)")->capture_default_str();
  app.add_option("--output", o.output, "Output file ('-' for stdout)")->capture_default_str();
  app.add_option("--joiner", o.joiner, "Joiner marker")->capture_default_str();
}

// Line by line when writing to stdout; whole-file atomic write otherwise.
template <typename Fn>
void map_lines(const StreamOptions& o, Fn fn) {
  if (o.input == "-" && o.output == "-") {
    std::string line;
    while (std::getline(std::cin, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::cout << fn(line) << '\n';
    }
    std::cout.flush();
    if (std::cin.bad() || !std::cout) throw IoError("stream I/O failed");
    return;
  }
  std::vector<std::string> lines = read_text_lines(o.input);
  for (auto& l : lines) l = fn(l);
  write_text_lines(o.output, lines);
}

// ---------------------------------------------------------------------------

struct PreprocessOptions {
  std::string train_src, train_tgt, valid_src, valid_tgt, save_dir;
  std::size_t src_vocab_size = 50000;
  std::size_t tgt_vocab_size = 50000;
  std::size_t max_length = 0;
  std::size_t src_factors = 0;
  std::size_t tgt_factors = 0;
  TextOptions text;
};

struct Corpus {
  std::vector<TokenizedLine> src, tgt;
};

Corpus read_corpus(const PreprocessOptions& o, const std::string& src_path, const std::string& tgt_path,
                   std::size_t* dropped) {
  const auto src = read_lines(src_path);
  const auto tgt = read_lines(tgt_path);
  if (src.size() != tgt.size())
    throw FormatError("line count mismatch: " + src_path + " has " + std::to_string(src.size()) + " lines, " +
                      tgt_path + " has " + std::to_string(tgt.size()));
  const LineSplitter ssplit(o.text, o.src_factors), tsplit(o.text, o.tgt_factors);
  Corpus c;
  for (std::size_t i = 0; i < src.size(); ++i) {
    TokenizedLine s = ssplit.split(src[i], i + 1), t = tsplit.split(tgt[i], i + 1);
    const bool too_long = o.max_length && (s.words.size() > o.max_length || t.words.size() > o.max_length);
    if (s.words.empty() || t.words.empty() || too_long) {
      ++*dropped;
      continue;
    }
    c.src.push_back(std::move(s));
    c.tgt.push_back(std::move(t));
  }
  return c;
}

Vocab vocab_of(const std::vector<TokenizedLine>& lines, std::size_t max_size, std::optional<std::size_t> factor) {
  std::vector<std::string> all;
  for (const auto& l : lines) {
    const auto& toks = factor ? l.features[*factor] : l.words;
    all.insert(all.end(), toks.begin(), toks.end());
  }
  return build_vocab(all, max_size);
}

struct Vocabs {
  Vocab src, tgt;
  std::vector<Vocab> src_feat, tgt_feat;
};

Dataset encode(const Corpus& c, const Vocabs& v) {
  Dataset d;
  d.src_factors = v.src_feat.size();
  d.tgt_factors = v.tgt_feat.size();
  for (std::size_t i = 0; i < c.src.size(); ++i) {
    SentencePair p;
    p.src = v.src.encode(c.src[i].words);
    p.tgt = v.tgt.encode(c.tgt[i].words);
    for (std::size_t f = 0; f < v.src_feat.size(); ++f) p.src_features.push_back(v.src_feat[f].encode(c.src[i].features[f]));
    for (std::size_t f = 0; f < v.tgt_feat.size(); ++f) p.tgt_features.push_back(v.tgt_feat[f].encode(c.tgt[i].features[f]));
    d.pairs.push_back(std::move(p));
  }
  return d;
}

void run_preprocess(const PreprocessOptions& o) {
  if (o.valid_src.empty() != o.valid_tgt.empty()) throw ConfigError("--valid-src and --valid-tgt go together");
  const std::filesystem::path dir(o.save_dir);
  std::filesystem::create_directories(dir);

  std::size_t dropped = 0;
  const Corpus train = read_corpus(o, o.train_src, o.train_tgt, &dropped);
  if (train.src.empty()) throw FormatError("no usable training pairs");
  Vocabs v;
  v.src = vocab_of(train.src, o.src_vocab_size, std::nullopt);
  v.tgt = vocab_of(train.tgt, o.tgt_vocab_size, std::nullopt);
  for (std::size_t f = 0; f < o.src_factors; ++f) v.src_feat.push_back(vocab_of(train.src, SIZE_MAX, f));
  for (std::size_t f = 0; f < o.tgt_factors; ++f) v.tgt_feat.push_back(vocab_of(train.tgt, SIZE_MAX, f));

  save_dataset(dir / "train.mnds", encode(train, v));
  std::size_t valid_pairs = 0, valid_dropped = 0;
  if (!o.valid_src.empty()) {
    const Corpus valid = read_corpus(o, o.valid_src, o.valid_tgt, &valid_dropped);
    valid_pairs = valid.src.size();
    save_dataset(dir / "valid.mnds", encode(valid, v));
  }
  save_vocab_file(dir / "src.vocab", v.src);
  save_vocab_file(dir / "tgt.vocab", v.tgt);
  for (std::size_t f = 0; f < v.src_feat.size(); ++f)
    save_vocab_file(dir / ("src.feat" + std::to_string(f) + ".vocab"), v.src_feat[f]);
  for (std::size_t f = 0; f < v.tgt_feat.size(); ++f)
    save_vocab_file(dir / ("tgt.feat" + std::to_string(f) + ".vocab"), v.tgt_feat[f]);

  print_json_line(std::cout, {{"train_pairs", train.src.size()},
                              {"train_dropped", dropped},
                              {"valid_pairs", valid_pairs},
                              {"valid_dropped", valid_dropped},
                              {"src_vocab", v.src.size()},
                              {"tgt_vocab", v.tgt.size()}});
}

// ---------------------------------------------------------------------------

struct LearnBpeOptions {
  std::vector<std::string> inputs;
  std::string output = "-";
  std::size_t merges = 32000;
  bool tokenize = false;
  std::string joiner{kJoiner};
};

void run_learn_bpe(const LearnBpeOptions& o) {
  std::map<std::string, std::int64_t> counts;
  const TokenizerOptions topts{o.joiner};
  for (const std::string& path : o.inputs)
    for (const std::string& line : read_text_lines(path))
      for (const std::string& tok : o.tokenize ? tokenize(line, topts) : split_whitespace(line)) ++counts[tok];
  std::ostringstream out;
  write_bpe(out, learn_bpe(counts, o.merges));
  if (o.output == "-")
    std::cout << out.str() << std::flush;
  else
    write_file_atomic(o.output, out.str());
}

// ---------------------------------------------------------------------------

struct ExportOptions {
  std::string model, side, output;
};

void run_export(const ExportOptions& o) {
  if (o.side != "src" && o.side != "tgt") throw ConfigError("side must be 'src' or 'tgt', got '" + o.side + "'");
  const ModelFile mf = load_model(o.model);
  const Tensor& table = mf.params.at(o.side == "src" ? "src_emb" : "tgt_emb");
  std::ostringstream out;
  write_embeddings(out, o.side == "src" ? mf.src_vocab : mf.tgt_vocab, table);
  if (o.output == "-")
    std::cout << out.str() << std::flush;
  else
    write_file_atomic(o.output, out.str());
}

// ---------------------------------------------------------------------------

struct BleuOptions {
  std::string hyp, ref;
  bool smooth = false;
  bool tokenize = false;
  std::string joiner{kJoiner};
};

void run_bleu(const BleuOptions& o) {
  const auto hyp = read_text_lines(o.hyp);
  const auto ref = read_text_lines(o.ref);
  if (hyp.size() != ref.size())
    throw FormatError("line count mismatch: " + std::to_string(hyp.size()) + " hypotheses, " +
                      std::to_string(ref.size()) + " references");
  const TokenizerOptions topts{o.joiner};
  auto toks = [&](const std::vector<std::string>& lines) {
    std::vector<std::vector<std::string>> out;
    for (const auto& l : lines) out.push_back(o.tokenize ? tokenize(l, topts) : split_whitespace(l));
    return out;
  };
  const BleuReport r = bleu(toks(hyp), toks(ref), o.smooth);
  print_json_line(std::cout, {{"bleu", r.bleu},
                              {"precisions", r.precisions},
                              {"matches", r.matches},
                              {"totals", r.totals},
                              {"brevity_penalty", r.brevity_penalty},
                              {"candidate_length", r.candidate_length},
                              {"reference_length", r.reference_length}});
}

}  // namespace

void add_preprocess(CLI::App& app) {
  auto o = std::make_shared<PreprocessOptions>();
  auto* sub = app.add_subcommand("preprocess", "Tokenize a parallel corpus, build vocabularies, binarize");
  sub->add_option("--train-src", o->train_src, "Training source text")->required()->check(CLI::ExistingFile);
  sub->add_option("--train-tgt", o->train_tgt, "Training target text")->required()->check(CLI::ExistingFile);
  sub->add_option("--valid-src", o->valid_src, "Validation source text")->check(CLI::ExistingFile);
  sub->add_option("--valid-tgt", o->valid_tgt, "Validation target text")->check(CLI::ExistingFile);
  sub->add_option("--save-dir", o->save_dir, "Output directory")->required();
  sub->add_option("--src-vocab-size", o->src_vocab_size, "Source vocabulary size including specials")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{5}, SIZE_MAX));
  sub->add_option("--tgt-vocab-size", o->tgt_vocab_size, "Target vocabulary size including specials")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{5}, SIZE_MAX));
  sub->add_option("--max-length", o->max_length, "Drop pairs with a side longer than this (0: keep all)")
      ->capture_default_str();
  sub->add_option("--src-factors", o->src_factors, "Features per source token (input must be pretokenized)")
      ->capture_default_str();
  sub->add_option("--tgt-factors", o->tgt_factors, "Features per target token (input must be pretokenized)")
      ->capture_default_str();
  add_text_options(*sub, o->text);
  sub->callback([o] { run_preprocess(*o); });
}

void add_tokenize(CLI::App& app) {
  auto o = std::make_shared<StreamOptions>();
  auto* sub = app.add_subcommand("tokenize", "Reversible tokenization, one line at a time");
  add_stream_options(*sub, *o);
  sub->callback([o] {
    const TokenizerOptions topts{o->joiner};
    map_lines(*o, [&](const std::string& l) { return join_tokens(tokenize(l, topts)); });
  });
}

void add_detokenize(CLI::App& app) {
  auto o = std::make_shared<StreamOptions>();
  auto* sub = app.add_subcommand("detokenize", "Undo tokenize, one line at a time");
  add_stream_options(*sub, *o);
  sub->callback([o] {
    const TokenizerOptions topts{o->joiner};
    map_lines(*o, [&](const std::string& l) { return detokenize(split_whitespace(l), topts); });
  });
}

void add_learn_bpe(CLI::App& app) {
  auto o = std::make_shared<LearnBpeOptions>();
  auto* sub = app.add_subcommand("learn-bpe", "Learn BPE merges from tokenized text");
  sub->add_option("--input", o->inputs, "Tokenized text files ('-' for stdin)")->required();
  sub->add_option("--output", o->output, "BPE codes file ('-' for stdout)")->capture_default_str();
  sub->add_option("--merges", o->merges, "Number of merges")->capture_default_str();
  sub->add_flag("--tokenize", o->tokenize, "Tokenize raw input before counting words");
  sub->add_option("--joiner", o->joiner, "Joiner marker for --tokenize")->capture_default_str();
  sub->callback([o] { run_learn_bpe(*o); });
}

void add_export_embeddings(CLI::App& app) {
  auto o = std::make_shared<ExportOptions>();
  auto* sub = app.add_subcommand("export-embeddings", "Write a model's word embeddings in word2vec text format");
  sub->add_option("--model", o->model, "Model file")->required()->check(CLI::ExistingFile);
  sub->add_option("--side", o->side, "src or tgt")->required();
  sub->add_option("--output", o->output, "Output file ('-' for stdout)")->required();
  sub->callback([o] { run_export(*o); });
}

void add_eval_bleu(CLI::App& app) {
  auto o = std::make_shared<BleuOptions>();
  auto* sub = app.add_subcommand("eval-bleu", "Corpus BLEU-4 of hypotheses against references");
  sub->add_option("--hyp", o->hyp, "Hypotheses, one per line")->required();
  sub->add_option("--ref", o->ref, "References, one per line")->required();
  sub->add_flag("--smooth", o->smooth, "Add-one smoothing of n-gram precisions");
  sub->add_flag("--tokenize", o->tokenize, "Tokenize both sides instead of splitting on whitespace");
  sub->add_option("--joiner", o->joiner, "Joiner marker for --tokenize")->capture_default_str();
  sub->callback([o] { run_bleu(*o); });
}

}  // namespace minnmt::cli
