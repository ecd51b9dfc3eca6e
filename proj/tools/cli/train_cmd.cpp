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

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstring>
#include <iostream>
#include <memory>
#include <regex>

#include "commands.hpp"
#include "common.hpp"
#include "dataset.hpp"
#include "minnmt/error.hpp"
#include "minnmt/eval.hpp"
#include "minnmt/inference.hpp"
#include "minnmt/io.hpp"
#include "minnmt/train.hpp"

namespace minnmt::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct TrainOptions {
  std::string data, save_dir;
  std::size_t layers = 2;
  std::size_t rnn_size = 500;
  std::size_t emb_size = 300;
  std::size_t feat_emb_size = 5;
  std::string cell = "lstm";
  std::string attention = "dot";
  bool no_input_feed = false;
  double dropout = 0.3;
  std::size_t batch_size = 64;
  std::size_t epochs = 13;
  double learning_rate = 1.0;
  double decay_factor = 0.5;
  std::string decay = "after_epoch";
  std::size_t decay_after = 9;
  double max_grad_norm = 5.0;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  std::string mode = "sync";
  std::string src_embeddings, tgt_embeddings;
  std::string precision = "64";
  bool resume = false;
};

// Everything that determines the result of a run. "epochs" may grow on resume.
json manifest(const TrainOptions& o) {
  return {{"data", o.data},
          {"layers", o.layers},
          {"rnn_size", o.rnn_size},
          {"emb_size", o.emb_size},
          {"feat_emb_size", o.feat_emb_size},
          {"cell", o.cell},
          {"attention", o.attention},
          {"input_feed", !o.no_input_feed},
          {"dropout", o.dropout},
          {"batch_size", o.batch_size},
          {"epochs", o.epochs},
          {"learning_rate", o.learning_rate},
          {"decay_factor", o.decay_factor},
          {"decay", o.decay},
          {"decay_after", o.decay_after},
          {"max_grad_norm", o.max_grad_norm},
          {"seed", o.seed},
          {"workers", o.workers},
          {"mode", o.mode},
          {"src_embeddings", o.src_embeddings},
          {"tgt_embeddings", o.tgt_embeddings},
          {"precision", o.precision},
          {"format_version", kModelFormatVersion}};
}

// Advisory lock on the save directory, held for the life of the command.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) {
    const std::string path = (dir / ".lock").string();
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError(path + ": " + std::strerror(errno));
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw IoError(dir.string() + " is locked by another process");
    }
  }
  ~DirLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  int fd_ = -1;
};

std::string checkpoint_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "checkpoint_e%03zu.mnmt", epoch);
  return buf;
}

// Highest-epoch checkpoint in the directory, if any.
std::optional<fs::path> latest_checkpoint(const fs::path& dir) {
  static const std::regex pattern(R"(checkpoint_e(\d+)\.mnmt)");
  std::optional<fs::path> best;
  std::size_t best_epoch = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (!std::regex_match(name, m, pattern)) continue;
    const std::size_t e = std::stoul(m[1]);
    if (!best || e > best_epoch) {
      best = entry.path();
      best_epoch = e;
    }
  }
  return best;
}

ModelConfig model_config(const TrainOptions& o, const ModelFile& vocabs) {
  ModelConfig c;
  c.num_layers = o.layers;
  c.rnn_size = o.rnn_size;
  c.embedding_dim = o.emb_size;
  c.cell = parse_cell_kind(o.cell);
  c.attention = parse_attention_kind(o.attention);
  c.input_feed = !o.no_input_feed;
  c.dropout = o.dropout;
  c.src_vocab_size = vocabs.src_vocab.size();
  c.tgt_vocab_size = vocabs.tgt_vocab.size();
  for (const Vocab& v : vocabs.src_feature_vocabs) c.src_factors.push_back({v.size(), o.feat_emb_size});
  for (const Vocab& v : vocabs.tgt_feature_vocabs) c.tgt_factors.push_back(v.size());
  c.validate();
  return c;
}

OptimState optim_state(const TrainOptions& o) {
  OptimState s;
  s.learning_rate = o.learning_rate;
  s.decay_factor = o.decay_factor;
  s.decay_trigger = o.decay == "plateau" ? DecayTrigger::kPlateau : DecayTrigger::kAfterEpoch;
  s.decay_after = o.decay_after;
  s.clip_norm = o.max_grad_norm;
  s.seed = o.seed;
  s.validate();
  return s;
}

ModelFile read_vocabs(const fs::path& data, const Dataset& train) {
  ModelFile f;
  f.src_vocab = load_vocab_file(data / "src.vocab");
  f.tgt_vocab = load_vocab_file(data / "tgt.vocab");
  for (std::size_t i = 0; i < train.src_factors; ++i)
    f.src_feature_vocabs.push_back(load_vocab_file(data / ("src.feat" + std::to_string(i) + ".vocab")));
  for (std::size_t i = 0; i < train.tgt_factors; ++i)
    f.tgt_feature_vocabs.push_back(load_vocab_file(data / ("tgt.feat" + std::to_string(i) + ".vocab")));
  return f;
}

void check_ids(const Dataset& d, const ModelFile& f, const std::string& name) {
  std::vector<std::size_t> sf, tf;
  for (const auto& v : f.src_feature_vocabs) sf.push_back(v.size());
  for (const auto& v : f.tgt_feature_vocabs) tf.push_back(v.size());
  check_dataset_ids(d, f.src_vocab.size(), f.tgt_vocab.size(), sf, tf, name);
}

// Stats lines kept from an earlier run, up to and including `epoch`.
std::vector<std::string> kept_stats(const fs::path& path, std::size_t epoch) {
  std::vector<std::string> out;
  if (!fs::exists(path)) return out;
  for (const std::string& line : read_lines(path)) {
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("epoch")) throw FormatError(path.string() + ": malformed stats line");
    if (j["epoch"].get<std::size_t>() <= epoch) out.push_back(line);
  }
  return out;
}

void run_train(const TrainOptions& o) {
  const fs::path data(o.data), dir(o.save_dir);
  fs::create_directories(dir);
  DirLock lock(dir);

  const Dataset train = load_dataset(data / "train.mnds");
  if (train.pairs.empty()) throw FormatError("training set is empty");
  std::optional<Dataset> valid;
  if (fs::exists(data / "valid.mnds")) valid = load_dataset(data / "valid.mnds");

  ModelFile model = read_vocabs(data, train);
  check_ids(train, model, "train.mnds");
  if (valid) check_ids(*valid, model, "valid.mnds");
  model.config = model_config(o, model);
  OptimState opt = optim_state(o);

  const json run = manifest(o);
  const fs::path run_path = dir / "run.json", stats_path = dir / "stats.jsonl";
  const auto existing = latest_checkpoint(dir);
  if (o.resume && existing) {
    if (!fs::exists(run_path)) throw ConfigError("cannot resume: " + run_path.string() + " is missing");
    json before = json::parse(read_file(run_path), nullptr, false);
    if (before.is_discarded()) throw FormatError(run_path.string() + ": not valid JSON");
    for (const auto& [key, value] : run.items())
      if (key != "epochs" && before.value(key, json()) != value)
        throw ConfigError("cannot resume: '" + key + "' differs from the original run (" + before.value(key, json()).dump() +
                          " vs " + value.dump() + ")");
    Checkpoint ck = load_checkpoint(*existing);
    if (ck.model.config != model.config) throw ConfigError("cannot resume: checkpoint model configuration differs");
    model.params = std::move(ck.model.params);
    opt = ck.opt;
  } else {
    if (existing)
      throw ConfigError(dir.string() + " already holds checkpoints; pass --resume or use another directory");
    Rng rng = Rng::derive(o.seed, std::size_t{0});
    model.params = init_parameters(model.config, rng);
    if (!o.src_embeddings.empty()) {
      Rng erng = Rng::derive(o.seed, std::size_t{1});
      model.params.at("src_emb") = load_embeddings(o.src_embeddings, model.src_vocab, o.emb_size, erng);
    }
    if (!o.tgt_embeddings.empty()) {
      Rng erng = Rng::derive(o.seed, std::size_t{2});
      model.params.at("tgt_emb") = load_embeddings(o.tgt_embeddings, model.tgt_vocab, o.emb_size, erng);
    }
  }
  write_file_atomic(run_path, run.dump(2) + "\n");
  std::vector<std::string> stats = kept_stats(stats_path, opt.epoch);

  const WorkerConfig workers{o.workers, o.mode == "async" ? WorkerMode::kAsync : WorkerMode::kSync};
  while (opt.epoch < o.epochs) {
    const TrainStats st = train_parallel(train.pairs, model.params, model.config, opt, o.batch_size, workers);
    json line = {{"epoch", st.epoch},
                 {"perplexity", st.perplexity},
                 {"tokens_per_second", st.tokens_per_second},
                 {"tokens", st.tokens},
                 {"nll", st.nll},
                 {"steps", st.steps},
                 {"seconds", st.seconds},
                 {"learning_rate", st.learning_rate}};
    std::optional<double> val;
    if (valid && !valid->pairs.empty()) {
      const auto m = make_inference_model(model.config, model.params, Precision::kFloat64);
      val = corpus_perplexity(*m, valid->pairs).perplexity;
      line["validation_perplexity"] = *val;
    }
    opt.end_epoch(val);
    save_checkpoint(dir / checkpoint_name(opt.epoch), model, opt);
    stats.push_back(line.dump());
    write_file_atomic(stats_path, join_lines(stats));
    print_json_line(std::cout, line);
  }
  ModelFile final_model = model;
  final_model.precision = o.precision == "32" ? Precision::kFloat32 : Precision::kFloat64;
  save_model(dir / "model.mnmt", final_model);
}

}  // namespace

void add_train(CLI::App& app) {
  auto o = std::make_shared<TrainOptions>();
  auto* sub = app.add_subcommand("train", "Train a model on a preprocessed dataset");
  sub->add_option("--data", o->data, "Directory written by preprocess")->required()->check(CLI::ExistingDirectory);
  sub->add_option("--save-dir", o->save_dir, "Directory for run.json, stats.jsonl, checkpoints and model.mnmt")
      ->required();
  sub->add_option("--layers", o->layers, "Stacked recurrent layers")->capture_default_str();
  sub->add_option("--rnn-size", o->rnn_size, "Hidden state size")->capture_default_str();
  sub->add_option("--emb-size", o->emb_size, "Word embedding size")->capture_default_str();
  sub->add_option("--feat-emb-size", o->feat_emb_size, "Source feature embedding size")->capture_default_str();
  sub->add_option("--cell", o->cell, "lstm or gru")->capture_default_str()->check(CLI::IsMember({"lstm", "gru"}));
  sub->add_option("--attention", o->attention, "dot or general")
      ->capture_default_str()
      ->check(CLI::IsMember({"dot", "general"}));
  sub->add_flag("--no-input-feed", o->no_input_feed, "Do not feed the attentional state to the next step");
  sub->add_option("--dropout", o->dropout, "Dropout between stacked layers")->capture_default_str();
  sub->add_option("--batch-size", o->batch_size, "Sentence pairs per batch")->capture_default_str();
  sub->add_option("--epochs", o->epochs, "Total epochs")->capture_default_str();
  sub->add_option("--learning-rate", o->learning_rate, "SGD learning rate")->capture_default_str();
  sub->add_option("--decay-factor", o->decay_factor, "Learning rate multiplier on decay")->capture_default_str();
  sub->add_option("--decay", o->decay, "after_epoch or plateau (validation perplexity stops improving)")
      ->capture_default_str()
      ->check(CLI::IsMember({"after_epoch", "plateau"}));
  sub->add_option("--decay-after", o->decay_after, "With after_epoch: decay at the end of every epoch >= this")
      ->capture_default_str();
  sub->add_option("--max-grad-norm", o->max_grad_norm, "Global gradient norm clip (0: off)")->capture_default_str();
  sub->add_option("--seed", o->seed, "Seed for initialization, shuffling and dropout")->capture_default_str();
  sub->add_option("--workers", o->workers, "Data-parallel workers")->capture_default_str();
  sub->add_option("--mode", o->mode, "sync or async")->capture_default_str()->check(CLI::IsMember({"sync", "async"}));
  sub->add_option("--src-embeddings", o->src_embeddings, "Pretrained source embeddings (word2vec text)")
      ->check(CLI::ExistingFile);
  sub->add_option("--tgt-embeddings", o->tgt_embeddings, "Pretrained target embeddings (word2vec text)")
      ->check(CLI::ExistingFile);
  sub->add_option("--precision", o->precision, "Float width of the final model file: 32 or 64")
      ->capture_default_str()
      ->check(CLI::IsMember({"32", "64"}));
  sub->add_flag("--resume", o->resume, "Continue from the latest checkpoint in --save-dir");
  sub->callback([o] { run_train(*o); });
}

}  // namespace minnmt::cli
