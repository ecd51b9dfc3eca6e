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
#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli/common.hpp"
#include "cli/dataset.hpp"
#include "minnmt/inference.hpp"
#include "minnmt/io.hpp"
#include "minnmt/model_file.hpp"
#include "minnmt/translate.hpp"
#include "text_oracles.hpp"
#include "toy_task.hpp"

namespace minnmt {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code = -1;
  std::string out, err;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

Result run(const std::string& binary, const std::string& args, const fs::path& dir, const std::string& stdin_path = "") {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  std::string cmd = quote(binary) + " " + args + " > " + quote(out.string()) + " 2> " + quote(err.string());
  if (!stdin_path.empty()) cmd += " < " + quote(stdin_path);
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

Result minnmt(const std::string& args, const fs::path& dir, const std::string& stdin_path = "") {
  return run(MINNMT_BIN, args, dir, stdin_path);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("minnmt_cli_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  write_file_atomic(path, join_lines(lines));
}

std::string words_of(const std::vector<std::int32_t>& ids) {
  std::string s;
  for (std::int32_t id : ids) s += (s.empty() ? "w" : " w") + std::to_string(id);
  return s;
}

// Copy-task corpus as pretokenized text, source and target files.
void write_copy_corpus(const fs::path& dir, const std::string& prefix, std::size_t n, std::uint64_t seed) {
  std::vector<std::string> lines;
  for (const auto& p : testing::copy_task(n, 20, 8, seed)) lines.push_back(words_of(p.src));
  write_lines(dir / (prefix + ".src"), lines);
  write_lines(dir / (prefix + ".tgt"), lines);
}

json error_json(const Result& r) {
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1) << r.err;
  const json j = json::parse(r.err, nullptr, false);
  EXPECT_FALSE(j.is_discarded()) << r.err;
  EXPECT_TRUE(j.contains("error") && j.contains("message")) << r.err;
  return j;
}

std::vector<json> stats_lines(const fs::path& path) {
  std::vector<json> out;
  for (const auto& line : read_lines(path)) out.push_back(json::parse(line));
  return out;
}

const std::string kSmallModel =
    "--layers 1 --rnn-size 16 --emb-size 8 --batch-size 16 --learning-rate 1 --decay-after 2 --seed 3";

// A preprocessed small copy corpus for the training tests.
fs::path small_data(const std::string& name) {
  const fs::path dir = fresh_dir(name);
  write_copy_corpus(dir, "train", 160, 31);
  const Result r = minnmt("preprocess --pretokenized --train-src " + quote((dir / "train.src").string()) +
                              " --train-tgt " + quote((dir / "train.tgt").string()) + " --save-dir " +
                              quote((dir / "data").string()),
                          dir);
  EXPECT_EQ(r.code, 0) << r.err;
  return dir;
}

TEST(Preprocess, TwoLineCorpus) {
  const fs::path dir = fresh_dir("two_line");
  write_lines(dir / "s.txt", {"a b a", "c"});
  write_lines(dir / "t.txt", {"x y", "y z y"});
  const Result r = minnmt("preprocess --pretokenized --train-src " + quote((dir / "s.txt").string()) + " --train-tgt " +
                              quote((dir / "t.txt").string()) + " --save-dir " + quote((dir / "d").string()),
                          dir);
  ASSERT_EQ(r.code, 0) << r.err;
  // Most frequent first, ties lexicographic: src a b c, tgt y x z.
  EXPECT_EQ(read_file(dir / "d" / "src.vocab"), "a\nb\nc\n");
  EXPECT_EQ(read_file(dir / "d" / "tgt.vocab"), "y\nx\nz\n");
  const cli::Dataset d = cli::load_dataset(dir / "d" / "train.mnds");
  ASSERT_EQ(d.pairs.size(), 2u);
  EXPECT_EQ(d.pairs[0].src, (std::vector<std::int32_t>{4, 5, 4}));
  EXPECT_EQ(d.pairs[0].tgt, (std::vector<std::int32_t>{5, 4}));
  EXPECT_EQ(d.pairs[1].src, (std::vector<std::int32_t>{6}));
  EXPECT_EQ(d.pairs[1].tgt, (std::vector<std::int32_t>{4, 6, 4}));
  EXPECT_EQ(json::parse(r.out)["train_pairs"], 2);
}

TEST(Preprocess, TokenizesRawText) {
  const fs::path dir = fresh_dir("raw");
  write_lines(dir / "s.txt", {"Hello, world!"});
  write_lines(dir / "t.txt", {"Hallo, Welt!"});
  const Result r = minnmt("preprocess --train-src " + quote((dir / "s.txt").string()) + " --train-tgt " +
                              quote((dir / "t.txt").string()) + " --save-dir " + quote((dir / "d").string()),
                          dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const cli::Dataset d = cli::load_dataset(dir / "d" / "train.mnds");
  EXPECT_EQ(d.pairs[0].src.size(), tokenize("Hello, world!").size());
}

TEST(Preprocess, LineCountMismatchReportsBothCounts) {
  const fs::path dir = fresh_dir("mismatch");
  write_lines(dir / "s.txt", {"a", "b", "c"});
  write_lines(dir / "t.txt", {"a", "b"});
  const Result r = minnmt("preprocess --train-src " + quote((dir / "s.txt").string()) + " --train-tgt " +
                              quote((dir / "t.txt").string()) + " --save-dir " + quote((dir / "d").string()),
                          dir);
  const json e = error_json(r);
  EXPECT_EQ(e["error"], "format");
  const std::string msg = e["message"];
  EXPECT_NE(msg.find("3 lines"), std::string::npos) << msg;
  EXPECT_NE(msg.find("2"), std::string::npos) << msg;
}

TEST(Preprocess, RerunIsBitwiseIdentical) {
  const fs::path dir = fresh_dir("rerun");
  write_copy_corpus(dir, "train", 50, 3);
  write_copy_corpus(dir, "valid", 10, 4);
  std::string first[3];
  for (int k = 0; k < 2; ++k) {
    const Result r = minnmt("preprocess --pretokenized --train-src " + quote((dir / "train.src").string()) +
                                " --train-tgt " + quote((dir / "train.tgt").string()) + " --valid-src " +
                                quote((dir / "valid.src").string()) + " --valid-tgt " +
                                quote((dir / "valid.tgt").string()) + " --save-dir " + quote((dir / "d").string()),
                            dir);
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string files[3] = {"train.mnds", "valid.mnds", "src.vocab"};
    for (int f = 0; f < 3; ++f) {
      const std::string bytes = read_file(dir / "d" / files[f]);
      if (k == 0) first[f] = bytes;
      else EXPECT_EQ(bytes, first[f]) << files[f];
    }
  }
}

TEST(Dataset, RejectsCorruptFiles) {
  cli::Dataset d;
  d.pairs.push_back({{4, 5}, {6}, {}, {}});
  const std::string bytes = cli::serialize_dataset(d);
  EXPECT_EQ(cli::serialize_dataset(cli::parse_dataset(bytes)), bytes);
  for (std::size_t cut = 0; cut < bytes.size(); ++cut)
    EXPECT_THROW(cli::parse_dataset(bytes.substr(0, cut)), FormatError) << cut;
  EXPECT_THROW(cli::parse_dataset(bytes + "x"), FormatError);
  std::string bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(cli::parse_dataset(bad_version), FormatError);
  EXPECT_THROW(cli::check_dataset_ids(d, 6, 6, {}, {}, "d"), FormatError);
}

TEST(Train, StatsLogIsOneJsonObjectPerEpoch) {
  const fs::path dir = small_data("stats");
  const Result r = minnmt("train --data " + quote((dir / "data").string()) + " --save-dir " +
                              quote((dir / "run").string()) + " --epochs 2 " + kSmallModel,
                          dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = stats_lines(dir / "run" / "stats.jsonl");
  ASSERT_EQ(lines.size(), 2u);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    EXPECT_EQ(lines[i]["epoch"], i + 1);
    EXPECT_TRUE(lines[i]["perplexity"].is_number());
    EXPECT_TRUE(lines[i]["tokens_per_second"].is_number());
  }
  EXPECT_TRUE(fs::exists(dir / "run" / "checkpoint_e001.mnmt"));
  EXPECT_TRUE(fs::exists(dir / "run" / "checkpoint_e002.mnmt"));
  const json manifest = json::parse(read_file(dir / "run" / "run.json"));
  EXPECT_EQ(manifest["rnn_size"], 16);
  EXPECT_EQ(manifest["epochs"], 2);
  // The final model carries no optimizer state and loads for inference.
  EXPECT_TRUE(load_model(dir / "run" / "model.mnmt").train_state.empty());
}

TEST(Train, SameFlagsGiveIdenticalModels) {
  const fs::path dir = small_data("repro");
  for (const char* out : {"a", "b"}) {
    const Result r = minnmt("train --data " + quote((dir / "data").string()) + " --save-dir " +
                                quote((dir / out).string()) + " --epochs 2 " + kSmallModel,
                            dir);
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(read_file(dir / "a" / "model.mnmt"), read_file(dir / "b" / "model.mnmt"));
}

TEST(Train, SyncWorkersMatchSerialPerplexity) {
  const fs::path dir = small_data("sync");
  const std::string base = "train --data " + quote((dir / "data").string()) + " --dropout 0 --epochs 2 " + kSmallModel;
  ASSERT_EQ(minnmt(base + " --save-dir " + quote((dir / "serial").string()), dir).code, 0);
  const Result r = minnmt(base + " --workers 2 --mode sync --save-dir " + quote((dir / "sync").string()), dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto a = stats_lines(dir / "serial" / "stats.jsonl"), b = stats_lines(dir / "sync" / "stats.jsonl");
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_NEAR(a[i]["perplexity"].get<double>(), b[i]["perplexity"].get<double>(), 1e-10);
}

TEST(Train, ResumeMatchesUninterruptedRun) {
  const fs::path dir = small_data("resume");
  const std::string base = "train --data " + quote((dir / "data").string()) + " " + kSmallModel;
  ASSERT_EQ(minnmt(base + " --epochs 3 --save-dir " + quote((dir / "straight").string()), dir).code, 0);
  ASSERT_EQ(minnmt(base + " --epochs 2 --save-dir " + quote((dir / "split").string()), dir).code, 0);
  const Result r = minnmt(base + " --epochs 3 --resume --save-dir " + quote((dir / "split").string()), dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(dir / "straight" / "model.mnmt"), read_file(dir / "split" / "model.mnmt"));
  EXPECT_EQ(read_file(dir / "straight" / "checkpoint_e003.mnmt"), read_file(dir / "split" / "checkpoint_e003.mnmt"));
  const auto a = stats_lines(dir / "straight" / "stats.jsonl"), b = stats_lines(dir / "split" / "stats.jsonl");
  ASSERT_EQ(b.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a[i]["perplexity"], b[i]["perplexity"]);
}

TEST(Train, ResumeRejectsChangedFlags) {
  const fs::path dir = small_data("resume_flags");
  const std::string base = "train --data " + quote((dir / "data").string()) + " --save-dir " +
                           quote((dir / "run").string()) + " " + kSmallModel;
  ASSERT_EQ(minnmt(base + " --epochs 1", dir).code, 0);
  const json e = error_json(minnmt(base + " --epochs 2 --resume --dropout 0.1", dir));
  EXPECT_EQ(e["error"], "config");
}

TEST(Train, RefusesToOverwriteCheckpoints) {
  const fs::path dir = small_data("overwrite");
  const std::string args = "train --data " + quote((dir / "data").string()) + " --save-dir " +
                           quote((dir / "run").string()) + " --epochs 1 " + kSmallModel;
  ASSERT_EQ(minnmt(args, dir).code, 0);
  EXPECT_EQ(error_json(minnmt(args, dir))["error"], "config");
}

TEST(Train, LockedSaveDirectoryIsRefused) {
  const fs::path dir = small_data("lock");
  fs::create_directories(dir / "run");
  const int fd = ::open((dir / "run" / ".lock").c_str(), O_RDWR | O_CREAT, 0644);
  ASSERT_GE(fd, 0);
  ASSERT_EQ(::flock(fd, LOCK_EX | LOCK_NB), 0);
  const Result r = minnmt("train --data " + quote((dir / "data").string()) + " --save-dir " +
                              quote((dir / "run").string()) + " --epochs 1 " + kSmallModel,
                          dir);
  ::close(fd);
  EXPECT_EQ(error_json(r)["error"], "io");
  EXPECT_FALSE(fs::exists(dir / "run" / "checkpoint_e001.mnmt"));
}

// One trained copy-task model shared by the translation tests.
class ToyModel : public ::testing::Test {
 protected:
  // ctest runs each test in its own process; the trained model is reused
  // while the tool binary is unchanged.
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "minnmt_cli_test_toy";
    const std::string stamp = std::to_string(fs::last_write_time(MINNMT_BIN).time_since_epoch().count());
    if (fs::exists(dir_ / "stamp") && read_file(dir_ / "stamp") == stamp && fs::exists(model())) return;
    dir_ = fresh_dir("toy");
    write_copy_corpus(dir_, "train", 2000, 1);
    write_copy_corpus(dir_, "test", 200, 1001);
    Result r = minnmt("preprocess --pretokenized --train-src " + quote((dir_ / "train.src").string()) +
                          " --train-tgt " + quote((dir_ / "train.tgt").string()) + " --save-dir " +
                          quote((dir_ / "data").string()),
                      dir_);
    ASSERT_EQ(r.code, 0) << r.err;
    r = minnmt("train --data " + quote((dir_ / "data").string()) + " --save-dir " + quote((dir_ / "run").string()) +
                   " --layers 1 --rnn-size 64 --emb-size 256 --attention general --batch-size 32 --epochs 5"
                   " --learning-rate 5 --max-grad-norm 0.5 --decay-after 3 --seed 1",
               dir_);
    ASSERT_EQ(r.code, 0) << r.err;
    write_file_atomic(dir_ / "stamp", stamp);
  }
  static fs::path model() { return dir_ / "run" / "model.mnmt"; }
  static std::string translate_args(const std::string& out, const std::string& extra = "") {
    return "--model " + quote(model().string()) + " --input " + quote((dir_ / "test.src").string()) + " --output " +
           quote((dir_ / out).string()) + " --pretokenized --quiet " + extra;
  }
  static fs::path dir_;
};
fs::path ToyModel::dir_;

TEST_F(ToyModel, TrainingPerplexityFallsBelowOnePointFive) {
  const auto lines = stats_lines(dir_ / "run" / "stats.jsonl");
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_LT(lines.back()["perplexity"].get<double>(), 1.5);
}

TEST_F(ToyModel, TranslatesHeldOutCopies) {
  const Result r = minnmt("translate " + translate_args("out.txt"), dir_);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = read_lines(dir_ / "out.txt"), ref = read_lines(dir_ / "test.tgt");
  ASSERT_EQ(out.size(), ref.size());
  std::size_t exact = 0;
  for (std::size_t i = 0; i < out.size(); ++i) exact += out[i] == ref[i];
  EXPECT_GE(exact, 190u) << exact << " of " << out.size();
}

TEST_F(ToyModel, TranslationIsIdempotent) {
  ASSERT_EQ(minnmt("translate " + translate_args("once.txt"), dir_).code, 0);
  ASSERT_EQ(minnmt("translate " + translate_args("twice.txt"), dir_).code, 0);
  EXPECT_EQ(read_file(dir_ / "once.txt"), read_file(dir_ / "twice.txt"));
}

TEST_F(ToyModel, DeploymentBinaryMatchesFullTool) {
  ASSERT_EQ(minnmt("translate " + translate_args("full.txt"), dir_).code, 0);
  const Result r = run(MINNMT_TRANSLATE_BIN, translate_args("deploy.txt"), dir_);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(dir_ / "full.txt"), read_file(dir_ / "deploy.txt"));
}

TEST_F(ToyModel, ThroughputLineOnStderr) {
  const Result r = run(MINNMT_TRANSLATE_BIN,
                       "--model " + quote(model().string()) + " --input " + quote((dir_ / "test.src").string()) +
                           " --output " + quote((dir_ / "t.txt").string()) + " --pretokenized",
                       dir_);
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.err);
  EXPECT_EQ(j["sentences"], 200);
  EXPECT_GT(j["tokens_per_second"].get<double>(), 0.0);
}

TEST_F(ToyModel, NBestOutputFormat) {
  ASSERT_EQ(minnmt("translate " + translate_args("nbest.txt", "--n-best 3"), dir_).code, 0);
  const auto lines = read_lines(dir_ / "nbest.txt");
  ASSERT_EQ(lines.size(), 600u);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto first = lines[i].find(" ||| "), last = lines[i].rfind(" ||| ");
    ASSERT_NE(first, last) << lines[i];
    EXPECT_EQ(lines[i].substr(0, first), std::to_string(i / 3));
    EXPECT_LE(std::stod(lines[i].substr(last + 5)), 0.0);
  }
}

TEST_F(ToyModel, WiderBeamScoresAtLeastAsWellOnTheCorpus) {
  ASSERT_EQ(minnmt("translate " + translate_args("b1.txt", "--beam 1"), dir_).code, 0);
  ASSERT_EQ(minnmt("translate " + translate_args("b5.txt", "--beam 5"), dir_).code, 0);
  const LoadedModel lm = load_for_inference(model());
  const auto src = read_lines(dir_ / "test.src");
  auto total = [&](const fs::path& path) {
    const auto hyp = read_lines(path);
    double sum = 0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      const auto ids = lm.file.src_vocab.encode(cli::split_whitespace(src[i]));
      const auto out = lm.file.tgt_vocab.encode(cli::split_whitespace(hyp[i]));
      sum += score_pair(*lm.model, SourceSentence{ids, {}}, out).log_prob;
    }
    return sum;
  };
  EXPECT_GE(total(dir_ / "b5.txt"), total(dir_ / "b1.txt"));
}

TEST_F(ToyModel, ExportedEmbeddingsReimportBitExact) {
  const Result r = minnmt("export-embeddings --model " + quote(model().string()) + " --side src --output " +
                              quote((dir_ / "emb.txt").string()),
                          dir_);
  ASSERT_EQ(r.code, 0) << r.err;
  const ModelFile mf = load_model(model());
  std::ifstream in(dir_ / "emb.txt");
  std::size_t v = 0, d = 0;
  in >> v >> d;
  EXPECT_EQ(v, mf.src_vocab.size());
  EXPECT_EQ(d, mf.config.embedding_dim);
  Rng rng(1);
  const Tensor back = load_embeddings(dir_ / "emb.txt", mf.src_vocab, d, rng);
  EXPECT_EQ(back.storage(), mf.params.at("src_emb").storage());
}

TEST(ExportEmbeddings, EscapesAwkwardTokensAndRejectsBadSide) {
  const fs::path dir = fresh_dir("export");
  ModelConfig c = testing::copy_config(3, 4, 3);
  ModelFile f;
  f.config = c;
  f.src_vocab = Vocab({"two words", "tab\there", "back\\slash"});
  f.tgt_vocab = Vocab({"x", "y", "z"});
  Rng rng(2);
  f.params = init_parameters(c, rng);
  save_model(dir / "m.mnmt", f);
  Result r = minnmt("export-embeddings --model " + quote((dir / "m.mnmt").string()) + " --side src --output " +
                        quote((dir / "e.txt").string()),
                    dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = read_lines(dir / "e.txt");
  ASSERT_EQ(lines.size(), 8u);
  EXPECT_EQ(lines[0], "7 3");
  EXPECT_EQ(lines[5].substr(0, 10), "two\\swords");
  Rng any(3);
  EXPECT_EQ(load_embeddings(dir / "e.txt", f.src_vocab, 3, any).storage(), f.params.at("src_emb").storage());
  r = minnmt("export-embeddings --model " + quote((dir / "m.mnmt").string()) + " --side middle --output x", dir);
  EXPECT_EQ(error_json(r)["error"], "config");
}

TEST(Tokenize, PipelineReproducesInput) {
  const fs::path dir = fresh_dir("tokenize");
  Rng rng(9);
  std::vector<std::string> lines;
  for (int i = 0; i < 300; ++i) lines.push_back(testing::random_line(rng));
  write_lines(dir / "in.txt", lines);
  Result r = minnmt("tokenize --input " + quote((dir / "in.txt").string()) + " --output " +
                        quote((dir / "tok.txt").string()),
                    dir);
  ASSERT_EQ(r.code, 0) << r.err;
  r = minnmt("detokenize", dir, (dir / "tok.txt").string());
  ASSERT_EQ(r.code, 0) << r.err;
  write_file_atomic(dir / "detok.txt", r.out);
  const auto back = read_lines(dir / "detok.txt");
  ASSERT_EQ(back.size(), lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) EXPECT_EQ(back[i], normalize_whitespace(lines[i])) << i;
}

TEST(LearnBpe, ZeroMergesWritesHeaderOnly) {
  const fs::path dir = fresh_dir("bpe0");
  write_lines(dir / "c.txt", {"low lower newest widest"});
  const Result r = minnmt("learn-bpe --merges 0 --input " + quote((dir / "c.txt").string()) + " --output " +
                              quote((dir / "codes").string()),
                          dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(dir / "codes"), std::string(kBpeHeader) + "\n");
}

TEST(LearnBpe, MatchesBruteForceOracle) {
  const fs::path dir = fresh_dir("bpe");
  const std::vector<std::string> lines = {"low low low low low lower lower", "newest newest newest newest newest newest",
                                          "widest widest widest"};
  write_lines(dir / "c.txt", lines);
  const Result r = minnmt("learn-bpe --merges 10 --input " + quote((dir / "c.txt").string()) + " --output " +
                              quote((dir / "codes").string()),
                          dir);
  ASSERT_EQ(r.code, 0) << r.err;
  std::map<std::string, std::int64_t> counts{{"low", 5}, {"lower", 2}, {"newest", 6}, {"widest", 3}};
  std::istringstream in(read_file(dir / "codes"));
  EXPECT_EQ(read_bpe(in), testing::brute_force_bpe(counts, 10));
}

TEST(EvalBleu, IdentityAndHandExample) {
  const fs::path dir = fresh_dir("bleu");
  write_lines(dir / "a.txt", {"the cat sat", "on the mat"});
  Result r = minnmt("eval-bleu --hyp " + quote((dir / "a.txt").string()) + " --ref " + quote((dir / "a.txt").string()),
                    dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["bleu"].get<double>(), 100.0);
  write_lines(dir / "h.txt", {"the the the"});
  write_lines(dir / "r.txt", {"the cat"});
  r = minnmt("eval-bleu --hyp " + quote((dir / "h.txt").string()) + " --ref " + quote((dir / "r.txt").string()), dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_NEAR(j["precisions"][0].get<double>(), 1.0 / 3, 1e-12);
  EXPECT_EQ(j["bleu"].get<double>(), 0.0);
}

TEST(Errors, AreOneLineOfJson) {
  const fs::path dir = fresh_dir("errors");
  EXPECT_EQ(error_json(minnmt("frobnicate", dir))["error"], "usage");
  EXPECT_EQ(error_json(minnmt("translate", dir))["error"], "usage");
  write_lines(dir / "junk.mnmt", {"not a model"});
  EXPECT_EQ(error_json(minnmt("translate --model " + quote((dir / "junk.mnmt").string()), dir))["error"], "format");
  EXPECT_EQ(error_json(run(MINNMT_TRANSLATE_BIN, "--model " + quote((dir / "junk.mnmt").string()), dir))["error"],
            "format");
  EXPECT_EQ(error_json(minnmt("eval-bleu --hyp /nonexistent/h --ref /nonexistent/r", dir))["error"], "io");
}

}  // namespace
}  // namespace minnmt
