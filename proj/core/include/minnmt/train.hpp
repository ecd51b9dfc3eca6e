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

// SGD training: per-batch tapes executed through a buffer sharing plan,
// gradient clipping, learning-rate decay, simulated data-parallel workers
// and checkpoints.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "minnmt/model_file.hpp"
#include "minnmt/sharing.hpp"
#include "minnmt/tape.hpp"
#include "minnmt/textpipe.hpp"

namespace minnmt {

enum class DecayTrigger { kAfterEpoch, kPlateau };

struct OptimState {
  double learning_rate = 1.0;
  double decay_factor = 0.5;
  DecayTrigger decay_trigger = DecayTrigger::kAfterEpoch;
  std::size_t decay_after = 9;  // kAfterEpoch: decay at the end of every epoch >= this
  double clip_norm = 5.0;       // 0 disables clipping
  std::size_t epoch = 0;        // completed epochs
  std::uint64_t seed = 1;
  double best_validation = std::numeric_limits<double>::infinity();

  void validate() const;
  /// Bookkeeping at the end of an epoch: advance the counter and decay the
  /// learning rate if the trigger fires.
  void end_epoch(std::optional<double> validation_perplexity = std::nullopt);

  std::map<std::string, std::string> to_kv() const;
  static OptimState from_kv(const std::map<std::string, std::string>& kv);
};

enum class WorkerMode { kSync, kAsync };

struct WorkerConfig {
  std::size_t workers = 1;
  WorkerMode mode = WorkerMode::kSync;
};

struct TrainStats {
  std::size_t epoch = 0;  // 1-based
  std::size_t steps = 0;
  std::size_t tokens = 0;
  double nll = 0;
  double perplexity = 1;
  double seconds = 0;
  double tokens_per_second = 0;
  double learning_rate = 0;  // rate used during the epoch
};

/// Clip by global L2 norm, then theta -= lr * g. Returns the norm before
/// clipping. Throws NumericError naming the first non-finite gradient.
double clip_and_step(ParamMap& params, GradientSet& grads, const OptimState& opt);

struct BatchResult {
  GradientSet gradients;  // of the mean per-token loss
  double nll = 0;         // summed over target tokens
  std::size_t tokens = 0;
};

/// Reusable per-worker state for building and running batch tapes.
class BatchRunner {
 public:
  BatchResult run(const Batch& batch, const ParamMap& params, const ModelConfig& config, Rng* dropout_rng);
  std::size_t arena_bytes() const { return arena_.capacity_bytes(); }
  const ArenaStats& last_stats() const { return last_stats_; }

 private:
  Arena arena_;
  ArenaStats last_stats_;
};

struct TrainOptions {
  std::size_t batch_size = 64;
  WorkerConfig workers;
};

/// One pass over make_batches(data, batch_size, seed derived from the
/// optimizer seed and epoch). Updates params; does not advance opt.epoch.
TrainStats train_epoch(std::span<const SentencePair> data, ParamMap& params, const ModelConfig& config,
                       const OptimState& opt, const TrainOptions& options);

/// Sync: every batch is split into K contiguous row shards, shard gradients
/// are averaged weighted by target tokens in worker order, and one update is
/// applied. Async: workers take whole batches, compute gradients on a
/// snapshot of the master and apply their update under one mutex.
TrainStats train_parallel(std::span<const SentencePair> data, ParamMap& params, const ModelConfig& config,
                          const OptimState& opt, std::size_t batch_size, const WorkerConfig& workers);

/// A checkpoint is a 64-bit model file whose OPTM block holds the optimizer
/// state.
void save_checkpoint(const std::filesystem::path& path, const ModelFile& model, const OptimState& opt);

struct Checkpoint {
  ModelFile model;
  OptimState opt;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace minnmt
