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

#include "minnmt/train.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "minnmt/error.hpp"
#include "minnmt/model.hpp"
#include "minnmt/sharing.hpp"

namespace minnmt {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(const std::map<std::string, std::string>& kv, const std::string& key, T fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  T v{};
  const auto& s = it->second;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw FormatError("optimizer state '" + key + "' has bad value '" + s + "'");
  return v;
}

}  // namespace

void OptimState::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning rate must be positive");
  if (!(decay_factor > 0 && decay_factor <= 1)) throw ConfigError("decay factor must be in (0, 1]");
  if (!(clip_norm >= 0)) throw ConfigError("clip norm must be non-negative");
}

void OptimState::end_epoch(std::optional<double> validation_perplexity) {
  ++epoch;
  if (decay_trigger == DecayTrigger::kAfterEpoch) {
    if (epoch >= decay_after) learning_rate *= decay_factor;
    return;
  }
  if (!validation_perplexity) return;
  if (*validation_perplexity >= best_validation)
    learning_rate *= decay_factor;
  else
    best_validation = *validation_perplexity;
}

std::map<std::string, std::string> OptimState::to_kv() const {
  return {
      {"learning_rate", format_double(learning_rate)},
      {"decay_factor", format_double(decay_factor)},
      {"decay_trigger", decay_trigger == DecayTrigger::kAfterEpoch ? "after_epoch" : "plateau"},
      {"decay_after", std::to_string(decay_after)},
      {"clip_norm", format_double(clip_norm)},
      {"epoch", std::to_string(epoch)},
      {"seed", std::to_string(seed)},
      {"best_validation", format_double(best_validation)},
  };
}

OptimState OptimState::from_kv(const std::map<std::string, std::string>& kv) {
  static const char* known[] = {"learning_rate", "decay_factor", "decay_trigger", "decay_after",
                                "clip_norm",     "epoch",        "seed",          "best_validation"};
  for (const auto& [k, v] : kv)
    if (std::find(std::begin(known), std::end(known), k) == std::end(known))
      throw FormatError("unknown optimizer state key '" + k + "'");
  OptimState o;
  o.learning_rate = parse_number(kv, "learning_rate", o.learning_rate);
  o.decay_factor = parse_number(kv, "decay_factor", o.decay_factor);
  if (auto it = kv.find("decay_trigger"); it != kv.end()) {
    if (it->second == "after_epoch") o.decay_trigger = DecayTrigger::kAfterEpoch;
    else if (it->second == "plateau") o.decay_trigger = DecayTrigger::kPlateau;
    else throw FormatError("unknown decay trigger '" + it->second + "'");
  }
  o.decay_after = parse_number(kv, "decay_after", o.decay_after);
  o.clip_norm = parse_number(kv, "clip_norm", o.clip_norm);
  o.epoch = parse_number(kv, "epoch", o.epoch);
  o.seed = parse_number(kv, "seed", o.seed);
  o.best_validation = parse_number(kv, "best_validation", o.best_validation);
  return o;
}

double clip_and_step(ParamMap& params, GradientSet& grads, const OptimState& opt) {
  double sq = 0;
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw DimensionError("gradient for unknown parameter '" + name + "'");
    if (it->second.shape() != g.shape()) throw DimensionError("gradient shape mismatch for '" + name + "'");
    for (double v : g.storage()) {
      if (!std::isfinite(v)) throw NumericError("non-finite gradient in parameter '" + name + "'");
      sq += v * v;
    }
  }
  const double norm = std::sqrt(sq);
  if (opt.clip_norm > 0 && norm > opt.clip_norm) {
    const double scale = opt.clip_norm / norm;
    for (auto& [name, g] : grads)
      for (double& v : g.storage()) v *= scale;
  }
  for (const auto& [name, g] : grads) {
    auto& p = params.at(name).storage();
    const auto& gv = g.storage();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= opt.learning_rate * gv[i];
  }
  return norm;
}

BatchResult BatchRunner::run(const Batch& batch, const ParamMap& params, const ModelConfig& config,
                             Rng* dropout_rng) {
  Tape tape(Tape::Mode::kDeferred);
  ModelGraph g(tape, config, params);
  const Dropout dropout{dropout_rng, dropout_rng ? config.dropout : 0.0};
  const NllGraph nll = forward_nll(g, batch, dropout);
  tape.mark_loss(nll.loss);
  tape.finalize();
  const SharingPlan plan = plan_buffer_sharing(tape);
  last_stats_ = plan.stats;
  RunResult res = arena_.run(tape, plan);
  BatchResult out;
  out.tokens = nll.tokens;
  out.nll = *res.loss * static_cast<double>(nll.tokens);
  out.gradients = std::move(res.gradients);
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

std::vector<Batch> epoch_batches(std::span<const SentencePair> data, std::size_t batch_size, const OptimState& opt,
                                 std::size_t epoch) {
  if (data.empty()) throw DimensionError("no training data");
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  return make_batches(data, batch_size, Rng::derive(opt.seed, epoch).next());
}

void finish(TrainStats& st, Clock::time_point start) {
  st.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  st.perplexity = st.tokens ? std::exp(st.nll / static_cast<double>(st.tokens)) : 1.0;
  st.tokens_per_second = st.seconds > 0 ? static_cast<double>(st.tokens) / st.seconds : 0.0;
}

// Runs fn(k) for k in [0, n) on n threads and rethrows the first failure
// tagged with its worker id. A single worker runs inline.
template <typename Fn>
void run_workers(std::size_t n, Fn fn) {
  if (n == 1) {
    fn(0);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  auto guarded = [&](std::size_t k) {
    try {
      fn(k);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t k = 0; k < n; ++k) threads.emplace_back(guarded, k);
  for (auto& t : threads) t.join();
  for (std::size_t k = 0; k < n; ++k) {
    if (!errors[k]) continue;
    try {
      std::rethrow_exception(errors[k]);
    } catch (const std::exception& e) {
      throw WorkerError(k, e.what());
    }
  }
}

TrainStats train_sync(std::span<const SentencePair> data, ParamMap& params, const ModelConfig& config,
                      const OptimState& opt, std::size_t batch_size, std::size_t K) {
  const auto start = Clock::now();
  const std::size_t epoch = opt.epoch + 1;
  const std::vector<Batch> batches = epoch_batches(data, batch_size, opt, epoch);
  std::vector<BatchRunner> runners(K);
  std::vector<BatchResult> results(K);
  std::vector<Batch> shards(K);
  std::vector<const Batch*> view(K);
  TrainStats st;
  st.epoch = epoch;
  st.learning_rate = opt.learning_rate;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const Batch& batch = batches[b];
    const std::size_t used = std::min(K, batch.rows);
    if (used == 1) {
      view[0] = &batch;
    } else {
      for (std::size_t k = 0; k < used; ++k) {
        const std::size_t lo = k * batch.rows / used, hi = (k + 1) * batch.rows / used;
        shards[k] = make_batch(data, std::span<const std::size_t>(batch.origin).subspan(lo, hi - lo));
        view[k] = &shards[k];
      }
    }
    run_workers(used, [&](std::size_t k) {
      Rng rng = Rng::derive(opt.seed, epoch, b, k);
      results[k] = runners[k].run(*view[k], params, config, config.dropout > 0 ? &rng : nullptr);
    });
    std::size_t tokens = 0;
    double nll = 0;
    for (std::size_t k = 0; k < used; ++k) {
      tokens += results[k].tokens;
      nll += results[k].nll;
    }
    GradientSet grads;
    for (std::size_t k = 0; k < used; ++k) {
      const double w = static_cast<double>(results[k].tokens) / static_cast<double>(tokens);
      for (auto& [name, g] : results[k].gradients) {
        auto [it, fresh] = grads.try_emplace(name, Tensor::zeros(g.shape()));
        auto& acc = it->second.storage();
        const auto& gv = g.storage();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * gv[i];
      }
    }
    clip_and_step(params, grads, opt);
    st.tokens += tokens;
    st.nll += nll;
    ++st.steps;
  }
  finish(st, start);
  return st;
}

TrainStats train_async(std::span<const SentencePair> data, ParamMap& params, const ModelConfig& config,
                       const OptimState& opt, std::size_t batch_size, std::size_t K) {
  const auto start = Clock::now();
  const std::size_t epoch = opt.epoch + 1;
  const std::vector<Batch> batches = epoch_batches(data, batch_size, opt, epoch);
  std::mutex master;
  std::size_t next = 0;
  TrainStats st;
  st.epoch = epoch;
  st.learning_rate = opt.learning_rate;
  run_workers(K, [&](std::size_t) {
    BatchRunner runner;
    while (true) {
      std::size_t b;
      ParamMap snapshot;
      {
        std::lock_guard lock(master);
        if (next == batches.size()) return;
        b = next++;
        snapshot = params;
      }
      Rng rng = Rng::derive(opt.seed, epoch, b, std::size_t{0});
      BatchResult r = runner.run(batches[b], snapshot, config, config.dropout > 0 ? &rng : nullptr);
      std::lock_guard lock(master);
      clip_and_step(params, r.gradients, opt);
      st.tokens += r.tokens;
      st.nll += r.nll;
      ++st.steps;
    }
  });
  finish(st, start);
  return st;
}

}  // namespace

TrainStats train_epoch(std::span<const SentencePair> data, ParamMap& params, const ModelConfig& config,
                       const OptimState& opt, const TrainOptions& options) {
  return train_parallel(data, params, config, opt, options.batch_size, options.workers);
}

TrainStats train_parallel(std::span<const SentencePair> data, ParamMap& params, const ModelConfig& config,
                          const OptimState& opt, std::size_t batch_size, const WorkerConfig& workers) {
  opt.validate();
  config.validate();
  if (workers.workers == 0) throw ConfigError("need at least one worker");
  if (workers.mode == WorkerMode::kSync) return train_sync(data, params, config, opt, batch_size, workers.workers);
  return train_async(data, params, config, opt, batch_size, workers.workers);
}

void save_checkpoint(const std::filesystem::path& path, const ModelFile& model, const OptimState& opt) {
  ModelFile m = model;
  m.precision = Precision::kFloat64;
  m.train_state = opt.to_kv();
  save_model(path, m);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Checkpoint c;
  c.model = load_model(path);
  if (c.model.train_state.empty()) throw FormatError(path.string() + ": model file has no optimizer state");
  if (c.model.precision != Precision::kFloat64) throw FormatError(path.string() + ": checkpoints must be 64-bit");
  c.opt = OptimState::from_kv(c.model.train_state);
  c.opt.validate();
  return c;
}

}  // namespace minnmt
