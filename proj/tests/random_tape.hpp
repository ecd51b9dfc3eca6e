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

// Random well-formed tapes for planner/executor property tests. build() is
// deterministic per seed, so the same graph can be recorded eagerly and
// deferred.

#include <map>
#include <string>
#include <vector>

#include "minnmt/random.hpp"
#include "minnmt/tape.hpp"

namespace minnmt::testing {

class RandomTape {
 public:
  explicit RandomTape(std::uint64_t seed) : seed_(seed) {
    Rng rng(seed);
    for (int i = 0; i < 3; ++i) params_.emplace("p" + std::to_string(i), fill(rng, {kRows, kCols}));
    params_.emplace("W", fill(rng, {kCols, kCols}, 0.5));
    params_.emplace("b", fill(rng, {kCols}));
    params_.emplace("unused", fill(rng, {2}));
    data_ = fill(rng, {kRows, kCols});
  }

  void build(Tape& tape) {
    Rng rng(seed_ * 7919 + 1);
    std::vector<Var> pool;
    for (const auto& [name, value] : params_)
      if (name[0] == 'p') pool.push_back(tape.parameter(name, value));
    tape.parameter("unused", params_.at("unused"));
    pool.push_back(tape.constant(data_, "data"));
    Var w = tape.parameter("W", params_.at("W"));
    Var b = tape.parameter("b", params_.at("b"));

    const int ops = 20 + static_cast<int>(rng.below(40));
    auto pick = [&]() { return pool[pool.size() - 1 - rng.below(std::min<std::size_t>(pool.size(), 6))]; };
    for (int i = 0; i < ops; ++i) {
      Var x = pick();
      Var y = pick();
      Var out;
      switch (rng.below(13)) {
        case 0: out = add(x, y); break;
        case 1: out = sub(x, y); break;
        case 2: out = mul(x, y); break;
        case 3: out = sigmoid(x); break;
        case 4: out = tanh(x); break;
        case 5: out = scale(x, 0.5); break;
        case 6: out = one_minus(x); break;
        case 7: out = tanh(matmul(x, w)); break;
        case 8: out = add_row(x, b); break;
        case 9: out = slice_cols(concat_cols(x, y), kCols / 2, kCols / 2 + kCols); break;
        case 10: out = select_rows({1, 0, 1}, x, y); break;
        case 11: out = softmax_rows(x, {1, 1, 0, 1, 0, 1, 1, 1, 1, 0, 0, 1}); break;
        default: out = exp(tanh(x)); break;
      }
      pool.push_back(out);
      if (rng.below(8) == 0) tape.mark_output(out);
    }
    Var last = pool.back();
    Var logp = log_softmax_rows(add(last, pool[pool.size() / 2]));
    Var loss = add(pick_nll(logp, {0, 3, 1}, {1.0, 0.5, 0.25}), sum(mul(pick(), pick())));
    tape.mark_loss(loss);
  }

  static constexpr std::size_t kRows = 3;
  static constexpr std::size_t kCols = 4;

 private:
  static Tensor fill(Rng& rng, Shape shape, double range = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.storage()) v = rng.uniform(-range, range);
    return t;
  }

  std::uint64_t seed_;
  std::map<std::string, Tensor> params_;
  Tensor data_;
};

}  // namespace minnmt::testing
