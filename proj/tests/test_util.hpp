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

// Test-only oracles: central finite differences and random tensors.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "minnmt/random.hpp"
#include "minnmt/tape.hpp"

namespace minnmt::testing {

inline Tensor random_tensor(Rng& rng, Shape shape, double lo = -2.0, double hi = 2.0) {
  Tensor t(std::move(shape));
  for (double& v : t.storage()) v = rng.uniform(lo, hi);
  return t;
}

/// Relative error with a small absolute floor so that gradients that are
/// zero up to rounding do not divide by zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;  // "param[index]"
  std::size_t checked = 0;
};

using LossBuilder = std::function<Var(Tape&, const std::map<std::string, Var>&)>;

/// Compares backward() against central differences for every element of
/// every parameter. The numeric side only ever evaluates forward values.
inline GradCheck finite_difference_check(std::map<std::string, Tensor>& params,
                                         const LossBuilder& build, double eps = 1e-5,
                                         double floor = 1e-4) {
  auto evaluate = [&]() {
    Tape tape;
    std::map<std::string, Var> vars;
    for (auto& [name, value] : params) vars.emplace(name, tape.parameter(name, value));
    return build(tape, vars).value()[0];
  };

  Tape tape;
  std::map<std::string, Var> vars;
  for (auto& [name, value] : params) vars.emplace(name, tape.parameter(name, value));
  Var loss = build(tape, vars);
  const GradientSet grads = backward(tape, loss.id);

  GradCheck result;
  for (auto& [name, value] : params) {
    const Tensor& g = grads.at(name);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + eps;
      const double up = evaluate();
      value[i] = saved - eps;
      const double down = evaluate();
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = relative_error(g[i], numeric, floor);
      ++result.checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = name + "[" + std::to_string(i) + "] analytic=" + std::to_string(g[i]) +
                       " numeric=" + std::to_string(numeric);
      }
    }
  }
  return result;
}

}  // namespace minnmt::testing
