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

// Liveness-based buffer sharing for recorded tapes.
//
// Every op node owns a value buffer and, when gradient flows through it, a
// gradient buffer. Forward node i runs at time i and its backward at time
// 2N-1-i; a buffer is live from the step that first writes it to the step
// that last reads it, counting backward-pass reads of saved activations.
// Buffers with disjoint live ranges may occupy the same arena slot.

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "minnmt/tape.hpp"

namespace minnmt {

struct BufferId {
  NodeId node = 0;
  bool grad = false;

  auto operator<=>(const BufferId&) const = default;
};

std::string to_string(BufferId id);

/// Closed interval [start, end] on the forward+backward timeline.
struct BufferInterval {
  BufferId buffer;
  std::size_t elements = 0;
  std::size_t start = 0;
  std::size_t end = 0;
};

struct ArenaStats {
  std::size_t naive_bytes = 0;
  std::size_t shared_bytes = 0;
};

using SlotId = std::size_t;

struct SharingPlan {
  std::map<BufferId, SlotId> assignment;
  std::map<SlotId, std::size_t> arena_slot_sizes;  // in elements
  ArenaStats stats;
  // Fingerprint of the tape the plan was made for.
  std::size_t tape_nodes = 0;
  std::optional<NodeId> tape_loss;
};

/// Live ranges of every arena buffer of a tape, sorted by (start, buffer).
std::vector<BufferInterval> buffer_liveness(const Tape& tape);

/// First-fit assignment of buffers to slots in order of first write. A buffer
/// reuses the lowest-numbered idle slot that is at least as large.
SharingPlan plan_buffer_sharing(const Tape& tape);

/// One private slot per buffer.
SharingPlan identity_plan(const Tape& tape);

struct RunResult {
  std::vector<Tensor> outputs;  // values of tape.outputs(), in order
  std::optional<double> loss;
  GradientSet gradients;        // every parameter leaf, empty without a loss
};

/// Execute the tape's forward pass and, if a loss is marked, its backward pass
/// inside one arena laid out by `plan`. `inputs` replaces the values of named
/// leaves. Results are bit-identical for every valid plan.
RunResult run_with_plan(const Tape& tape, const SharingPlan& plan,
                        const std::map<std::string, Tensor>* inputs = nullptr);

/// Reusable backing store for run_with_plan across batches.
class Arena {
 public:
  RunResult run(const Tape& tape, const SharingPlan& plan,
                const std::map<std::string, Tensor>* inputs = nullptr);
  std::size_t capacity_bytes() const { return storage_.capacity() * sizeof(double); }

 private:
  std::vector<double> storage_;
};

}  // namespace minnmt
