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

#include "minnmt/sharing.hpp"

#include <algorithm>

namespace minnmt {

std::string to_string(BufferId id) {
  return (id.grad ? "grad(" : "value(") + std::to_string(id.node) + ")";
}

namespace {

std::size_t ix(NodeId id) { return static_cast<std::size_t>(id); }

struct Timeline {
  std::size_t nodes;
  std::size_t forward(std::size_t i) const { return i; }
  std::size_t backward(std::size_t i) const { return 2 * nodes - 1 - i; }
  std::size_t end() const { return 2 * nodes; }
};

/// For each node with a gradient buffer, the consumer whose backward step
/// writes it first (the largest consumer id that propagates gradient).
std::vector<NodeId> first_gradient_writer(const Tape& tape, const std::vector<bool>& has_grad) {
  std::vector<NodeId> writer(tape.size(), -1);
  for (std::size_t j = 0; j < tape.size(); ++j) {
    const TapeNode& n = tape.nodes()[j];
    if (n.op == Op::kLeaf || !has_grad[j]) continue;
    for (NodeId in : n.inputs)
      if (has_grad[ix(in)]) writer[ix(in)] = std::max(writer[ix(in)], static_cast<NodeId>(j));
  }
  return writer;
}

}  // namespace

std::vector<BufferInterval> buffer_liveness(const Tape& tape) {
  const std::size_t count = tape.size();
  std::vector<BufferInterval> out;
  if (count == 0) return out;
  const Timeline time{count};
  const auto loss = tape.loss();
  const std::vector<bool> has_grad =
      loss ? detail::gradient_mask(tape, *loss) : std::vector<bool>(count, false);

  std::vector<std::size_t> value_end(count);
  for (std::size_t i = 0; i < count; ++i) value_end[i] = time.forward(i);
  for (std::size_t j = 0; j < count; ++j) {
    const TapeNode& n = tape.nodes()[j];
    if (n.op == Op::kLeaf) continue;
    const bool reads_inputs_later = has_grad[j] && backward_reads_inputs(n.op);
    for (NodeId in : n.inputs) {
      std::size_t& e = value_end[ix(in)];
      e = std::max(e, time.forward(j));
      if (reads_inputs_later) e = std::max(e, time.backward(j));
    }
    if (has_grad[j] && backward_reads_output(n.op))
      value_end[j] = std::max(value_end[j], time.backward(j));
  }
  for (NodeId o : tape.outputs()) value_end[ix(o)] = time.end();
  if (loss) value_end[ix(*loss)] = time.end();

  for (std::size_t i = 0; i < count; ++i) {
    const TapeNode& n = tape.nodes()[i];
    if (n.op == Op::kLeaf) continue;
    out.push_back({{static_cast<NodeId>(i), false}, shape_size(n.shape), time.forward(i), value_end[i]});
  }

  if (loss) {
    const auto writer = first_gradient_writer(tape, has_grad);
    for (std::size_t i = 0; i < count; ++i) {
      if (!has_grad[i]) continue;
      const TapeNode& n = tape.nodes()[i];
      const std::size_t start =
          static_cast<NodeId>(i) == *loss ? time.backward(i) : time.backward(ix(writer[i]));
      const std::size_t end = n.op == Op::kLeaf ? time.end() : time.backward(i);
      out.push_back({{static_cast<NodeId>(i), true}, shape_size(n.shape), start, end});
    }
  }

  std::sort(out.begin(), out.end(), [](const BufferInterval& a, const BufferInterval& b) {
    return a.start != b.start ? a.start < b.start : a.buffer < b.buffer;
  });
  return out;
}

namespace {

SharingPlan empty_plan(const Tape& tape) {
  SharingPlan plan;
  plan.tape_nodes = tape.size();
  plan.tape_loss = tape.loss();
  return plan;
}

}  // namespace

SharingPlan plan_buffer_sharing(const Tape& tape) {
  SharingPlan plan = empty_plan(tape);
  struct Slot {
    std::size_t size;
    std::size_t busy_until;
  };
  std::vector<Slot> slots;
  for (const BufferInterval& iv : buffer_liveness(tape)) {
    plan.stats.naive_bytes += iv.elements * sizeof(double);
    SlotId chosen = slots.size();
    for (SlotId s = 0; s < slots.size(); ++s) {
      if (slots[s].busy_until < iv.start && slots[s].size >= iv.elements) {
        chosen = s;
        break;
      }
    }
    if (chosen == slots.size()) slots.push_back({iv.elements, 0});
    slots[chosen].busy_until = iv.end;
    plan.assignment.emplace(iv.buffer, chosen);
  }
  for (SlotId s = 0; s < slots.size(); ++s) {
    plan.arena_slot_sizes.emplace(s, slots[s].size);
    plan.stats.shared_bytes += slots[s].size * sizeof(double);
  }
  return plan;
}

SharingPlan identity_plan(const Tape& tape) {
  SharingPlan plan = empty_plan(tape);
  SlotId next = 0;
  for (const BufferInterval& iv : buffer_liveness(tape)) {
    plan.assignment.emplace(iv.buffer, next);
    plan.arena_slot_sizes.emplace(next, iv.elements);
    plan.stats.naive_bytes += iv.elements * sizeof(double);
    ++next;
  }
  plan.stats.shared_bytes = plan.stats.naive_bytes;
  return plan;
}

RunResult run_with_plan(const Tape& tape, const SharingPlan& plan,
                        const std::map<std::string, Tensor>* inputs) {
  Arena arena;
  return arena.run(tape, plan, inputs);
}

RunResult Arena::run(const Tape& tape, const SharingPlan& plan,
                     const std::map<std::string, Tensor>* inputs) {
  const std::size_t count = tape.size();
  if (plan.tape_nodes != count || plan.tape_loss != tape.loss())
    throw Error("sharing plan does not belong to this tape (" + std::to_string(plan.tape_nodes) +
                " planned nodes, tape has " + std::to_string(count) + ")");

  // Slot offsets.
  std::map<SlotId, std::size_t> offset;
  std::size_t total = 0;
  for (const auto& [slot, size] : plan.arena_slot_sizes) {
    offset.emplace(slot, total);
    total += size;
  }
  storage_.assign(total, 0.0);

  std::vector<double*> value_ptr(count, nullptr), grad_ptr(count, nullptr);
  auto locate = [&](BufferId id, std::size_t elements) -> double* {
    auto it = plan.assignment.find(id);
    if (it == plan.assignment.end())
      throw Error("sharing plan does not cover buffer " + to_string(id));
    auto size = plan.arena_slot_sizes.find(it->second);
    if (size == plan.arena_slot_sizes.end() || size->second < elements)
      throw Error("sharing plan slot too small for buffer " + to_string(id));
    return storage_.data() + offset.at(it->second);
  };

  const auto loss = tape.loss();
  const std::vector<bool> has_grad =
      loss ? detail::gradient_mask(tape, *loss) : std::vector<bool>(count, false);

  std::vector<const Tensor*> leaf_value(count, nullptr);
  for (std::size_t i = 0; i < count; ++i) {
    const TapeNode& n = tape.nodes()[i];
    const std::size_t elements = shape_size(n.shape);
    if (n.op == Op::kLeaf) {
      leaf_value[i] = &n.leaf_value();
      if (inputs && !n.name.empty()) {
        if (auto it = inputs->find(n.name); it != inputs->end()) {
          if (it->second.shape() != n.shape)
            throw DimensionError("input '" + n.name + "' has shape " +
                                 shape_string(it->second.shape()) + ", tape expects " +
                                 shape_string(n.shape));
          leaf_value[i] = &it->second;
        }
      }
      if (leaf_value[i]->size() != elements)
        throw Error("leaf node " + std::to_string(i) + " has no value");
    } else {
      value_ptr[i] = locate({static_cast<NodeId>(i), false}, elements);
    }
    if (has_grad[i]) grad_ptr[i] = locate({static_cast<NodeId>(i), true}, elements);
  }
  auto value_of = [&](NodeId id) -> const double* {
    return leaf_value[ix(id)] ? leaf_value[ix(id)]->data().data() : value_ptr[ix(id)];
  };

  std::vector<const double*> in;
  std::vector<double*> gin;
  for (std::size_t i = 0; i < count; ++i) {
    const TapeNode& n = tape.nodes()[i];
    if (n.op == Op::kLeaf) continue;
    in.clear();
    for (NodeId input : n.inputs) in.push_back(value_of(input));
    detail::forward_node(tape, static_cast<NodeId>(i), in, value_ptr[i]);
    check_finite({value_ptr[i], shape_size(n.shape)}, op_name(n.op));
  }

  RunResult result;
  for (NodeId o : tape.outputs()) {
    const Shape& shape = tape.node(o).shape;
    const double* src = value_of(o);
    result.outputs.emplace_back(shape, std::vector<double>(src, src + shape_size(shape)));
  }
  if (!loss) return result;
  result.loss = value_of(*loss)[0];

  std::vector<bool> started(count, false);
  if (has_grad[ix(*loss)]) {
    grad_ptr[ix(*loss)][0] = 1.0;
    started[ix(*loss)] = true;
  }
  for (NodeId id = *loss; id >= 0; --id) {
    const TapeNode& n = tape.node(id);
    if (!has_grad[ix(id)] || n.op == Op::kLeaf) continue;
    in.clear();
    gin.clear();
    for (NodeId input : n.inputs) {
      in.push_back(value_of(input));
      if (has_grad[ix(input)]) {
        if (!started[ix(input)]) {
          // Gradient buffers come alive at their first writer; the slot may
          // hold a dead buffer's bytes.
          std::fill_n(grad_ptr[ix(input)], shape_size(tape.node(input).shape), 0.0);
          started[ix(input)] = true;
        }
        gin.push_back(grad_ptr[ix(input)]);
      } else {
        gin.push_back(nullptr);
      }
    }
    detail::backward_node(tape, id, in, value_ptr[ix(id)], grad_ptr[ix(id)], gin);
  }

  for (NodeId p : tape.parameters()) {
    const TapeNode& n = tape.node(p);
    Tensor g(n.shape);
    if (has_grad[ix(p)]) std::copy_n(grad_ptr[ix(p)], g.size(), g.data().data());
    result.gradients.emplace(n.name, std::move(g));
  }
  return result;
}

}  // namespace minnmt
