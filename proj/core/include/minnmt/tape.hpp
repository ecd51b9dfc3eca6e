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

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "minnmt/tensor.hpp"

namespace minnmt {

using NodeId = std::int32_t;

enum class Op : std::uint8_t {
  kLeaf,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kAddRow,
  kSigmoid,
  kTanh,
  kExp,
  kScale,
  kOneMinus,
  kMulConst,
  kConcatCols,
  kSliceCols,
  kGather,
  kStack,
  kBatchDot,
  kWeightedSum,
  kSoftmaxRows,
  kLogSoftmaxRows,
  kPickNll,
  kSum,
  kSelectRows,
};

const char* op_name(Op op);

/// Backward of this op reads the forward values of its inputs.
bool backward_reads_inputs(Op op);
/// Backward of this op reads its own forward output.
bool backward_reads_output(Op op);

struct TapeNode {
  Op op = Op::kLeaf;
  std::vector<NodeId> inputs;
  Shape shape;

  // Attributes. Which ones are meaningful depends on `op`.
  double factor = 0.0;                  // kScale
  std::size_t begin = 0, end = 0;       // kSliceCols
  std::vector<std::int32_t> index;      // kGather ids, kPickNll targets
  std::vector<double> weights;          // kPickNll per-row weights, kMulConst multiplier
  std::vector<std::uint8_t> mask;       // kSoftmaxRows/kWeightedSum [B,S], kSelectRows [B]

  // Leaves.
  std::string name;
  bool requires_grad = false;
  const Tensor* external = nullptr;     // parameters are borrowed
  Tensor owned;                         // constants are owned
  // Eager mode value of op nodes.
  Tensor value;

  const Tensor& leaf_value() const { return external ? *external : owned; }
};

/// Name -> gradient, one entry per parameter leaf, shapes identical to the
/// parameter.
using GradientSet = std::map<std::string, Tensor>;

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  NodeId id = -1;

  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  /// Eager mode only.
  const Tensor& value() const;
};

/// Recorded computation graph. Nodes are appended in execution order, so
/// every input id is smaller than the id of the node consuming it.
///
/// In eager mode each op is evaluated as it is recorded (define-by-run). In
/// deferred mode only shapes are computed; values come from run_with_plan.
class Tape {
 public:
  enum class Mode { kEager, kDeferred };

  explicit Tape(Mode mode = Mode::kEager) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Mode mode() const { return mode_; }
  bool eager() const { return mode_ == Mode::kEager; }

  /// Trainable leaf. The tensor is borrowed and must outlive the tape.
  /// Registering the same name twice returns the existing node.
  Var parameter(const std::string& name, const Tensor& value);
  /// Non-trainable leaf owning its value. Named constants can be replaced
  /// through run_with_plan's input map.
  Var constant(Tensor value, std::string name = {});

  NodeId record(TapeNode node);

  std::size_t size() const { return nodes_.size(); }
  const TapeNode& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<TapeNode>& nodes() const { return nodes_; }
  const Tensor& value(NodeId id) const;

  void mark_loss(Var loss);
  std::optional<NodeId> loss() const { return loss_; }
  void mark_output(Var v);
  const std::vector<NodeId>& outputs() const { return outputs_; }

  /// Stops further recording.
  void finalize() { finalized_ = true; }
  bool finalized() const { return finalized_; }

  /// Parameter leaves in registration order.
  std::vector<NodeId> parameters() const;

 private:
  Mode mode_;
  std::vector<TapeNode> nodes_;
  std::unordered_map<std::string, NodeId> param_index_;
  std::optional<NodeId> loss_;
  std::vector<NodeId> outputs_;
  bool finalized_ = false;
};

// Recording ops. All operands must live on the same tape.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// a[B,n] + bias[n] broadcast over rows.
Var add_row(Var a, Var bias);
Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
Var scale(Var a, double factor);
Var one_minus(Var a);
/// Elementwise product with a constant multiplier (dropout masks).
Var mul_const(Var a, std::vector<double> multiplier);
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
/// Rows of table[V,d] selected by ids -> [ids.size(), d].
Var gather(Var table, std::vector<std::int32_t> ids);
/// S tensors [B,d] -> [B,S,d].
Var stack(std::span<const Var> steps);
/// scores[b,s] = <memory[b,s,:], query[b,:]>
Var batch_dot(Var memory, Var query);
/// out[b,:] = sum_s weights[b,s] * memory[b,s,:] over unmasked s.
Var weighted_sum(Var memory, Var weights, std::vector<std::uint8_t> mask = {});
/// Row-wise softmax of [B,S] with optional [B,S] keep-mask.
Var softmax_rows(Var x, std::vector<std::uint8_t> mask = {});
Var log_softmax_rows(Var x);
/// -sum_b weights[b] * logp[b, targets[b]] as a [1] tensor.
Var pick_nll(Var logp, std::vector<std::int32_t> targets, std::vector<double> weights);
Var sum(Var a);
/// Row b comes from `when_true` if mask[b] else from `when_false`.
Var select_rows(std::vector<std::uint8_t> mask, Var when_true, Var when_false);

/// Reverse-mode gradients of a scalar loss for every parameter on the tape.
/// Parameters the loss does not depend on get zero tensors. Eager tapes only.
GradientSet backward(const Tape& tape, NodeId loss);
/// Same, restricted to the named parameter nodes.
GradientSet backward(const Tape& tape, NodeId loss, std::span<const NodeId> params);

namespace detail {

/// Evaluate node `id` given pointers to its input values. `out` must hold
/// shape_size(node.shape) elements and is fully overwritten.
void forward_node(const Tape& tape, NodeId id, std::span<const double* const> in, double* out);

/// Accumulate input gradients of node `id`. Null entries of `in_grads` mark
/// inputs that take no gradient.
void backward_node(const Tape& tape, NodeId id, std::span<const double* const> in,
                   const double* out, const double* out_grad, std::span<double* const> in_grads);

/// Per-node flag: gradient flows from a trainable leaf to `loss` through it.
std::vector<bool> gradient_mask(const Tape& tape, NodeId loss);

}  // namespace detail

}  // namespace minnmt
