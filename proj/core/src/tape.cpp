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

#include "minnmt/tape.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "minnmt/kernels.hpp"

namespace minnmt {

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kMatMul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kAddRow: return "add_row";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kExp: return "exp";
    case Op::kScale: return "scale";
    case Op::kOneMinus: return "one_minus";
    case Op::kMulConst: return "mul_const";
    case Op::kConcatCols: return "concat_cols";
    case Op::kSliceCols: return "slice_cols";
    case Op::kGather: return "gather";
    case Op::kStack: return "stack";
    case Op::kBatchDot: return "batch_dot";
    case Op::kWeightedSum: return "weighted_sum";
    case Op::kSoftmaxRows: return "softmax_rows";
    case Op::kLogSoftmaxRows: return "log_softmax_rows";
    case Op::kPickNll: return "pick_nll";
    case Op::kSum: return "sum";
    case Op::kSelectRows: return "select_rows";
  }
  return "?";
}

bool backward_reads_inputs(Op op) {
  switch (op) {
    case Op::kMatMul:
    case Op::kMul:
    case Op::kBatchDot:
    case Op::kWeightedSum:
      return true;
    default:
      return false;
  }
}

bool backward_reads_output(Op op) {
  switch (op) {
    case Op::kSigmoid:
    case Op::kTanh:
    case Op::kExp:
    case Op::kSoftmaxRows:
    case Op::kLogSoftmaxRows:
      return true;
    default:
      return false;
  }
}

// ---------------------------------------------------------------------------
// Tape

const Shape& Var::shape() const { return tape->node(id).shape; }
const Tensor& Var::value() const { return tape->value(id); }

Var Tape::parameter(const std::string& name, const Tensor& value) {
  if (auto it = param_index_.find(name); it != param_index_.end()) return {this, it->second};
  TapeNode n;
  n.op = Op::kLeaf;
  n.shape = value.shape();
  n.name = name;
  n.requires_grad = true;
  n.external = &value;
  const NodeId id = record(std::move(n));
  param_index_.emplace(name, id);
  return {this, id};
}

Var Tape::constant(Tensor value, std::string name) {
  TapeNode n;
  n.op = Op::kLeaf;
  n.shape = value.shape();
  n.name = std::move(name);
  n.owned = std::move(value);
  return {this, record(std::move(n))};
}

NodeId Tape::record(TapeNode node) {
  if (finalized_) throw Error("tape is finalized; no further ops may be recorded");
  const auto id = static_cast<NodeId>(nodes_.size());
  for ([[maybe_unused]] NodeId in : node.inputs) assert(in >= 0 && in < id);
  nodes_.push_back(std::move(node));
  TapeNode& n = nodes_.back();
  if (eager() && n.op != Op::kLeaf) {
    n.value = Tensor(n.shape);
    std::vector<const double*> in;
    in.reserve(n.inputs.size());
    for (NodeId i : n.inputs) in.push_back(value(i).data().data());
    detail::forward_node(*this, id, in, n.value.data().data());
    check_finite(n.value.data(), op_name(n.op));
  }
  return id;
}

const Tensor& Tape::value(NodeId id) const {
  const TapeNode& n = node(id);
  if (n.op == Op::kLeaf) return n.leaf_value();
  if (!eager()) throw Error("values are not available on a deferred tape");
  return n.value;
}

void Tape::mark_loss(Var loss) {
  if (loss.tape != this) throw Error("loss belongs to another tape");
  if (shape_size(loss.shape()) != 1)
    throw DimensionError("loss must be scalar, got " + shape_string(loss.shape()));
  loss_ = loss.id;
}

void Tape::mark_output(Var v) {
  if (v.tape != this) throw Error("output belongs to another tape");
  outputs_.push_back(v.id);
}

std::vector<NodeId> Tape::parameters() const {
  std::vector<NodeId> ids;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].op == Op::kLeaf && nodes_[i].requires_grad) ids.push_back(static_cast<NodeId>(i));
  return ids;
}

// ---------------------------------------------------------------------------
// Recording ops

namespace {

Tape& same_tape(Var a, Var b) {
  if (!a.tape || a.tape != b.tape) throw Error("operands live on different tapes");
  return *a.tape;
}

Var emit(Tape& tape, TapeNode n) { return {&tape, tape.record(std::move(n))}; }

TapeNode make(Op op, std::vector<NodeId> inputs, Shape shape) {
  TapeNode n;
  n.op = op;
  n.inputs = std::move(inputs);
  n.shape = std::move(shape);
  return n;
}

void require_rank(Var v, std::size_t rank, const char* what) {
  if (v.shape().size() != rank)
    throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(v.shape()));
}

Var binary(Op op, Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op_name(op)) + ": operand shapes differ: " +
                         shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  return emit(t, make(op, {a.id, b.id}, a.shape()));
}

Var unary(Op op, Var a) { return emit(*a.tape, make(op, {a.id}, a.shape())); }

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " +
                         shape_string(b.shape()));
  return emit(t, make(Op::kMatMul, {a.id, b.id}, {a.dim(0), b.dim(1)}));
}

Var add(Var a, Var b) { return binary(Op::kAdd, a, b); }
Var sub(Var a, Var b) { return binary(Op::kSub, a, b); }
Var mul(Var a, Var b) { return binary(Op::kMul, a, b); }

Var add_row(Var a, Var bias) {
  Tape& t = same_tape(a, bias);
  require_rank(a, 2, "add_row");
  if (shape_size(bias.shape()) != a.dim(1))
    throw DimensionError("add_row: bias " + shape_string(bias.shape()) + " does not match rows of " +
                         shape_string(a.shape()));
  return emit(t, make(Op::kAddRow, {a.id, bias.id}, a.shape()));
}

Var sigmoid(Var a) { return unary(Op::kSigmoid, a); }
Var tanh(Var a) { return unary(Op::kTanh, a); }
Var exp(Var a) { return unary(Op::kExp, a); }
Var one_minus(Var a) { return unary(Op::kOneMinus, a); }

Var scale(Var a, double factor) {
  TapeNode n = make(Op::kScale, {a.id}, a.shape());
  n.factor = factor;
  return emit(*a.tape, std::move(n));
}

Var mul_const(Var a, std::vector<double> multiplier) {
  if (multiplier.size() != shape_size(a.shape()))
    throw DimensionError("mul_const: multiplier has " + std::to_string(multiplier.size()) +
                         " elements, operand " + shape_string(a.shape()));
  TapeNode n = make(Op::kMulConst, {a.id}, a.shape());
  n.weights = std::move(multiplier);
  return emit(*a.tape, std::move(n));
}

Var concat_cols(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_rank(a, 2, "concat_cols");
  require_rank(b, 2, "concat_cols");
  if (a.dim(0) != b.dim(0))
    throw DimensionError("concat_cols: row counts differ: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  return emit(t, make(Op::kConcatCols, {a.id, b.id}, {a.dim(0), a.dim(1) + b.dim(1)}));
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  require_rank(a, 2, "slice_cols");
  if (begin >= end || end > a.dim(1))
    throw DimensionError("slice_cols: bad range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") of " + shape_string(a.shape()));
  TapeNode n = make(Op::kSliceCols, {a.id}, {a.dim(0), end - begin});
  n.begin = begin;
  n.end = end;
  return emit(*a.tape, std::move(n));
}

Var gather(Var table, std::vector<std::int32_t> ids) {
  require_rank(table, 2, "gather");
  if (ids.empty()) throw DimensionError("gather: no ids");
  for (std::int32_t id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= table.dim(0))
      throw DimensionError("gather: id " + std::to_string(id) + " out of range for table " +
                           shape_string(table.shape()));
  TapeNode n = make(Op::kGather, {table.id}, {ids.size(), table.dim(1)});
  n.index = std::move(ids);
  return emit(*table.tape, std::move(n));
}

Var stack(std::span<const Var> steps) {
  if (steps.empty()) throw DimensionError("stack: no inputs");
  const Shape& s0 = steps[0].shape();
  if (s0.size() != 2) throw DimensionError("stack: inputs must be matrices, got " + shape_string(s0));
  std::vector<NodeId> ids;
  for (const Var& v : steps) {
    same_tape(steps[0], v);
    if (v.shape() != s0)
      throw DimensionError("stack: shapes differ: " + shape_string(s0) + " vs " +
                           shape_string(v.shape()));
    ids.push_back(v.id);
  }
  return emit(*steps[0].tape, make(Op::kStack, std::move(ids), {s0[0], steps.size(), s0[1]}));
}

Var batch_dot(Var memory, Var query) {
  Tape& t = same_tape(memory, query);
  require_rank(memory, 3, "batch_dot");
  require_rank(query, 2, "batch_dot");
  if (memory.dim(0) != query.dim(0) || memory.dim(2) != query.dim(1))
    throw DimensionError("batch_dot: memory " + shape_string(memory.shape()) +
                         " incompatible with query " + shape_string(query.shape()));
  return emit(t, make(Op::kBatchDot, {memory.id, query.id}, {memory.dim(0), memory.dim(1)}));
}

namespace {

void check_row_mask(const std::vector<std::uint8_t>& mask, std::size_t rows, std::size_t cols,
                    const char* what) {
  if (mask.empty()) return;
  if (mask.size() != rows * cols)
    throw DimensionError(std::string(what) + ": mask has " + std::to_string(mask.size()) +
                         " entries, expected " + std::to_string(rows * cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto* row = mask.data() + r * cols;
    if (std::none_of(row, row + cols, [](std::uint8_t m) { return m != 0; }))
      throw InvalidMaskError(std::string(what) + ": every position of row " + std::to_string(r) +
                             " is masked");
  }
}

}  // namespace

Var weighted_sum(Var memory, Var weights, std::vector<std::uint8_t> mask) {
  Tape& t = same_tape(memory, weights);
  require_rank(memory, 3, "weighted_sum");
  require_rank(weights, 2, "weighted_sum");
  if (memory.dim(0) != weights.dim(0) || memory.dim(1) != weights.dim(1))
    throw DimensionError("weighted_sum: memory " + shape_string(memory.shape()) +
                         " incompatible with weights " + shape_string(weights.shape()));
  check_row_mask(mask, memory.dim(0), memory.dim(1), "weighted_sum");
  TapeNode n = make(Op::kWeightedSum, {memory.id, weights.id}, {memory.dim(0), memory.dim(2)});
  n.mask = std::move(mask);
  return emit(t, std::move(n));
}

Var softmax_rows(Var x, std::vector<std::uint8_t> mask) {
  require_rank(x, 2, "softmax_rows");
  check_row_mask(mask, x.dim(0), x.dim(1), "softmax_rows");
  TapeNode n = make(Op::kSoftmaxRows, {x.id}, x.shape());
  n.mask = std::move(mask);
  return emit(*x.tape, std::move(n));
}

Var log_softmax_rows(Var x) {
  require_rank(x, 2, "log_softmax_rows");
  return unary(Op::kLogSoftmaxRows, x);
}

Var pick_nll(Var logp, std::vector<std::int32_t> targets, std::vector<double> weights) {
  require_rank(logp, 2, "pick_nll");
  if (targets.size() != logp.dim(0) || weights.size() != logp.dim(0))
    throw DimensionError("pick_nll: need one target and weight per row of " +
                         shape_string(logp.shape()));
  for (std::int32_t id : targets)
    if (id < 0 || static_cast<std::size_t>(id) >= logp.dim(1))
      throw DimensionError("pick_nll: target " + std::to_string(id) + " out of range");
  TapeNode n = make(Op::kPickNll, {logp.id}, {1});
  n.index = std::move(targets);
  n.weights = std::move(weights);
  return emit(*logp.tape, std::move(n));
}

Var sum(Var a) { return emit(*a.tape, make(Op::kSum, {a.id}, {1})); }

Var select_rows(std::vector<std::uint8_t> mask, Var when_true, Var when_false) {
  Tape& t = same_tape(when_true, when_false);
  if (when_true.shape() != when_false.shape())
    throw DimensionError("select_rows: shapes differ: " + shape_string(when_true.shape()) + " vs " +
                         shape_string(when_false.shape()));
  if (mask.size() != when_true.dim(0))
    throw DimensionError("select_rows: mask has " + std::to_string(mask.size()) + " rows, operand " +
                         shape_string(when_true.shape()));
  TapeNode n = make(Op::kSelectRows, {when_true.id, when_false.id}, when_true.shape());
  n.mask = std::move(mask);
  return emit(t, std::move(n));
}

// ---------------------------------------------------------------------------
// Kernels

namespace detail {

namespace k = kernels;

void forward_node(const Tape& tape, NodeId id, std::span<const double* const> in, double* out) {
  const TapeNode& n = tape.node(id);
  const std::size_t size = shape_size(n.shape);
  auto in_shape = [&](std::size_t i) -> const Shape& { return tape.node(n.inputs[i]).shape; };
  switch (n.op) {
    case Op::kLeaf:
      assert(false && "leaves are not evaluated");
      break;
    case Op::kMatMul:
      k::gemm(in_shape(0)[0], in_shape(0)[1], in_shape(1)[1], in[0], in[1], out);
      break;
    case Op::kAdd: k::add(size, in[0], in[1], out); break;
    case Op::kSub: k::sub(size, in[0], in[1], out); break;
    case Op::kMul: k::mul(size, in[0], in[1], out); break;
    case Op::kAddRow: k::add_row(n.shape[0], n.shape[1], in[0], in[1], out); break;
    case Op::kSigmoid: k::sigmoid(size, in[0], out); break;
    case Op::kTanh: k::tanh(size, in[0], out); break;
    case Op::kExp:
      for (std::size_t i = 0; i < size; ++i) out[i] = std::exp(in[0][i]);
      break;
    case Op::kScale:
      for (std::size_t i = 0; i < size; ++i) out[i] = in[0][i] * n.factor;
      break;
    case Op::kOneMinus: k::one_minus(size, in[0], out); break;
    case Op::kMulConst: k::mul(size, in[0], n.weights.data(), out); break;
    case Op::kConcatCols:
      k::concat_cols(n.shape[0], in_shape(0)[1], in_shape(1)[1], in[0], in[1], out);
      break;
    case Op::kSliceCols:
      k::slice_cols(n.shape[0], in_shape(0)[1], n.begin, n.end, in[0], out);
      break;
    case Op::kGather: {
      const std::size_t d = n.shape[1];
      for (std::size_t r = 0; r < n.index.size(); ++r)
        std::copy(in[0] + n.index[r] * d, in[0] + (n.index[r] + 1) * d, out + r * d);
      break;
    }
    case Op::kStack: {
      const std::size_t rows = n.shape[0], steps = n.shape[1], d = n.shape[2];
      for (std::size_t s = 0; s < steps; ++s)
        for (std::size_t b = 0; b < rows; ++b)
          std::copy(in[s] + b * d, in[s] + (b + 1) * d, out + (b * steps + s) * d);
      break;
    }
    case Op::kBatchDot: {
      const std::size_t rows = in_shape(0)[0], steps = in_shape(0)[1], d = in_shape(0)[2];
      for (std::size_t b = 0; b < rows; ++b)
        k::dot_rows(steps, d, in[0] + b * steps * d, in[1] + b * d, out + b * steps);
      break;
    }
    case Op::kWeightedSum: {
      const std::size_t rows = in_shape(0)[0], steps = in_shape(0)[1], d = in_shape(0)[2];
      for (std::size_t b = 0; b < rows; ++b)
        k::weighted_sum(steps, d, in[0] + b * steps * d, in[1] + b * steps,
                        n.mask.empty() ? nullptr : n.mask.data() + b * steps, out + b * d);
      break;
    }
    case Op::kSoftmaxRows: {
      const std::size_t rows = n.shape[0], cols = n.shape[1];
      for (std::size_t b = 0; b < rows; ++b)
        k::softmax_row(cols, in[0] + b * cols, n.mask.empty() ? nullptr : n.mask.data() + b * cols,
                       out + b * cols);
      break;
    }
    case Op::kLogSoftmaxRows: {
      const std::size_t rows = n.shape[0], cols = n.shape[1];
      for (std::size_t b = 0; b < rows; ++b) k::log_softmax_row(cols, in[0] + b * cols, out + b * cols);
      break;
    }
    case Op::kPickNll: {
      const std::size_t cols = in_shape(0)[1];
      double acc = 0.0;
      for (std::size_t b = 0; b < n.index.size(); ++b) acc -= n.weights[b] * in[0][b * cols + n.index[b]];
      out[0] = acc;
      break;
    }
    case Op::kSum: {
      const std::size_t m = shape_size(in_shape(0));
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += in[0][i];
      out[0] = acc;
      break;
    }
    case Op::kSelectRows: {
      const std::size_t rows = n.shape[0], w = size / rows;
      for (std::size_t b = 0; b < rows; ++b) {
        const double* src = n.mask[b] ? in[0] : in[1];
        std::copy(src + b * w, src + (b + 1) * w, out + b * w);
      }
      break;
    }
  }
}

void backward_node(const Tape& tape, NodeId id, std::span<const double* const> in,
                   const double* out, const double* g, std::span<double* const> gin) {
  const TapeNode& n = tape.node(id);
  const std::size_t size = shape_size(n.shape);
  auto in_shape = [&](std::size_t i) -> const Shape& { return tape.node(n.inputs[i]).shape; };
  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kMatMul: {
      const std::size_t m = in_shape(0)[0], kk = in_shape(0)[1], nn = in_shape(1)[1];
      if (gin[0]) k::gemm_nt_acc(m, nn, kk, g, in[1], gin[0]);
      if (gin[1]) k::gemm_tn_acc(m, kk, nn, in[0], g, gin[1]);
      break;
    }
    case Op::kAdd:
      if (gin[0]) for (std::size_t i = 0; i < size; ++i) gin[0][i] += g[i];
      if (gin[1]) for (std::size_t i = 0; i < size; ++i) gin[1][i] += g[i];
      break;
    case Op::kSub:
      if (gin[0]) for (std::size_t i = 0; i < size; ++i) gin[0][i] += g[i];
      if (gin[1]) for (std::size_t i = 0; i < size; ++i) gin[1][i] -= g[i];
      break;
    case Op::kMul:
      if (gin[0]) for (std::size_t i = 0; i < size; ++i) gin[0][i] += g[i] * in[1][i];
      if (gin[1]) for (std::size_t i = 0; i < size; ++i) gin[1][i] += g[i] * in[0][i];
      break;
    case Op::kAddRow: {
      const std::size_t rows = n.shape[0], cols = n.shape[1];
      if (gin[0]) for (std::size_t i = 0; i < size; ++i) gin[0][i] += g[i];
      if (gin[1])
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < cols; ++j) gin[1][j] += g[r * cols + j];
      break;
    }
    case Op::kSigmoid:
      if (gin[0]) for (std::size_t i = 0; i < size; ++i) gin[0][i] += g[i] * out[i] * (1.0 - out[i]);
      break;
    case Op::kTanh:
      if (gin[0]) for (std::size_t i = 0; i < size; ++i) gin[0][i] += g[i] * (1.0 - out[i] * out[i]);
      break;
    case Op::kExp:
      if (gin[0]) for (std::size_t i = 0; i < size; ++i) gin[0][i] += g[i] * out[i];
      break;
    case Op::kScale:
      if (gin[0]) for (std::size_t i = 0; i < size; ++i) gin[0][i] += g[i] * n.factor;
      break;
    case Op::kOneMinus:
      if (gin[0]) for (std::size_t i = 0; i < size; ++i) gin[0][i] -= g[i];
      break;
    case Op::kMulConst:
      if (gin[0]) for (std::size_t i = 0; i < size; ++i) gin[0][i] += g[i] * n.weights[i];
      break;
    case Op::kConcatCols: {
      const std::size_t rows = n.shape[0], ca = in_shape(0)[1], cb = in_shape(1)[1];
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = g + r * (ca + cb);
        if (gin[0]) for (std::size_t j = 0; j < ca; ++j) gin[0][r * ca + j] += gr[j];
        if (gin[1]) for (std::size_t j = 0; j < cb; ++j) gin[1][r * cb + j] += gr[ca + j];
      }
      break;
    }
    case Op::kSliceCols: {
      if (!gin[0]) break;
      const std::size_t rows = n.shape[0], cols = in_shape(0)[1], w = n.end - n.begin;
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < w; ++j) gin[0][r * cols + n.begin + j] += g[r * w + j];
      break;
    }
    case Op::kGather: {
      if (!gin[0]) break;
      const std::size_t d = n.shape[1];
      for (std::size_t r = 0; r < n.index.size(); ++r) {
        double* dst = gin[0] + n.index[r] * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += g[r * d + j];
      }
      break;
    }
    case Op::kStack: {
      const std::size_t rows = n.shape[0], steps = n.shape[1], d = n.shape[2];
      for (std::size_t s = 0; s < steps; ++s) {
        if (!gin[s]) continue;
        for (std::size_t b = 0; b < rows; ++b)
          for (std::size_t j = 0; j < d; ++j) gin[s][b * d + j] += g[(b * steps + s) * d + j];
      }
      break;
    }
    case Op::kBatchDot: {
      const std::size_t rows = in_shape(0)[0], steps = in_shape(0)[1], d = in_shape(0)[2];
      for (std::size_t b = 0; b < rows; ++b) {
        const double* mem = in[0] + b * steps * d;
        const double* q = in[1] + b * d;
        for (std::size_t s = 0; s < steps; ++s) {
          const double gs = g[b * steps + s];
          if (gin[0]) {
            double* dm = gin[0] + (b * steps + s) * d;
            for (std::size_t j = 0; j < d; ++j) dm[j] += gs * q[j];
          }
          if (gin[1]) {
            double* dq = gin[1] + b * d;
            for (std::size_t j = 0; j < d; ++j) dq[j] += gs * mem[s * d + j];
          }
        }
      }
      break;
    }
    case Op::kWeightedSum: {
      const std::size_t rows = in_shape(0)[0], steps = in_shape(0)[1], d = in_shape(0)[2];
      for (std::size_t b = 0; b < rows; ++b) {
        const double* mem = in[0] + b * steps * d;
        const double* w = in[1] + b * steps;
        const double* gb = g + b * d;
        for (std::size_t s = 0; s < steps; ++s) {
          if (!n.mask.empty() && !n.mask[b * steps + s]) continue;
          if (gin[0]) {
            double* dm = gin[0] + (b * steps + s) * d;
            for (std::size_t j = 0; j < d; ++j) dm[j] += w[s] * gb[j];
          }
          if (gin[1]) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) acc += gb[j] * mem[s * d + j];
            gin[1][b * steps + s] += acc;
          }
        }
      }
      break;
    }
    case Op::kSoftmaxRows: {
      if (!gin[0]) break;
      const std::size_t rows = n.shape[0], cols = n.shape[1];
      for (std::size_t b = 0; b < rows; ++b) {
        const double* y = out + b * cols;
        const double* gb = g + b * cols;
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += gb[j] * y[j];
        for (std::size_t j = 0; j < cols; ++j) gin[0][b * cols + j] += y[j] * (gb[j] - dot);
      }
      break;
    }
    case Op::kLogSoftmaxRows: {
      if (!gin[0]) break;
      const std::size_t rows = n.shape[0], cols = n.shape[1];
      for (std::size_t b = 0; b < rows; ++b) {
        const double* y = out + b * cols;
        const double* gb = g + b * cols;
        double total = 0.0;
        for (std::size_t j = 0; j < cols; ++j) total += gb[j];
        for (std::size_t j = 0; j < cols; ++j) gin[0][b * cols + j] += gb[j] - std::exp(y[j]) * total;
      }
      break;
    }
    case Op::kPickNll: {
      if (!gin[0]) break;
      const std::size_t cols = in_shape(0)[1];
      for (std::size_t b = 0; b < n.index.size(); ++b) gin[0][b * cols + n.index[b]] -= n.weights[b] * g[0];
      break;
    }
    case Op::kSum: {
      if (!gin[0]) break;
      const std::size_t m = shape_size(in_shape(0));
      for (std::size_t i = 0; i < m; ++i) gin[0][i] += g[0];
      break;
    }
    case Op::kSelectRows: {
      const std::size_t rows = n.shape[0], w = size / rows;
      for (std::size_t b = 0; b < rows; ++b) {
        double* dst = n.mask[b] ? gin[0] : gin[1];
        if (!dst) continue;
        for (std::size_t j = 0; j < w; ++j) dst[b * w + j] += g[b * w + j];
      }
      break;
    }
  }
}

std::vector<bool> gradient_mask(const Tape& tape, NodeId loss) {
  const std::size_t count = tape.size();
  std::vector<bool> needs(count, false), reaches(count, false);
  for (std::size_t i = 0; i < count; ++i) {
    const TapeNode& n = tape.nodes()[i];
    if (n.op == Op::kLeaf) {
      needs[i] = n.requires_grad;
    } else {
      for (NodeId in : n.inputs) needs[i] = needs[i] || needs[static_cast<std::size_t>(in)];
    }
  }
  reaches[static_cast<std::size_t>(loss)] = true;
  for (std::size_t i = static_cast<std::size_t>(loss) + 1; i-- > 0;) {
    if (!reaches[i]) continue;
    for (NodeId in : tape.nodes()[i].inputs) reaches[static_cast<std::size_t>(in)] = true;
  }
  std::vector<bool> mask(count);
  for (std::size_t i = 0; i < count; ++i) mask[i] = needs[i] && reaches[i];
  return mask;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Eager backward

GradientSet backward(const Tape& tape, NodeId loss) {
  const auto params = tape.parameters();
  return backward(tape, loss, params);
}

GradientSet backward(const Tape& tape, NodeId loss, std::span<const NodeId> params) {
  if (!tape.eager()) throw Error("backward: deferred tapes are executed with run_with_plan");
  if (loss < 0 || static_cast<std::size_t>(loss) >= tape.size()) throw Error("backward: bad loss node");
  if (shape_size(tape.node(loss).shape) != 1)
    throw DimensionError("backward: loss must be scalar, got " + shape_string(tape.node(loss).shape));

  const std::vector<bool> has_grad = detail::gradient_mask(tape, loss);
  std::vector<std::vector<double>> grads(tape.size());
  for (std::size_t i = 0; i < tape.size(); ++i)
    if (has_grad[i]) grads[i].assign(shape_size(tape.nodes()[i].shape), 0.0);
  if (has_grad[static_cast<std::size_t>(loss)]) grads[static_cast<std::size_t>(loss)][0] = 1.0;

  std::vector<const double*> in;
  std::vector<double*> gin;
  for (NodeId id = loss; id >= 0; --id) {
    const TapeNode& n = tape.node(id);
    if (!has_grad[static_cast<std::size_t>(id)] || n.op == Op::kLeaf) continue;
    in.clear();
    gin.clear();
    for (NodeId i : n.inputs) {
      assert(i < id);
      in.push_back(tape.value(i).data().data());
      gin.push_back(has_grad[static_cast<std::size_t>(i)] ? grads[static_cast<std::size_t>(i)].data()
                                                           : nullptr);
    }
    detail::backward_node(tape, id, in, n.value.data().data(), grads[static_cast<std::size_t>(id)].data(),
                          gin);
  }

  GradientSet out;
  for (NodeId p : params) {
    const TapeNode& n = tape.node(p);
    if (n.op != Op::kLeaf || !n.requires_grad) throw Error("backward: node is not a parameter");
    Tensor g(n.shape);
    if (has_grad[static_cast<std::size_t>(p)]) g.storage() = std::move(grads[static_cast<std::size_t>(p)]);
    out.emplace(n.name, std::move(g));
  }
  return out;
}

}  // namespace minnmt
