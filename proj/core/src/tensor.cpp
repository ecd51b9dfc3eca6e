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

#include "minnmt/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "minnmt/kernels.hpp"

namespace minnmt {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (std::size_t d : shape)
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_size(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_size(shape_))
    throw DimensionError("tensor data has " + std::to_string(data_.size()) + " elements, shape " +
                         shape_string(shape_) + " needs " + std::to_string(shape_size(shape_)));
}

Tensor Tensor::filled(Shape shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

bool Tensor::all_finite() const { return kernels::all_finite(data_.size(), data_.data()); }

void check_finite(std::span<const double> values, const std::string& what) {
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i]))
      throw NumericError("non-finite value " + std::to_string(values[i]) + " at element " +
                         std::to_string(i) + " of " + what);
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " +
                         shape_string(b.shape()));
  Tensor c({a.dim(0), b.dim(1)});
  kernels::gemm(a.dim(0), a.dim(1), b.dim(1), a.data().data(), b.data().data(), c.data().data());
  check_finite(c.data(), "matmul");
  return c;
}

Tensor pointwise(Pointwise kind, const Tensor& a, const Tensor* b, double factor) {
  const bool binary = kind == Pointwise::kAdd || kind == Pointwise::kSub || kind == Pointwise::kMul;
  if (binary) {
    if (!b) throw DimensionError("pointwise: binary op needs two operands");
    if (a.shape() != b->shape())
      throw DimensionError("pointwise: operand shapes differ: " + shape_string(a.shape()) + " vs " +
                           shape_string(b->shape()));
  }
  Tensor out(a.shape());
  const std::size_t n = a.size();
  const double* x = a.data().data();
  double* y = out.data().data();
  switch (kind) {
    case Pointwise::kAdd: kernels::add(n, x, b->data().data(), y); break;
    case Pointwise::kSub: kernels::sub(n, x, b->data().data(), y); break;
    case Pointwise::kMul: kernels::mul(n, x, b->data().data(), y); break;
    case Pointwise::kSigmoid: kernels::sigmoid(n, x, y); break;
    case Pointwise::kTanh: kernels::tanh(n, x, y); break;
    case Pointwise::kExp:
      for (std::size_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
      break;
    case Pointwise::kScale:
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * factor;
      break;
  }
  check_finite(out.data(), "pointwise");
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return pointwise(Pointwise::kAdd, a, &b); }
Tensor sub(const Tensor& a, const Tensor& b) { return pointwise(Pointwise::kSub, a, &b); }
Tensor mul(const Tensor& a, const Tensor& b) { return pointwise(Pointwise::kMul, a, &b); }
Tensor sigmoid(const Tensor& a) { return pointwise(Pointwise::kSigmoid, a); }
Tensor tanh(const Tensor& a) { return pointwise(Pointwise::kTanh, a); }
Tensor exp(const Tensor& a) { return pointwise(Pointwise::kExp, a); }
Tensor scale(const Tensor& a, double factor) { return pointwise(Pointwise::kScale, a, nullptr, factor); }

Tensor softmax(const Tensor& x, const std::vector<bool>* mask) {
  if (x.rank() != 1) throw DimensionError("softmax expects a vector, got " + shape_string(x.shape()));
  std::vector<std::uint8_t> m;
  if (mask) {
    if (mask->size() != x.size())
      throw DimensionError("softmax: mask length " + std::to_string(mask->size()) +
                           " does not match input length " + std::to_string(x.size()));
    m.assign(mask->begin(), mask->end());
  }
  Tensor out(x.shape());
  if (!kernels::softmax_row(x.size(), x.data().data(), mask ? m.data() : nullptr, out.data().data()))
    throw InvalidMaskError("softmax: every position is masked");
  check_finite(out.data(), "softmax");
  return out;
}

}  // namespace minnmt
