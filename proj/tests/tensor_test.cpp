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

#include <gtest/gtest.h>

#include <cmath>

#include "minnmt/tensor.hpp"
#include "test_util.hpp"

namespace minnmt {
namespace {

// Brute-force triple loop, independent of the blocked kernel.
Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      double s = 0;
      for (std::size_t p = 0; p < a.dim(1); ++p) s += a.at(i, p) * b.at(p, j);
      c.at(i, j) = s;
    }
  return c;
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  const Tensor id = Tensor::matrix({{1, 0}, {0, 1}});
  const Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  EXPECT_EQ(matmul(id, m), m);
}

TEST(Matmul, MatrixTimesColumn) {
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  const Tensor b = Tensor::matrix({{5}, {6}});
  const Tensor expected = Tensor::matrix({{17}, {39}});
  EXPECT_EQ(naive_matmul(a, b), expected);
  EXPECT_EQ(matmul(a, b), expected);
}

TEST(Matmul, TimesZeroIsZero) {
  const Tensor a = Tensor::matrix({{1, -2, 3}, {4, 5, -6}});
  EXPECT_EQ(matmul(a, Tensor::zeros({3, 4})), Tensor::zeros({2, 4}));
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3] by [2, 3]"), std::string::npos) << msg;
  }
}

TEST(Matmul, BlockedKernelMatchesTripleLoopBitwise) {
  Rng rng(7);
  for (std::size_t m : {1u, 3u, 4u, 5u, 9u}) {
    const Tensor a = testing::random_tensor(rng, {m, 6});
    const Tensor b = testing::random_tensor(rng, {6, 5});
    EXPECT_TRUE(bitwise_equal(matmul(a, b), naive_matmul(a, b))) << "m=" << m;
  }
}

TEST(Matmul, RowsIndependentOfBatchComposition) {
  Rng rng(11);
  const Tensor a = testing::random_tensor(rng, {7, 8});
  const Tensor b = testing::random_tensor(rng, {8, 3});
  const Tensor full = matmul(a, b);
  for (std::size_t r = 0; r < 7; ++r) {
    Tensor row({1, 8}, std::vector<double>(a.data().begin() + r * 8, a.data().begin() + (r + 1) * 8));
    const Tensor single = matmul(row, b);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(single[j], full.at(r, j));
  }
}

TEST(Pointwise, Examples) {
  EXPECT_EQ(sigmoid(Tensor::vector({0.0}))[0], 0.5);
  EXPECT_EQ(tanh(Tensor::vector({0.0}))[0], 0.0);
  EXPECT_EQ(add(Tensor::vector({1, 2}), Tensor::vector({3, 4})), Tensor::vector({4, 6}));
  EXPECT_EQ(sub(Tensor::vector({1, 2}), Tensor::vector({3, 4})), Tensor::vector({-2, -2}));
  EXPECT_EQ(mul(Tensor::vector({1, 2}), Tensor::vector({3, 4})), Tensor::vector({3, 8}));
  EXPECT_EQ(scale(Tensor::vector({1, -2}), 0.5), Tensor::vector({0.5, -1}));
  EXPECT_EQ(exp(Tensor::vector({0.0}))[0], 1.0);
}

TEST(Pointwise, ShapeMismatch) {
  EXPECT_THROW(add(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
  EXPECT_THROW(mul(Tensor::zeros({2, 1}), Tensor::zeros({1, 2})), DimensionError);
}

TEST(Pointwise, NonFiniteOutputIsAnError) {
  EXPECT_THROW(exp(Tensor::vector({1000.0})), NumericError);
  EXPECT_THROW(scale(Tensor::vector({1e308}), 10.0), NumericError);
}

TEST(Softmax, ConstantInputIsUniform) {
  for (double c : {-3.0, 0.0, 17.5}) {
    const Tensor y = softmax(Tensor::vector({c, c, c, c}));
    for (double v : y.data()) EXPECT_EQ(v, 0.25);
  }
}

TEST(Softmax, ClosedFormTwoPoint) {
  const Tensor y = softmax(Tensor::vector({0.0, std::log(3.0)}));
  EXPECT_NEAR(y[0], 0.25, 1e-15);
  EXPECT_NEAR(y[1], 0.75, 1e-15);
}

TEST(Softmax, MaskedPositionsAreExactlyZero) {
  const std::vector<bool> mask{true, false};
  const Tensor y = softmax(Tensor::vector({5, 5}), &mask);
  EXPECT_EQ(y[0], 1.0);
  EXPECT_EQ(y[1], 0.0);
}

TEST(Softmax, AllMaskedIsInvalid) {
  const std::vector<bool> mask{false, false};
  EXPECT_THROW(softmax(Tensor::vector({1, 2}), &mask), InvalidMaskError);
}

TEST(Softmax, SumsToOneAndIsShiftInvariant) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    // Multiples of 2^-10 plus an integer shift keep the shifted logits exact,
    // so max-subtraction recovers identical differences.
    Tensor x({n});
    for (double& v : x.storage()) v = static_cast<double>(static_cast<int>(rng.below(4097)) - 2048) / 1024.0;
    const double shift = static_cast<double>(static_cast<int>(rng.below(201)) - 100);
    Tensor shifted = x;
    for (double& v : shifted.storage()) v += shift;
    const Tensor y = softmax(x);
    double total = 0;
    for (double v : y.data()) total += v;
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_TRUE(bitwise_equal(y, softmax(shifted)));
  }
}

TEST(TensorType, RejectsBadShapes) {
  EXPECT_THROW(Tensor({2, 0}), DimensionError);
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), DimensionError);
}

}  // namespace
}  // namespace minnmt
