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

// Dense loops shared by the autodiff tape and the forward-only runtime.
//
// Every output element is accumulated in a fixed order that does not depend
// on how many rows are processed together, so a row computed inside a batch
// is bit-identical to the same row computed alone. Both execution paths call
// these templates, which is what makes the training-stack decoder and the
// deployment decoder agree to the last bit in 64-bit mode.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <type_traits>

namespace minnmt::kernels {

using std::size_t;

namespace detail {
void gemm_f64(size_t m, size_t k, size_t n, const double* a, const double* b, double* c);
void gemm_f32(size_t m, size_t k, size_t n, const float* a, const float* b, float* c);
}  // namespace detail

/// c[m,n] = a[m,k] * b[k,n], register-tiled and dispatched on the CPU's
/// vector width. Per element the sum still runs over k in order from zero.
template <typename T>
void gemm(size_t m, size_t k, size_t n, const T* a, const T* b, T* c) {
  static_assert(std::is_same_v<T, double> || std::is_same_v<T, float>);
  if constexpr (std::is_same_v<T, double>)
    detail::gemm_f64(m, k, n, a, b, c);
  else
    detail::gemm_f32(m, k, n, a, b, c);
}

/// da[m,k] += g[m,n] * b[k,n]^T
template <typename T>
void gemm_nt_acc(size_t m, size_t n, size_t k, const T* g, const T* b, T* da) {
  for (size_t i = 0; i < m; ++i) {
    const T* gi = g + i * n;
    for (size_t p = 0; p < k; ++p) {
      const T* bp = b + p * n;
      T s = 0;
      for (size_t j = 0; j < n; ++j) s += gi[j] * bp[j];
      da[i * k + p] += s;
    }
  }
}

/// db[k,n] += a[m,k]^T * g[m,n]
template <typename T>
void gemm_tn_acc(size_t m, size_t k, size_t n, const T* a, const T* g, T* db) {
  for (size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    const T* gi = g + i * n;
    for (size_t p = 0; p < k; ++p) {
      const T v = ai[p];
      T* dbp = db + p * n;
      for (size_t j = 0; j < n; ++j) dbp[j] += v * gi[j];
    }
  }
}

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
void add(size_t n, const T* a, const T* b, T* out) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void sub(size_t n, const T* a, const T* b, T* out) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename T>
void mul(size_t n, const T* a, const T* b, T* out) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

/// out[r, :] = a[r, :] + bias for every row.
template <typename T>
void add_row(size_t rows, size_t cols, const T* a, const T* bias, T* out) {
  for (size_t r = 0; r < rows; ++r) {
    const T* ar = a + r * cols;
    T* o = out + r * cols;
    for (size_t j = 0; j < cols; ++j) o[j] = ar[j] + bias[j];
  }
}

template <typename T>
void sigmoid(size_t n, const T* a, T* out) {
  for (size_t i = 0; i < n; ++i) out[i] = sigmoid(a[i]);
}

template <typename T>
void tanh(size_t n, const T* a, T* out) {
  for (size_t i = 0; i < n; ++i) out[i] = std::tanh(a[i]);
}

template <typename T>
void one_minus(size_t n, const T* a, T* out) {
  for (size_t i = 0; i < n; ++i) out[i] = T(1) - a[i];
}

/// Copy columns [begin, end) of a [rows, cols] matrix.
template <typename T>
void slice_cols(size_t rows, size_t cols, size_t begin, size_t end, const T* a, T* out) {
  const size_t w = end - begin;
  for (size_t r = 0; r < rows; ++r) std::copy(a + r * cols + begin, a + r * cols + end, out + r * w);
}

/// out[rows, ca + cb] = [a | b]
template <typename T>
void concat_cols(size_t rows, size_t ca, size_t cb, const T* a, const T* b, T* out) {
  for (size_t r = 0; r < rows; ++r) {
    std::copy(a + r * ca, a + (r + 1) * ca, out + r * (ca + cb));
    std::copy(b + r * cb, b + (r + 1) * cb, out + r * (ca + cb) + ca);
  }
}

/// Masked softmax of one row. mask may be null (all positions kept).
/// Returns false if every position is masked.
template <typename T>
bool softmax_row(size_t n, const T* x, const std::uint8_t* mask, T* out) {
  T max = -std::numeric_limits<T>::infinity();
  bool any = false;
  for (size_t i = 0; i < n; ++i) {
    if (mask && !mask[i]) continue;
    if (!any || x[i] > max) max = x[i];
    any = true;
  }
  if (!any) return false;
  T sum = 0;
  for (size_t i = 0; i < n; ++i) {
    if (mask && !mask[i]) {
      out[i] = 0;
      continue;
    }
    out[i] = std::exp(x[i] - max);
    sum += out[i];
  }
  for (size_t i = 0; i < n; ++i) out[i] /= sum;
  return true;
}

template <typename T>
void log_softmax_row(size_t n, const T* x, T* out) {
  T max = x[0];
  for (size_t i = 1; i < n; ++i) max = std::max(max, x[i]);
  T sum = 0;
  for (size_t i = 0; i < n; ++i) sum += std::exp(x[i] - max);
  const T lse = max + std::log(sum);
  for (size_t i = 0; i < n; ++i) out[i] = x[i] - lse;
}

/// scores[s] = <memory[s, :], query> for s < len.
template <typename T>
void dot_rows(size_t len, size_t dim, const T* memory, const T* query, T* scores) {
  for (size_t s = 0; s < len; ++s) {
    const T* ms = memory + s * dim;
    T acc = 0;
    for (size_t j = 0; j < dim; ++j) acc += ms[j] * query[j];
    scores[s] = acc;
  }
}

/// out[:] = sum over unmasked s of weights[s] * memory[s, :]
template <typename T>
void weighted_sum(size_t len, size_t dim, const T* memory, const T* weights,
                  const std::uint8_t* mask, T* out) {
  std::fill(out, out + dim, T(0));
  for (size_t s = 0; s < len; ++s) {
    if (mask && !mask[s]) continue;
    const T w = weights[s];
    const T* ms = memory + s * dim;
    for (size_t j = 0; j < dim; ++j) out[j] += w * ms[j];
  }
}

template <typename T>
bool all_finite(size_t n, const T* a) {
  for (size_t i = 0; i < n; ++i)
    if (!std::isfinite(a[i])) return false;
  return true;
}

}  // namespace minnmt::kernels
