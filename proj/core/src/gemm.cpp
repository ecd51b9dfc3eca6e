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

#include <cstring>

#include "minnmt/kernels.hpp"

namespace minnmt::kernels::detail {

namespace {

// One 64-byte vector register worth of T.
template <typename T>
using Vec [[gnu::vector_size(64)]] = T;

// c[MR, NV * lanes] = a[MR, k] * b[k, NV * lanes] with accumulators held in
// registers. Each element is still a sum over p in order, starting from 0.
template <typename T, std::size_t MR, std::size_t NV>
[[gnu::always_inline]] inline void tile(std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  constexpr std::size_t L = 64 / sizeof(T);
  Vec<T> acc[MR][NV];
  #pragma GCC unroll 8
  for (std::size_t r = 0; r < MR; ++r)
    #pragma GCC unroll 8
    for (std::size_t v = 0; v < NV; ++v) acc[r][v] = Vec<T>{};
  for (std::size_t p = 0; p < k; ++p) {
    Vec<T> bv[NV];
    #pragma GCC unroll 8
    for (std::size_t v = 0; v < NV; ++v) std::memcpy(&bv[v], b + p * n + v * L, sizeof bv[v]);
    #pragma GCC unroll 8
    for (std::size_t r = 0; r < MR; ++r) {
      const T av = a[r * k + p];
      #pragma GCC unroll 8
      for (std::size_t v = 0; v < NV; ++v) acc[r][v] += av * bv[v];
    }
  }
  #pragma GCC unroll 8
  for (std::size_t r = 0; r < MR; ++r)
    #pragma GCC unroll 8
    for (std::size_t v = 0; v < NV; ++v) std::memcpy(c + r * n + v * L, &acc[r][v], sizeof acc[r][v]);
}

// Columns [j, n) of rows [0, rows) one element at a time.
template <typename T>
[[gnu::always_inline]] inline void scalar_cols(std::size_t rows, std::size_t k, std::size_t n, std::size_t j,
                                               const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < rows; ++i) {
    T* ci = c + i * n;
    std::fill(ci + j, ci + n, T(0));
    const T* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T v = ai[p];
      const T* bp = b + p * n;
      for (std::size_t q = j; q < n; ++q) ci[q] += v * bp[q];
    }
  }
}

template <typename T>
[[gnu::always_inline]] inline void body(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  constexpr std::size_t L = 64 / sizeof(T);
  // Blocks of 8 and 4 rows sweep each column panel while it sits in L1.
  const std::size_t blocked = m - m % 4;
  std::size_t j = 0;
  for (; j + 2 * L <= n; j += 2 * L) {
    std::size_t i = 0;
    for (; i + 8 <= blocked; i += 8) tile<T, 8, 2>(k, n, a + i * k, b + j, c + i * n + j);
    for (; i < blocked; i += 4) tile<T, 4, 2>(k, n, a + i * k, b + j, c + i * n + j);
  }
  for (; j + L <= n; j += L)
    for (std::size_t i = 0; i < blocked; i += 4) tile<T, 4, 1>(k, n, a + i * k, b + j, c + i * n + j);
  scalar_cols(blocked, k, n, j, a, b, c);
  // Leftover rows use wider panels to keep enough independent sums in flight.
  for (std::size_t i = blocked; i < m; ++i) {
    const T* ai = a + i * k;
    T* ci = c + i * n;
    std::size_t q = 0;
    for (; q + 4 * L <= n; q += 4 * L) tile<T, 1, 4>(k, n, ai, b + q, ci + q);
    for (; q + L <= n; q += L) tile<T, 1, 1>(k, n, ai, b + q, ci + q);
    scalar_cols(1, k, n, q, ai, b, ci);
  }
}

}  // namespace

[[gnu::target_clones("avx512f", "avx2", "default")]]
void gemm_f64(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
  body(m, k, n, a, b, c);
}

[[gnu::target_clones("avx512f", "avx2", "default")]]
void gemm_f32(std::size_t m, std::size_t k, std::size_t n, const float* a, const float* b, float* c) {
  body(m, k, n, a, b, c);
}

}  // namespace minnmt::kernels::detail
