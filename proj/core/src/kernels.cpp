// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mambattn/kernels.hpp"

#include <algorithm>

namespace mambattn::kernels {
namespace {

constexpr std::size_t kColumnBlock = 512;
constexpr std::size_t kDepthBlock = 256;

using v4 = double __attribute__((vector_size(32)));

inline v4 load4(const double* p) {
  v4 v;
  __builtin_memcpy(&v, p, sizeof(v));
  return v;
}

inline void store4(double* p, v4 v) { __builtin_memcpy(p, &v, sizeof(v)); }

// C[0..4) x [0..8) += A[0..4) x [p0, p1) * B[p0, p1) x [0..8); each element
// is updated once per p, in order.
inline void micro_4x8(std::size_t p0, std::size_t p1, const double* a, std::size_t lda,
                      const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  v4 c00 = load4(c), c01 = load4(c + 4);
  v4 c10 = load4(c + ldc), c11 = load4(c + ldc + 4);
  v4 c20 = load4(c + 2 * ldc), c21 = load4(c + 2 * ldc + 4);
  v4 c30 = load4(c + 3 * ldc), c31 = load4(c + 3 * ldc + 4);
  for (std::size_t p = p0; p < p1; ++p) {
    const double* brow = b + p * ldb;
    const v4 b0 = load4(brow), b1 = load4(brow + 4);
    const v4 a0 = v4{} + a[p], a1 = v4{} + a[lda + p];
    const v4 a2 = v4{} + a[2 * lda + p], a3 = v4{} + a[3 * lda + p];
    c00 += a0 * b0;
    c01 += a0 * b1;
    c10 += a1 * b0;
    c11 += a1 * b1;
    c20 += a2 * b0;
    c21 += a2 * b1;
    c30 += a3 * b0;
    c31 += a3 * b1;
  }
  store4(c, c00);
  store4(c + 4, c01);
  store4(c + ldc, c10);
  store4(c + ldc + 4, c11);
  store4(c + 2 * ldc, c20);
  store4(c + 2 * ldc + 4, c21);
  store4(c + 3 * ldc, c30);
  store4(c + 3 * ldc + 4, c31);
}

inline void micro_4x4(std::size_t p0, std::size_t p1, const double* a, std::size_t lda,
                      const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  v4 c0 = load4(c), c1 = load4(c + ldc), c2 = load4(c + 2 * ldc), c3 = load4(c + 3 * ldc);
  for (std::size_t p = p0; p < p1; ++p) {
    const v4 bv = load4(b + p * ldb);
    c0 += (v4{} + a[p]) * bv;
    c1 += (v4{} + a[lda + p]) * bv;
    c2 += (v4{} + a[2 * lda + p]) * bv;
    c3 += (v4{} + a[3 * lda + p]) * bv;
  }
  store4(c, c0);
  store4(c + ldc, c1);
  store4(c + 2 * ldc, c2);
  store4(c + 3 * ldc, c3);
}

// One row, four columns.
inline void micro_1x4(std::size_t p0, std::size_t p1, const double* a, const double* b,
                      std::size_t ldb, double* c) {
  v4 acc = load4(c);
  for (std::size_t p = p0; p < p1; ++p) acc += (v4{} + a[p]) * load4(b + p * ldb);
  store4(c, acc);
}

// Scalar edge: rows [i0, i1) x columns [j0, j1).
inline void edge(std::size_t i0, std::size_t i1, std::size_t j0, std::size_t j1,
                 std::size_t p0, std::size_t p1, const double* a, std::size_t lda,
                 const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = i0; i < i1; ++i) {
    double* __restrict ci = c + i * ldc;
    const double* ai = a + i * lda;
    for (std::size_t p = p0; p < p1; ++p) {
      const double s = ai[p];
      const double* __restrict brow = b + p * ldb;
      for (std::size_t j = j0; j < j1; ++j) ci[j] += s * brow[j];
    }
  }
}

}  // namespace

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a,
          std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc, bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, 0.0);
  }
  const std::size_t m4 = m - m % 4;
  for (std::size_t j0 = 0; j0 < n; j0 += kColumnBlock) {
    const std::size_t j1 = std::min(n, j0 + kColumnBlock);
    const std::size_t j8 = j0 + (j1 - j0) / 8 * 8;
    for (std::size_t p0 = 0; p0 < k; p0 += kDepthBlock) {
      const std::size_t p1 = std::min(k, p0 + kDepthBlock);
      for (std::size_t i = 0; i < m4; i += 4) {
        for (std::size_t j = j0; j < j8; j += 8) {
          micro_4x8(p0, p1, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
        }
        std::size_t j = j8;
        if (j + 4 <= j1) {
          micro_4x4(p0, p1, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
          j += 4;
        }
        if (j < j1) edge(i, i + 4, j, j1, p0, p1, a, lda, b, ldb, c, ldc);
      }
      for (std::size_t i = m4; i < m; ++i) {
        std::size_t j = j0;
        for (; j + 4 <= j1; j += 4) micro_1x4(p0, p1, a + i * lda, b + j, ldb, c + i * ldc + j);
        if (j < j1) edge(i, i + 1, j, j1, p0, p1, a, lda, b, ldb, c, ldc);
      }
    }
  }
}

void transpose(const double* src, std::size_t rows, std::size_t cols,
               double* dst) {
  constexpr std::size_t kTile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kTile) {
    const std::size_t r1 = std::min(rows, r0 + kTile);
    for (std::size_t c0 = 0; c0 < cols; c0 += kTile) {
      const std::size_t c1 = std::min(cols, c0 + kTile);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
    }
  }
}

}  // namespace mambattn::kernels
