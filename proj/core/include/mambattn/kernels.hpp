// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>

namespace mambattn::kernels {

/// C(m x n) = A(m x k) * B(k x n), or C += A*B when `accumulate` is set.
///
/// Every output element is summed over k in ascending order starting from
/// its initial value, independent of m, n and blocking. Results are therefore
/// bit-identical when the same row/column is computed as part of a larger or
/// smaller product.
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a,
          std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc, bool accumulate);

/// dst(cols x rows) = src(rows x cols)^T
void transpose(const double* src, std::size_t rows, std::size_t cols,
               double* dst);

}  // namespace mambattn::kernels
