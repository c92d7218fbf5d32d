#pragma once

#include <cstdint>

namespace bd {

/// C = A(M,K) * B(K,N), row-major with leading dimensions. When `accumulate`
/// is false C is overwritten, otherwise added into.
///
/// Every C[i,j] is a fold of std::fma(A[i,k], B[k,j], acc) over ascending k,
/// independent of blocking, so results are bitwise identical to a naive
/// fma loop and stable across tile boundaries.
void gemm_nn(int64_t m, int64_t n, int64_t k,
             const double* a, int64_t lda,
             const double* b, int64_t ldb,
             double* c, int64_t ldc,
             bool accumulate = false);

/// dst(cols, rows) = src(rows, cols)^T. dst must not alias src.
void transpose_copy(int64_t rows, int64_t cols, const double* src, int64_t ld_src,
                    double* dst, int64_t ld_dst);

}  // namespace bd
