#include "bd/gemm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#if defined(__AVX512F__) || defined(__AVX2__)
#include <immintrin.h>
#endif

namespace bd {

namespace {

// Scalar tile, the reference path: ascending-k fma fold per element. The
// vector kernels below compute the exact same fold lane-by-lane, so every
// C[i,j] is bitwise identical whichever path handles it.
inline void edge_tile(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda,
                      const double* b, int64_t ldb, double* c, int64_t ldc, bool first) {
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            double acc = first ? 0.0 : c[i * ldc + j];
            for (int64_t p = 0; p < k; ++p) acc = std::fma(a[i * lda + p], b[p * ldb + j], acc);
            c[i * ldc + j] = acc;
        }
    }
}

#if defined(__AVX512F__)

constexpr int64_t kNr = 16;  // two zmm lanes

// Sweeps one row panel of MR rows across all full column tiles, k ascending.
// `first` starts the accumulators at zero instead of loading C.
template <int MR>
void panel_rows(int64_t k, int64_t nb, const double* a, int64_t lda, const double* b, int64_t ldb,
                double* c, int64_t ldc, bool first) {
    for (int64_t j = 0; j < nb; j += kNr) {
        const double* bj = b + j;
        double* cj = c + j;
        __m512d acc0[MR], acc1[MR];
        for (int i = 0; i < MR; ++i) {
            acc0[i] = first ? _mm512_setzero_pd() : _mm512_loadu_pd(cj + i * ldc);
            acc1[i] = first ? _mm512_setzero_pd() : _mm512_loadu_pd(cj + i * ldc + 8);
        }
        for (int64_t p = 0; p < k; ++p) {
            __m512d b0 = _mm512_loadu_pd(bj + p * ldb);
            __m512d b1 = _mm512_loadu_pd(bj + p * ldb + 8);
            for (int i = 0; i < MR; ++i) {
                __m512d av = _mm512_set1_pd(a[i * lda + p]);
                acc0[i] = _mm512_fmadd_pd(av, b0, acc0[i]);
                acc1[i] = _mm512_fmadd_pd(av, b1, acc1[i]);
            }
        }
        for (int i = 0; i < MR; ++i) {
            _mm512_storeu_pd(cj + i * ldc, acc0[i]);
            _mm512_storeu_pd(cj + i * ldc + 8, acc1[i]);
        }
    }
}

// Masked remainder columns (rem < 16): zeroed dead lanes never reach C.
template <int MR>
void panel_tail(int64_t k, int64_t rem, const double* a, int64_t lda, const double* b, int64_t ldb,
                double* c, int64_t ldc, bool first) {
    __mmask8 m0 = static_cast<__mmask8>((1u << std::min<int64_t>(rem, 8)) - 1);
    __mmask8 m1 = rem > 8 ? static_cast<__mmask8>((1u << (rem - 8)) - 1) : 0;
    __m512d acc0[MR], acc1[MR];
    for (int i = 0; i < MR; ++i) {
        acc0[i] = first ? _mm512_setzero_pd() : _mm512_maskz_loadu_pd(m0, c + i * ldc);
        acc1[i] = (first || !m1) ? _mm512_setzero_pd() : _mm512_maskz_loadu_pd(m1, c + i * ldc + 8);
    }
    for (int64_t p = 0; p < k; ++p) {
        __m512d b0 = _mm512_maskz_loadu_pd(m0, b + p * ldb);
        __m512d b1 = m1 ? _mm512_maskz_loadu_pd(m1, b + p * ldb + 8) : _mm512_setzero_pd();
        for (int i = 0; i < MR; ++i) {
            __m512d av = _mm512_set1_pd(a[i * lda + p]);
            acc0[i] = _mm512_fmadd_pd(av, b0, acc0[i]);
            acc1[i] = _mm512_fmadd_pd(av, b1, acc1[i]);
        }
    }
    for (int i = 0; i < MR; ++i) {
        _mm512_mask_storeu_pd(c + i * ldc, m0, acc0[i]);
        if (m1) _mm512_mask_storeu_pd(c + i * ldc + 8, m1, acc1[i]);
    }
}

#elif defined(__AVX2__)

constexpr int64_t kNr = 8;  // two ymm lanes

template <int MR>
void panel_rows(int64_t k, int64_t nb, const double* a, int64_t lda, const double* b, int64_t ldb,
                double* c, int64_t ldc, bool first) {
    for (int64_t j = 0; j < nb; j += kNr) {
        const double* bj = b + j;
        double* cj = c + j;
        __m256d acc0[MR], acc1[MR];
        for (int i = 0; i < MR; ++i) {
            acc0[i] = first ? _mm256_setzero_pd() : _mm256_loadu_pd(cj + i * ldc);
            acc1[i] = first ? _mm256_setzero_pd() : _mm256_loadu_pd(cj + i * ldc + 4);
        }
        for (int64_t p = 0; p < k; ++p) {
            __m256d b0 = _mm256_loadu_pd(bj + p * ldb);
            __m256d b1 = _mm256_loadu_pd(bj + p * ldb + 4);
            for (int i = 0; i < MR; ++i) {
                __m256d av = _mm256_set1_pd(a[i * lda + p]);
                acc0[i] = _mm256_fmadd_pd(av, b0, acc0[i]);
                acc1[i] = _mm256_fmadd_pd(av, b1, acc1[i]);
            }
        }
        for (int i = 0; i < MR; ++i) {
            _mm256_storeu_pd(cj + i * ldc, acc0[i]);
            _mm256_storeu_pd(cj + i * ldc + 4, acc1[i]);
        }
    }
}

template <int MR>
void panel_tail(int64_t k, int64_t rem, const double* a, int64_t lda, const double* b, int64_t ldb,
                double* c, int64_t ldc, bool first) {
    edge_tile(MR, rem, k, a, lda, b, ldb, c, ldc, first);
}

#else

constexpr int64_t kNr = 8;

template <int MR>
void panel_rows(int64_t k, int64_t nb, const double* a, int64_t lda, const double* b, int64_t ldb,
                double* c, int64_t ldc, bool first) {
    for (int64_t j = 0; j < nb; j += kNr)
        edge_tile(MR, kNr, k, a, lda, b + j, ldb, c + j, ldc, first);
}

template <int MR>
void panel_tail(int64_t k, int64_t rem, const double* a, int64_t lda, const double* b, int64_t ldb,
                double* c, int64_t ldc, bool first) {
    edge_tile(MR, rem, k, a, lda, b, ldb, c, ldc, first);
}

#endif

constexpr int64_t kMr = 6;

inline void block_nn(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda,
                     const double* b, int64_t ldb, double* c, int64_t ldc, bool first) {
    int64_t nb = n - n % kNr;
    int64_t rem = n - nb;
    for (int64_t i = 0; i < m; i += kMr) {
        // full-height tiles even for the row remainder keep skinny matrices
        // (conv layers with few output channels) on the vector path
        int64_t rows = std::min(kMr, m - i);
        const double* ai = a + i * lda;
        double* ci = c + i * ldc;
        switch (rows) {
            case 1:
                panel_rows<1>(k, nb, ai, lda, b, ldb, ci, ldc, first);
                if (rem) panel_tail<1>(k, rem, ai, lda, b + nb, ldb, ci + nb, ldc, first);
                break;
            case 2:
                panel_rows<2>(k, nb, ai, lda, b, ldb, ci, ldc, first);
                if (rem) panel_tail<2>(k, rem, ai, lda, b + nb, ldb, ci + nb, ldc, first);
                break;
            case 3:
                panel_rows<3>(k, nb, ai, lda, b, ldb, ci, ldc, first);
                if (rem) panel_tail<3>(k, rem, ai, lda, b + nb, ldb, ci + nb, ldc, first);
                break;
            case 4:
                panel_rows<4>(k, nb, ai, lda, b, ldb, ci, ldc, first);
                if (rem) panel_tail<4>(k, rem, ai, lda, b + nb, ldb, ci + nb, ldc, first);
                break;
            case 5:
                panel_rows<5>(k, nb, ai, lda, b, ldb, ci, ldc, first);
                if (rem) panel_tail<5>(k, rem, ai, lda, b + nb, ldb, ci + nb, ldc, first);
                break;
            default:
                panel_rows<6>(k, nb, ai, lda, b, ldb, ci, ldc, first);
                if (rem) panel_tail<6>(k, rem, ai, lda, b + nb, ldb, ci + nb, ldc, first);
                break;
        }
    }
}

}  // namespace

void gemm_nn(int64_t m, int64_t n, int64_t k,
             const double* a, int64_t lda,
             const double* b, int64_t ldb,
             double* c, int64_t ldc,
             bool accumulate) {
    if (k == 0) {
        if (!accumulate)
            for (int64_t i = 0; i < m; ++i)
                std::memset(c + i * ldc, 0, static_cast<size_t>(n) * sizeof(double));
        return;
    }
    // Block over k to keep the B panel in L2. Splitting k does not reorder
    // the fold: each panel resumes the same accumulator in memory.
    constexpr int64_t kKc = 512;
    for (int64_t p0 = 0; p0 < k; p0 += kKc) {
        int64_t kc = std::min(kKc, k - p0);
        block_nn(m, n, kc, a + p0, lda, b + p0 * ldb, ldb, c, ldc, p0 == 0 && !accumulate);
    }
}

void transpose_copy(int64_t rows, int64_t cols, const double* src, int64_t ld_src,
                    double* dst, int64_t ld_dst) {
    constexpr int64_t kB = 32;
    for (int64_t i0 = 0; i0 < rows; i0 += kB) {
        int64_t i1 = std::min(i0 + kB, rows);
        for (int64_t j0 = 0; j0 < cols; j0 += kB) {
            int64_t j1 = std::min(j0 + kB, cols);
            for (int64_t i = i0; i < i1; ++i)
                for (int64_t j = j0; j < j1; ++j) dst[j * ld_dst + i] = src[i * ld_src + j];
        }
    }
}

}  // namespace bd
