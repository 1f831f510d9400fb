// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#include "gemm.hpp"

#include <cstddef>

#if defined(__AVX512F__)
#include <immintrin.h>
#define LRNN_GEMM_AVX512 1
#elif defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define LRNN_GEMM_AVX2 1
#endif

namespace lrnn {

namespace {

// Each C element is one sequential FMA chain over k regardless of the tile
// shape, so results do not depend on m/n tiling.

#if LRNN_GEMM_AVX512

// 4x16 microkernel: 8 zmm accumulators, 2 B loads + 4 broadcasts per k step.
inline void micro_4x16(int k, const double* a, int lda, const double* b, int ldb, double* c,
                       int ldc) {
    __m512d c00 = _mm512_setzero_pd(), c01 = _mm512_setzero_pd();
    __m512d c10 = _mm512_setzero_pd(), c11 = _mm512_setzero_pd();
    __m512d c20 = _mm512_setzero_pd(), c21 = _mm512_setzero_pd();
    __m512d c30 = _mm512_setzero_pd(), c31 = _mm512_setzero_pd();
    const double* a0 = a;
    const double* a1 = a + lda;
    const double* a2 = a + 2 * static_cast<std::size_t>(lda);
    const double* a3 = a + 3 * static_cast<std::size_t>(lda);
    for (int kk = 0; kk < k; ++kk) {
        const double* brow = b + static_cast<std::size_t>(kk) * ldb;
        const __m512d b0 = _mm512_loadu_pd(brow);
        const __m512d b1 = _mm512_loadu_pd(brow + 8);
        __m512d av;
        av = _mm512_set1_pd(a0[kk]);
        c00 = _mm512_fmadd_pd(av, b0, c00);
        c01 = _mm512_fmadd_pd(av, b1, c01);
        av = _mm512_set1_pd(a1[kk]);
        c10 = _mm512_fmadd_pd(av, b0, c10);
        c11 = _mm512_fmadd_pd(av, b1, c11);
        av = _mm512_set1_pd(a2[kk]);
        c20 = _mm512_fmadd_pd(av, b0, c20);
        c21 = _mm512_fmadd_pd(av, b1, c21);
        av = _mm512_set1_pd(a3[kk]);
        c30 = _mm512_fmadd_pd(av, b0, c30);
        c31 = _mm512_fmadd_pd(av, b1, c31);
    }
    double* c0 = c;
    double* c1 = c + ldc;
    double* c2 = c + 2 * static_cast<std::size_t>(ldc);
    double* c3 = c + 3 * static_cast<std::size_t>(ldc);
    _mm512_storeu_pd(c0, _mm512_add_pd(_mm512_loadu_pd(c0), c00));
    _mm512_storeu_pd(c0 + 8, _mm512_add_pd(_mm512_loadu_pd(c0 + 8), c01));
    _mm512_storeu_pd(c1, _mm512_add_pd(_mm512_loadu_pd(c1), c10));
    _mm512_storeu_pd(c1 + 8, _mm512_add_pd(_mm512_loadu_pd(c1 + 8), c11));
    _mm512_storeu_pd(c2, _mm512_add_pd(_mm512_loadu_pd(c2), c20));
    _mm512_storeu_pd(c2 + 8, _mm512_add_pd(_mm512_loadu_pd(c2 + 8), c21));
    _mm512_storeu_pd(c3, _mm512_add_pd(_mm512_loadu_pd(c3), c30));
    _mm512_storeu_pd(c3 + 8, _mm512_add_pd(_mm512_loadu_pd(c3 + 8), c31));
}

inline void micro_1x16(int k, const double* a, const double* b, int ldb, double* c) {
    __m512d c00 = _mm512_setzero_pd(), c01 = _mm512_setzero_pd();
    for (int kk = 0; kk < k; ++kk) {
        const double* brow = b + static_cast<std::size_t>(kk) * ldb;
        const __m512d av = _mm512_set1_pd(a[kk]);
        c00 = _mm512_fmadd_pd(av, _mm512_loadu_pd(brow), c00);
        c01 = _mm512_fmadd_pd(av, _mm512_loadu_pd(brow + 8), c01);
    }
    _mm512_storeu_pd(c, _mm512_add_pd(_mm512_loadu_pd(c), c00));
    _mm512_storeu_pd(c + 8, _mm512_add_pd(_mm512_loadu_pd(c + 8), c01));
}

inline void micro_4x8(int k, const double* a, int lda, const double* b, int ldb, double* c,
                      int ldc) {
    __m512d c0 = _mm512_setzero_pd(), c1 = _mm512_setzero_pd();
    __m512d c2 = _mm512_setzero_pd(), c3 = _mm512_setzero_pd();
    const double* a0 = a;
    const double* a1 = a + lda;
    const double* a2 = a + 2 * static_cast<std::size_t>(lda);
    const double* a3 = a + 3 * static_cast<std::size_t>(lda);
    for (int kk = 0; kk < k; ++kk) {
        const __m512d b0 = _mm512_loadu_pd(b + static_cast<std::size_t>(kk) * ldb);
        c0 = _mm512_fmadd_pd(_mm512_set1_pd(a0[kk]), b0, c0);
        c1 = _mm512_fmadd_pd(_mm512_set1_pd(a1[kk]), b0, c1);
        c2 = _mm512_fmadd_pd(_mm512_set1_pd(a2[kk]), b0, c2);
        c3 = _mm512_fmadd_pd(_mm512_set1_pd(a3[kk]), b0, c3);
    }
    double* cr = c;
    _mm512_storeu_pd(cr, _mm512_add_pd(_mm512_loadu_pd(cr), c0));
    cr = c + ldc;
    _mm512_storeu_pd(cr, _mm512_add_pd(_mm512_loadu_pd(cr), c1));
    cr = c + 2 * static_cast<std::size_t>(ldc);
    _mm512_storeu_pd(cr, _mm512_add_pd(_mm512_loadu_pd(cr), c2));
    cr = c + 3 * static_cast<std::size_t>(ldc);
    _mm512_storeu_pd(cr, _mm512_add_pd(_mm512_loadu_pd(cr), c3));
}

inline void micro_1x8(int k, const double* a, const double* b, int ldb, double* c) {
    __m512d acc = _mm512_setzero_pd();
    for (int kk = 0; kk < k; ++kk) {
        acc = _mm512_fmadd_pd(_mm512_set1_pd(a[kk]),
                              _mm512_loadu_pd(b + static_cast<std::size_t>(kk) * ldb), acc);
    }
    _mm512_storeu_pd(c, _mm512_add_pd(_mm512_loadu_pd(c), acc));
}

#elif LRNN_GEMM_AVX2

inline void micro_4x8(int k, const double* a, int lda, const double* b, int ldb, double* c,
                      int ldc) {
    __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
    __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
    __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
    __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
    const double* a0 = a;
    const double* a1 = a + lda;
    const double* a2 = a + 2 * static_cast<std::size_t>(lda);
    const double* a3 = a + 3 * static_cast<std::size_t>(lda);
    for (int kk = 0; kk < k; ++kk) {
        const double* brow = b + static_cast<std::size_t>(kk) * ldb;
        const __m256d b0 = _mm256_loadu_pd(brow);
        const __m256d b1 = _mm256_loadu_pd(brow + 4);
        __m256d av;
        av = _mm256_set1_pd(a0[kk]);
        c00 = _mm256_fmadd_pd(av, b0, c00);
        c01 = _mm256_fmadd_pd(av, b1, c01);
        av = _mm256_set1_pd(a1[kk]);
        c10 = _mm256_fmadd_pd(av, b0, c10);
        c11 = _mm256_fmadd_pd(av, b1, c11);
        av = _mm256_set1_pd(a2[kk]);
        c20 = _mm256_fmadd_pd(av, b0, c20);
        c21 = _mm256_fmadd_pd(av, b1, c21);
        av = _mm256_set1_pd(a3[kk]);
        c30 = _mm256_fmadd_pd(av, b0, c30);
        c31 = _mm256_fmadd_pd(av, b1, c31);
    }
    double* cr = c;
    _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), c00));
    _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), c01));
    cr = c + ldc;
    _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), c10));
    _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), c11));
    cr = c + 2 * static_cast<std::size_t>(ldc);
    _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), c20));
    _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), c21));
    cr = c + 3 * static_cast<std::size_t>(ldc);
    _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), c30));
    _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), c31));
}

inline void micro_1x8(int k, const double* a, const double* b, int ldb, double* c) {
    __m256d c0 = _mm256_setzero_pd(), c1 = _mm256_setzero_pd();
    for (int kk = 0; kk < k; ++kk) {
        const double* brow = b + static_cast<std::size_t>(kk) * ldb;
        const __m256d av = _mm256_set1_pd(a[kk]);
        c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow), c0);
        c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 4), c1);
    }
    _mm256_storeu_pd(c, _mm256_add_pd(_mm256_loadu_pd(c), c0));
    _mm256_storeu_pd(c + 4, _mm256_add_pd(_mm256_loadu_pd(c + 4), c1));
}

#endif

inline void micro_scalar(int mr, int nr, int k, const double* a, int lda, const double* b,
                         int ldb, double* c, int ldc) {
    for (int r = 0; r < mr; ++r) {
        for (int j = 0; j < nr; ++j) {
            double acc = 0.0;
            const double* arow = a + static_cast<std::size_t>(r) * lda;
            const double* bp = b + j;
            for (int kk = 0; kk < k; ++kk) {
                acc += arow[kk] * bp[static_cast<std::size_t>(kk) * ldb];
            }
            c[static_cast<std::size_t>(r) * ldc + j] += acc;
        }
    }
}

}  // namespace

namespace {

#if LRNN_GEMM_AVX512

// rows of A dotted against rows of B; 4x4 tile of 8-lane partial sums
inline void micro_bt_4x4(int k, const double* a, int lda, const double* b, int ldb, double* c,
                         int ldc) {
    __m512d acc[4][4];
    for (int r = 0; r < 4; ++r) {
        for (int j = 0; j < 4; ++j) {
            acc[r][j] = _mm512_setzero_pd();
        }
    }
    int kk = 0;
    for (; kk + 8 <= k; kk += 8) {
        __m512d av[4], bv[4];
        for (int r = 0; r < 4; ++r) {
            av[r] = _mm512_loadu_pd(a + static_cast<std::size_t>(r) * lda + kk);
        }
        for (int j = 0; j < 4; ++j) {
            bv[j] = _mm512_loadu_pd(b + static_cast<std::size_t>(j) * ldb + kk);
        }
        for (int r = 0; r < 4; ++r) {
            for (int j = 0; j < 4; ++j) {
                acc[r][j] = _mm512_fmadd_pd(av[r], bv[j], acc[r][j]);
            }
        }
    }
    for (int r = 0; r < 4; ++r) {
        for (int j = 0; j < 4; ++j) {
            double s = _mm512_reduce_add_pd(acc[r][j]);
            for (int t = kk; t < k; ++t) {
                s += a[static_cast<std::size_t>(r) * lda + t] *
                     b[static_cast<std::size_t>(j) * ldb + t];
            }
            c[static_cast<std::size_t>(r) * ldc + j] += s;
        }
    }
}

#endif

inline void bt_scalar(int m, int n, int k, const double* a, int lda, const double* b, int ldb,
                      double* c, int ldc) {
    for (int r = 0; r < m; ++r) {
        const double* arow = a + static_cast<std::size_t>(r) * lda;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + static_cast<std::size_t>(j) * ldb;
            double s = 0.0;
            for (int t = 0; t < k; ++t) {
                s += arow[t] * brow[t];
            }
            c[static_cast<std::size_t>(r) * ldc + j] += s;
        }
    }
}

}  // namespace

void gemm_acc_bt(int m, int n, int k, const double* a, int lda, const double* b, int ldb,
                 double* c, int ldc) {
#if LRNN_GEMM_AVX512
    int i = 0;
    for (; i + 4 <= m; i += 4) {
        int j = 0;
        for (; j + 4 <= n; j += 4) {
            micro_bt_4x4(k, a + static_cast<std::size_t>(i) * lda, lda,
                         b + static_cast<std::size_t>(j) * ldb, ldb,
                         c + static_cast<std::size_t>(i) * ldc + j, ldc);
        }
        if (j < n) {
            bt_scalar(4, n - j, k, a + static_cast<std::size_t>(i) * lda, lda,
                      b + static_cast<std::size_t>(j) * ldb, ldb,
                      c + static_cast<std::size_t>(i) * ldc + j, ldc);
        }
    }
    if (i < m) {
        bt_scalar(m - i, n, k, a + static_cast<std::size_t>(i) * lda, lda, b, ldb,
                  c + static_cast<std::size_t>(i) * ldc, ldc);
    }
#else
    bt_scalar(m, n, k, a, lda, b, ldb, c, ldc);
#endif
}

void gemm_acc(int m, int n, int k, const double* a, int lda, const double* b, int ldb,
              double* c, int ldc) {
    int j = 0;
#if LRNN_GEMM_AVX512
    for (; j + 16 <= n; j += 16) {
        int i = 0;
        for (; i + 4 <= m; i += 4) {
            micro_4x16(k, a + static_cast<std::size_t>(i) * lda, lda, b + j, ldb,
                       c + static_cast<std::size_t>(i) * ldc + j, ldc);
        }
        for (; i < m; ++i) {
            micro_1x16(k, a + static_cast<std::size_t>(i) * lda, b + j, ldb,
                       c + static_cast<std::size_t>(i) * ldc + j);
        }
    }
    for (; j + 8 <= n; j += 8) {
        int i = 0;
        for (; i + 4 <= m; i += 4) {
            micro_4x8(k, a + static_cast<std::size_t>(i) * lda, lda, b + j, ldb,
                      c + static_cast<std::size_t>(i) * ldc + j, ldc);
        }
        for (; i < m; ++i) {
            micro_1x8(k, a + static_cast<std::size_t>(i) * lda, b + j, ldb,
                      c + static_cast<std::size_t>(i) * ldc + j);
        }
    }
#elif LRNN_GEMM_AVX2
    for (; j + 8 <= n; j += 8) {
        int i = 0;
        for (; i + 4 <= m; i += 4) {
            micro_4x8(k, a + static_cast<std::size_t>(i) * lda, lda, b + j, ldb,
                      c + static_cast<std::size_t>(i) * ldc + j, ldc);
        }
        for (; i < m; ++i) {
            micro_1x8(k, a + static_cast<std::size_t>(i) * lda, b + j, ldb,
                      c + static_cast<std::size_t>(i) * ldc + j);
        }
    }
#endif
    if (n - j > 0) {
        micro_scalar(m, n - j, k, a, lda, b + j, ldb, c + j, ldc);
    }
}

}  // namespace lrnn
