// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

namespace lrnn {

/// C (MxN) += A (MxK) * B (KxN), all row-major with explicit leading
/// dimensions. C must be initialized by the caller. Single-threaded and
/// deterministic: every C element is one sequential sum over k.
void gemm_acc(int m, int n, int k, const double* a, int lda, const double* b, int ldb,
              double* c, int ldc);

/// C (MxN) += A (MxK) * B^T with B row-major (NxK): rows of A against rows
/// of B. Deterministic for a fixed build (lane-partial sums, fixed order).
void gemm_acc_bt(int m, int n, int k, const double* a, int lda, const double* b, int ldb,
                 double* c, int ldc);

}  // namespace lrnn
