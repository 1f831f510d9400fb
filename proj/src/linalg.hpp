// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "tensor.hpp"

namespace lrnn {

/// Dense row-major matrix used by the attention math and its oracles.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}
    Mat(int r, int c, std::vector<double> data) : rows(r), cols(c), v(std::move(data)) {}

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    double* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
};

Mat matmul(const Mat& a, const Mat& b);
Mat transposed(const Mat& a);
double frobenius(const Mat& a);

double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& a);
/// |cos angle| helper used throughout the key-fidelity checks.
double abs_cosine(const std::vector<double>& a, const std::vector<double>& b);

enum class SignFix {
    kNone,
    kLargestAbsPositive,  // flip so the largest-|.| component is positive; ties -> lowest index
};

/// One dominant-left-singular-vector estimate. Per iteration:
///   u <- u/|u|, v <- A^T u, v <- v/|v|, u <- A v
/// followed by a final normalization and the sign rule. Any intermediate
/// norm below zero_tol yields the zero vector (degenerate region signal).
std::vector<double> power_iteration(const Mat& a, int iters, std::vector<double> u0,
                                    double zero_tol, SignFix fix);

/// Same loop with every intermediate saved, for exact unrolled backprop.
struct PowerTrace {
    bool degenerate = false;
    double sign = 1.0;
    std::vector<std::vector<double>> a_hat;   // normalized u at loop head, per iter
    std::vector<std::vector<double>> b_hat;   // normalized A^T u, per iter
    std::vector<std::vector<double>> u_next;  // A b_hat, per iter
    std::vector<double> n_u;                  // |u| at loop head, per iter
    std::vector<double> n_w;                  // |A^T u|, per iter
    double n_final = 0.0;                     // |u_T|
    std::vector<double> key;                  // sign-fixed unit result (or zeros)
};
PowerTrace power_iteration_traced(const Mat& a, int iters, const std::vector<double>& u0,
                                  double zero_tol, SignFix fix);

/// Reverse-mode of power_iteration_traced: given d(key), accumulate d(A).
/// No-op for degenerate traces.
void power_iteration_backward(const Mat& a, const PowerTrace& tr,
                              const std::vector<double>& dkey, Mat& da);

struct SVDResult {
    std::vector<double> sigma;  // descending
    Mat u;                      // m x k, column i = u_i
    Mat v;                      // n x k, column i = v_i
};

/// Full (thin) SVD by one-sided Jacobi rotations. Test-scale oracle; not in
/// any runtime path.
SVDResult svd_oracle(const Mat& a);

/// Sum of the first k singular triplets.
Mat rank_k_approx(const SVDResult& s, int k);

/// O = bank * (bank^T * q): dot-product attention with the bank supplying
/// both Keys and Values, no normalization.
Mat reduced_nonlocal(const Mat& q, const Mat& bank);

enum class Normalizer { kNone, kSoftmax, kMean };

/// Query-Key-Value aggregation with dot-product similarity and a selectable
/// normalizer; reference/oracle operation.
Mat standard_nonlocal(const Mat& q, const Mat& k, const Mat& v, Normalizer normalizer);

}  // namespace lrnn
