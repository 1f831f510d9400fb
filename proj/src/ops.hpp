// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "tape.hpp"
#include "tensor.hpp"

namespace lrnn {

struct Pad2 {
    int h = 0;
    int w = 0;
};

/// Grouped dilated 2-D convolution parameters. groups == c_in == c_out
/// encodes the depthwise case; 1x1/3x1/1x3 kernels cover the factorized and
/// pointwise cases.
struct ConvParams {
    Tensor4 weight;               // (c_out, c_in/groups, kh, kw)
    std::optional<Tensor4> bias;  // (1, c_out, 1, 1)
    int stride_h = 1;
    int stride_w = 1;
    int dilation_h = 1;
    int dilation_w = 1;
    int groups = 1;
};

struct NormParams {
    Tensor4 gamma;  // (1, c, 1, 1)
    Tensor4 beta;   // (1, c, 1, 1)
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double epsilon = 1e-5;
    double momentum = 0.1;
};

/// gamma = 1, beta = 0, running stats (0, 1).
NormParams make_norm(int c);

/// "Same" padding for a dilated kernel axis: dilation * (k - 1) / 2.
inline int same_pad(int k, int dilation) { return dilation * (k - 1) / 2; }

Shape4 conv2d_out_shape(const Shape4& x, const ConvParams& p, Pad2 pad);

Tensor4 conv2d(Tape* tape, const Tensor4& x, const ConvParams& p, Pad2 pad);
std::pair<Tensor4, Tensor4> channel_split(Tape* tape, const Tensor4& x);
Tensor4 concat_channels(Tape* tape, const Tensor4& a, const Tensor4& b);
Tensor4 channel_shuffle(Tape* tape, const Tensor4& x, int groups);
Tensor4 batch_norm(Tape* tape, const Tensor4& x, NormParams& p, bool training);
Tensor4 relu(Tape* tape, const Tensor4& x);
/// 2x2 window maximum with stride 2; odd trailing row/col see -inf padding.
Tensor4 max_pool2d(Tape* tape, const Tensor4& x);
/// align-corners-false bilinear interpolation to (h*factor, w*factor).
Tensor4 upsample_bilinear(Tape* tape, const Tensor4& x, int factor);
Tensor4 add(Tape* tape, const Tensor4& a, const Tensor4& b);
/// Scalar (1,1,1,1) sum of all elements.
Tensor4 sum_all(Tape* tape, const Tensor4& x);

/// Global compute-thread count used by the heavy ops. Partitioning is over
/// disjoint output slices, so results are bitwise independent of the value.
void set_num_threads(int threads);
int num_threads();

}  // namespace lrnn
