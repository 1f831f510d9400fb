// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ops.hpp"
#include "svn.hpp"
#include "tape.hpp"
#include "tensor.hpp"

namespace lrnn {

/// Factorized convolution block: split-group 3x1/1x3 full-channel convs for
/// short-range features, depthwise dilated 3x3 + pointwise 1x1 for
/// long-range, residual add, channel shuffle.
struct FCBParams {
    ConvParams g1_conv31, g1_conv13;  // first channel half
    ConvParams g2_conv31, g2_conv13;  // second channel half
    NormParams g1_norm, g2_norm;      // after each half's 1x3
    ConvParams dw_conv;               // depthwise 3x3, dilation R
    NormParams dw_norm;
    ConvParams pw_conv;  // 1x1, C -> C
    NormParams pw_norm;
    int dilation = 1;
    int shuffle_groups = 2;
};

Tensor4 fcb_forward(Tape* tape, const Tensor4& x, FCBParams& p, bool training);

/// ENet-style transition: concat(3x3 stride-2 conv with c_out - c_in
/// filters, 2x2 max pool), then norm and relu.
struct DownsampleParams {
    ConvParams conv;
    NormParams norm;
};

Tensor4 downsample_unit(Tape* tape, const Tensor4& x, DownsampleParams& p, bool training);

FCBParams make_fcb(int channels, int dilation, Rng& rng);
DownsampleParams make_downsample(int c_in, int c_out, Rng& rng);
ConvParams make_conv(int c_out, int c_in, int kh, int kw, int groups, int stride, int dilation,
                     Rng& rng, bool with_bias = true);

}  // namespace lrnn
