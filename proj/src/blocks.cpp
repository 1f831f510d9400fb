// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#include "blocks.hpp"

#include <cmath>

namespace lrnn {

ConvParams make_conv(int c_out, int c_in, int kh, int kw, int groups, int stride, int dilation,
                     Rng& rng, bool with_bias) {
    ConvParams p;
    const int cpg = c_in / groups;
    const double bound = std::sqrt(6.0 / (static_cast<double>(cpg) * kh * kw));
    p.weight = uniform_tensor({c_out, cpg, kh, kw}, rng, -bound, bound);
    if (with_bias) {
        p.bias = Tensor4::zeros({1, c_out, 1, 1});
    }
    p.stride_h = p.stride_w = stride;
    p.dilation_h = dilation;
    p.dilation_w = dilation;
    p.groups = groups;
    return p;
}

FCBParams make_fcb(int channels, int dilation, Rng& rng) {
    if (channels % 2 != 0) {
        throw ConfigError("fcb: channel count must be even");
    }
    const int half = channels / 2;
    FCBParams p;
    p.g1_conv31 = make_conv(half, half, 3, 1, 1, 1, 1, rng);
    p.g1_conv13 = make_conv(half, half, 1, 3, 1, 1, 1, rng, /*with_bias=*/false);
    p.g2_conv31 = make_conv(half, half, 3, 1, 1, 1, 1, rng);
    p.g2_conv13 = make_conv(half, half, 1, 3, 1, 1, 1, rng, /*with_bias=*/false);
    p.g1_norm = make_norm(half);
    p.g2_norm = make_norm(half);
    p.dw_conv = make_conv(channels, channels, 3, 3, channels, 1, dilation, rng, /*with_bias=*/false);
    p.dw_norm = make_norm(channels);
    p.pw_conv = make_conv(channels, channels, 1, 1, 1, 1, 1, rng, /*with_bias=*/false);
    p.pw_norm = make_norm(channels);
    p.dilation = dilation;
    return p;
}

Tensor4 fcb_forward(Tape* tape, const Tensor4& x, FCBParams& p, bool training) {
    if (x.c() != p.pw_conv.weight.n()) {
        throw ConfigError("fcb_forward: input has " + std::to_string(x.c()) +
                          " channels, block built for " +
                          std::to_string(p.pw_conv.weight.n()));
    }
    auto [x1, x2] = channel_split(tape, x);

    auto branch = [&](const Tensor4& half, ConvParams& c31, ConvParams& c13, NormParams& norm) {
        Tensor4 t = conv2d(tape, half, c31, Pad2{1, 0});
        t = relu(tape, t);
        t = conv2d(tape, t, c13, Pad2{0, 1});
        t = batch_norm(tape, t, norm, training);
        return relu(tape, t);
    };
    Tensor4 h1 = branch(x1, p.g1_conv31, p.g1_conv13, p.g1_norm);
    Tensor4 h2 = branch(x2, p.g2_conv31, p.g2_conv13, p.g2_norm);
    Tensor4 t = concat_channels(tape, h1, h2);

    t = conv2d(tape, t, p.dw_conv, Pad2{same_pad(3, p.dilation), same_pad(3, p.dilation)});
    t = batch_norm(tape, t, p.dw_norm, training);
    t = relu(tape, t);

    t = conv2d(tape, t, p.pw_conv, Pad2{0, 0});
    t = batch_norm(tape, t, p.pw_norm, training);

    t = add(tape, t, x);
    t = relu(tape, t);
    return channel_shuffle(tape, t, p.shuffle_groups);
}

DownsampleParams make_downsample(int c_in, int c_out, Rng& rng) {
    if (c_out <= c_in) {
        throw ConfigError("downsample_unit: output channels " + std::to_string(c_out) +
                          " must exceed input channels " + std::to_string(c_in));
    }
    DownsampleParams p;
    p.conv = make_conv(c_out - c_in, c_in, 3, 3, 1, 2, 1, rng, /*with_bias=*/false);
    p.norm = make_norm(c_out);
    return p;
}

Tensor4 downsample_unit(Tape* tape, const Tensor4& x, DownsampleParams& p, bool training) {
    Tensor4 conv_half = conv2d(tape, x, p.conv, Pad2{1, 1});
    Tensor4 pool_half = max_pool2d(tape, x);
    Tensor4 t = concat_channels(tape, conv_half, pool_half);
    t = batch_norm(tape, t, p.norm, training);
    return relu(tape, t);
}

}  // namespace lrnn
