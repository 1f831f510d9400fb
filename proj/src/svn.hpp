// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "linalg.hpp"
#include "ops.hpp"
#include "tape.hpp"
#include "tensor.hpp"

namespace lrnn {

/// Partition of a (C, H, W) feature map into g_h x g_w spatial sub-regions.
struct RegionGrid {
    int g_h = 1;
    int g_w = 1;
    bool operator==(const RegionGrid&) const = default;
};

struct SVNConfig {
    int bottleneck_channels = 32;
    std::vector<RegionGrid> scales{{8, 8}, {4, 4}};
    int power_iters = 2;
    SignFix sign_fix = SignFix::kLargestAbsPositive;
    double zero_tol = 1e-12;
    /// When set, gradients do not flow through the key-extraction branch.
    bool stop_key_grad = false;

    int total_regions() const {
        int s = 0;
        for (const auto& g : scales) {
            s += g.g_h * g.g_w;
        }
        return s;
    }
};

void validate(const SVNConfig& cfg);

/// Columns are regional dominant singular vectors (unit norm or zero),
/// ordered scale by scale, regions row-major within each grid. Keys and
/// Values coincide.
struct KeyValueBank {
    Mat columns;  // C' x S_total
};

/// Region matrices C' x (H'W'), row-major grid order, pixels flattened
/// row-major within each region. The grid must divide the map.
std::vector<Mat> partition_regions(const Mat& f, int h, int w, const RegionGrid& grid);

/// Dominant singular vector per region per scale, all-ones init, T power
/// iterations. Maps not divisible by a grid are zero-padded right/bottom for
/// the key computation only.
KeyValueBank extract_keys(const Mat& f, int h, int w, const SVNConfig& cfg);

/// Tape-aware reduced non-local attention over a bottleneck feature tensor:
/// per image, keys are extracted from f and O = bank (bank^T Q) with Q the
/// unpadded flattened map. Differentiated exactly through the unrolled power
/// iteration unless cfg.stop_key_grad is set.
Tensor4 svn_attention(Tape* tape, const Tensor4& f, const SVNConfig& cfg);

/// Fig-style bottleneck module: 1x1 channel reduction, reduced non-local
/// attention, 1x1 expansion, residual add.
struct SVNModuleParams {
    ConvParams conv_in;   // C -> C'
    NormParams norm_in;   // on C'
    ConvParams conv_out;  // C' -> C
    bool norm_relu_after_in = true;
    SVNConfig cfg;
};

Tensor4 svn_module_forward(Tape* tape, const Tensor4& x, SVNModuleParams& p, bool training);

}  // namespace lrnn
