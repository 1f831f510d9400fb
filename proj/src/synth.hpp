// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "tensor.hpp"

namespace lrnn {

/// Synthetic shape-segmentation data: colored rectangles and ellipses over a
/// noisy background, one label per pixel. Generation is seed-per-sample, so
/// datasets are reproducible and order-independent.
struct SynthConfig {
    int height = 64;
    int width = 128;
    int num_classes = 5;  // including background class 0
    int min_shapes = 1;
    int max_shapes = 4;
    double noise_stddev = 0.05;
    int train_size = 512;
    int val_size = 64;
    std::uint64_t seed = 1234;
};

struct Sample {
    Tensor4 image;                   // (1, 3, h, w) in [0, 1]
    std::vector<std::uint8_t> mask;  // h*w labels in [0, num_classes)
};

struct SynthDataset {
    std::vector<Sample> train;
    std::vector<Sample> val;
    int height = 0;
    int width = 0;
    int num_classes = 0;
};

Sample gen_sample(const SynthConfig& cfg, int split, int index);
SynthDataset gen_synthetic_dataset(const SynthConfig& cfg);

}  // namespace lrnn
