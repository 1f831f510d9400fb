// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "blocks.hpp"
#include "svn.hpp"

namespace lrnn {

/// Layer-graph description of an LRNNet variant.
///   Model A: no SVN.   Model B: single-scale SVN (8x8).
///   Model C: multi-scale SVN (8x8 + 4x4).
struct NetworkSpec {
    int input_channels = 3;
    std::array<int, 3> stage_channels{32, 64, 128};
    std::array<int, 3> blocks_per_stage{3, 2, 8};
    std::vector<int> stage3_dilations{1, 2, 5, 9, 2, 5, 9, 17};
    int num_classes = 19;
    int classifier_mid_channels = 32;
    std::optional<SVNConfig> svn;

    static NetworkSpec model(char variant, int num_classes);

    void check() const;
    /// Stable textual form; the checkpoint manifest stores its hash.
    std::string canonical() const;
    std::uint64_t hash() const;
};

struct Network {
    NetworkSpec spec;
    DownsampleParams ds1, ds2, ds3;
    std::vector<FCBParams> stage1, stage2, stage3;
    std::optional<SVNModuleParams> svn;
    ConvParams cls_conv3;  // 3x3, stage3 channels -> classifier_mid_channels
    NormParams cls_norm;
    ConvParams cls_conv1;  // 1x1, classifier_mid_channels -> num_classes
    int upsample_factor = 8;
};

Network build_lrnnet(const NetworkSpec& spec, std::uint64_t seed);

/// Logits at input resolution. Input height/width must be divisible by 8.
Tensor4 network_forward(Tape* tape, Network& net, const Tensor4& x, bool training);

/// One named entry of the network state, in build order. Learnable
/// parameters expose `tensor`; batch-norm running statistics expose
/// `buffer` (not learnable, still serialized).
struct ParamEntry {
    std::string name;
    Tensor4* tensor = nullptr;
    std::vector<double>* buffer = nullptr;
    Shape4 shape;

    bool learnable() const { return tensor != nullptr; }
};

/// Visits every entry in deterministic build order.
void visit_params(Network& net, const std::function<void(const ParamEntry&)>& fn);

/// Learnable parameter count (weights, biases, norm scales/shifts).
std::int64_t parameter_count(Network& net);

}  // namespace lrnn
