// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "network.hpp"

namespace lrnn {

/// Multiply-accumulates are counted exactly; a convention only changes how
/// they are reported (1 flop per MAC, or 2).
enum class Convention { kMacs, kFlops2x };

const char* convention_name(Convention c);

struct CostRow {
    std::string layer;
    std::int64_t params = 0;
    std::int64_t macs = 0;
};

struct CostReport {
    std::vector<CostRow> rows;
    std::int64_t total_params = 0;
    std::int64_t total_macs = 0;     // conv + attention rows
    std::int64_t overhead_ops = 0;   // norm/activation/pool/upsample elementwise ops
    Convention convention = Convention::kMacs;
    Shape4 input_shape{};

    /// Headline operation count (MACs plus overhead ops) under a convention.
    double total_flops(Convention c) const {
        const double macs = static_cast<double>(total_macs);
        const double scaled = c == Convention::kFlops2x ? 2.0 * macs : macs;
        return scaled + static_cast<double>(overhead_ops);
    }

    /// `layer,params,macs,flops2x` rows, totals row last. Deterministic.
    std::string csv() const;
};

/// Exact learnable-parameter counts per layer.
CostReport count_params(Network& net);

/// Analytic per-layer MAC counts for one forward pass at the given input.
CostReport count_flops(Network& net, Shape4 input, Convention convention);

/// Attention arithmetic for a C' x N bottleneck with S_total keys:
///   attention_macs  = 2 C' N S_total   (scores + weighted sum)
///   power_iter_macs = 2 T C' N per scale
struct AttentionCost {
    std::int64_t attention_macs = 0;
    std::int64_t power_iter_macs = 0;
};
AttentionCost attention_flops(int channels, int n_pixels, int s_total, int t_iters,
                              int n_scales = 1);

/// Standard non-local cost on the same map: scores (C N^2) + aggregation
/// (C N^2) MACs.
std::int64_t standard_nonlocal_macs(int channels, int n_pixels);

}  // namespace lrnn
