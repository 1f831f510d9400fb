// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "network.hpp"

namespace lrnn {

/// Optimizer state carried across checkpoint save/load. Momentum buffers are
/// ordered like the learnable entries of visit_params.
struct TrainerState {
    int iteration = 0;
    std::vector<std::vector<double>> momentum;
};

/// Single-file format: 8-byte magic, u64 little-endian manifest length, JSON
/// manifest, zero padding to a 16-byte boundary, then one little-endian raw
/// float32 blob. Manifest entries {name, shape, dtype:"f32", offset, length}
/// appear in build order with 16-byte-aligned offsets relative to the blob.
void save_checkpoint(const std::string& path, Network& net, const TrainerState* state);

/// Restores parameters (and momentum when `state` is non-null) into an
/// already built network. The manifest's spec hash must match net.spec.
/// Returns the stored iteration count.
int load_checkpoint(const std::string& path, Network& net, TrainerState* state);

/// Rounds live parameters (and momentum) through float32 so the in-memory
/// state equals what a reload of the just-written checkpoint would produce.
void quantize_state_to_f32(Network& net, TrainerState* state);

}  // namespace lrnn
