// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "network.hpp"
#include "synth.hpp"

namespace lrnn {

struct TrainConfig {
    double base_lr = 0.01;
    double lr_power = 0.9;
    int max_iters = 2000;
    int batch_size = 8;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::uint64_t seed = 42;
    int checkpoint_every = 0;      // additionally save every N iterations
    std::string checkpoint_path;   // empty = never write checkpoints
    std::string log_path;          // empty = no CSV log
    int threads = 1;
};

/// base_lr * (1 - iter/max_iters)^lr_power
double poly_lr(int iter, const TrainConfig& cfg);

struct TrainLogRow {
    int iter;
    double lr;
    double loss;
};

struct TrainResult {
    std::vector<TrainLogRow> rows;
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

using ProgressFn = std::function<void(int iter, double lr, double loss)>;

/// SGD with momentum, weight decay and the poly schedule. Deterministic for
/// a fixed seed at thread count 1 (batches are a pure function of
/// (seed, iteration)). Saving a checkpoint rounds the live state through
/// float32 so a resumed run continues bit-identically. Aborts with a
/// diagnostic if the loss stops being finite.
TrainResult train(Network& net, const std::vector<Sample>& data, const TrainConfig& cfg,
                  const ProgressFn& progress = {}, const std::string& resume_path = {});

}  // namespace lrnn
