// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>

namespace lrnn {

struct BenchResult {
    double median_ms = 0.0;
    double mean_ms = 0.0;
    double p95_ms = 0.0;
    int reps = 0;
    int threads = 1;
};

/// Wall-clock statistics over `reps` runs of fn after `warmup` discarded
/// runs. Requires reps >= 10 and warmup >= 3; pins the compute thread count
/// for the duration of the measurement.
BenchResult bench_latency(const std::function<void()>& fn, int reps, int warmup, int threads);

}  // namespace lrnn
