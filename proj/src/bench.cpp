// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#include "bench.hpp"

#include <algorithm>
#include <chrono>
#include <vector>

#include "ops.hpp"

namespace lrnn {

BenchResult bench_latency(const std::function<void()>& fn, int reps, int warmup, int threads) {
    if (reps < 10) {
        throw ConfigError("bench_latency: at least 10 repetitions required");
    }
    if (warmup < 3) {
        throw ConfigError("bench_latency: at least 3 warmup runs required");
    }
    const int prev = num_threads();
    set_num_threads(threads);
    for (int i = 0; i < warmup; ++i) {
        fn();
    }
    std::vector<double> ms(reps);
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        ms[i] = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    set_num_threads(prev);

    std::sort(ms.begin(), ms.end());
    BenchResult r;
    r.reps = reps;
    r.threads = threads;
    r.median_ms = reps % 2 ? ms[reps / 2] : 0.5 * (ms[reps / 2 - 1] + ms[reps / 2]);
    double total = 0.0;
    for (double v : ms) {
        total += v;
    }
    r.mean_ms = total / reps;
    const int p95 = std::min(reps - 1, static_cast<int>(0.95 * reps));
    r.p95_ms = ms[p95];
    return r;
}

}  // namespace lrnn
