// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#include "tensor.hpp"

namespace lrnn {

std::string Shape4::str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) +
           "," + std::to_string(w) + ")";
}

Tensor4 uniform_tensor(Shape4 s, Rng& rng, double lo, double hi) {
    std::vector<double> v(s.numel());
    for (auto& x : v) {
        x = rng.uniform(lo, hi);
    }
    return Tensor4(s, std::move(v));
}

}  // namespace lrnn
