// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "tape.hpp"
#include "tensor.hpp"

namespace lrnn {

/// A differentiable computation under test: receives a tape and the (already
/// watched) inputs, returns the output tensor.
using OpClosure = std::function<Tensor4(Tape&, const std::vector<Tensor4>&)>;

/// Central-finite-difference check of d(sum(op))/d(inputs).
/// Returns max over all input elements of
///   |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
double grad_check(const OpClosure& op, const std::vector<Tensor4>& inputs, double step);

/// Uniform sample with every element at least `margin` away from zero,
/// keeping finite differences clear of ReLU kinks.
Tensor4 sample_away_from_zero(Shape4 shape, Rng& rng, double lo, double hi, double margin);

}  // namespace lrnn
