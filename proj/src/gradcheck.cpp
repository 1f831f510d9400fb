// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ops.hpp"

namespace lrnn {

namespace {

double eval_loss(const OpClosure& op, const std::vector<Tensor4>& inputs) {
    Tape tape;  // nothing is watched, so nothing records
    Tensor4 out = op(tape, inputs);
    double s = 0.0;
    const double* p = out.data();
    for (std::size_t i = 0; i < out.numel(); ++i) {
        s += p[i];
    }
    return s;
}

}  // namespace

double grad_check(const OpClosure& op, const std::vector<Tensor4>& inputs, double step) {
    // analytic pass
    Tape tape;
    std::vector<Tensor4> watched = inputs;
    for (auto& t : watched) {
        tape.watch(t);
    }
    Tensor4 out = op(tape, watched);
    Tensor4 loss = sum_all(&tape, out);
    GradMap grads = tape.backward(loss, Tensor4::ones({1, 1, 1, 1}));

    // Coordinates whose gradient is structurally zero (a bias cancelled by a
    // following norm, a fully clipped channel) measure only cancellation
    // noise on both sides; the central difference alone carries
    // eps*|loss|/(2*step) ~ 1e-10 of it, which the 1e-8 denominator floor
    // cannot absorb. Such coordinates are treated as agreeing zeros.
    constexpr double kZeroAtol = 1e-7;

    double worst = 0.0;
    for (std::size_t which = 0; which < inputs.size(); ++which) {
        const Tensor4& base = inputs[which];
        const Tensor4 analytic = grads.grad(watched[which]);
        for (std::size_t j = 0; j < base.numel(); ++j) {
            std::vector<Tensor4> plus = inputs;
            std::vector<Tensor4> minus = inputs;
            std::vector<double> vp(base.vec());
            std::vector<double> vm(base.vec());
            vp[j] += step;
            vm[j] -= step;
            plus[which] = Tensor4(base.shape(), std::move(vp));
            minus[which] = Tensor4(base.shape(), std::move(vm));
            const double numeric = (eval_loss(op, plus) - eval_loss(op, minus)) / (2.0 * step);
            const double a = analytic.data()[j];
            if (std::abs(a) < kZeroAtol && std::abs(numeric) < kZeroAtol) {
                continue;
            }
            const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

Tensor4 sample_away_from_zero(Shape4 shape, Rng& rng, double lo, double hi, double margin) {
    std::vector<double> v(shape.numel());
    for (auto& x : v) {
        do {
            x = rng.uniform(lo, hi);
        } while (std::abs(x) < margin);
    }
    return Tensor4(shape, std::move(v));
}

}  // namespace lrnn
