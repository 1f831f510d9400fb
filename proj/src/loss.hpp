// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "network.hpp"
#include "synth.hpp"
#include "tape.hpp"
#include "tensor.hpp"

namespace lrnn {

/// Mean per-pixel negative log-softmax of the true class. Labels are
/// (n*h*w) with values in [0, classes) or ignore_index. The returned scalar
/// tensor participates in the tape; its gradient w.r.t. logits is
/// (softmax - onehot) / valid_count.
Tensor4 cross_entropy_loss(Tape* tape, const Tensor4& logits,
                           const std::vector<std::uint8_t>& labels, int ignore_index = 255);

struct SegmentationScore {
    std::vector<double> iou;              // per class, 0 when undefined
    std::vector<bool> present_in_gt;      // class appears in ground truth
    double mean_iou = 0.0;                // over classes present in gt
    double pixel_acc = 0.0;
    std::vector<std::int64_t> confusion;  // K*K, row = gt, col = prediction
};

/// Confusion-matrix scoring of label maps (pure function of the multiset of
/// (gt, pred) pixel pairs).
SegmentationScore score_predictions(const std::vector<std::uint8_t>& pred,
                                    const std::vector<std::uint8_t>& gt, int num_classes,
                                    int ignore_index = 255);

/// Argmax-class prediction for one (1,C,H,W) logit tensor.
std::vector<std::uint8_t> argmax_labels(const Tensor4& logits);

/// Runs inference over the samples and scores against their masks.
SegmentationScore evaluate_miou(Network& net, const std::vector<Sample>& samples,
                                int ignore_index = 255);

}  // namespace lrnn
