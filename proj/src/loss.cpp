// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#include "loss.hpp"

#include <algorithm>
#include <cmath>

namespace lrnn {

Tensor4 cross_entropy_loss(Tape* tape, const Tensor4& logits,
                           const std::vector<std::uint8_t>& labels, int ignore_index) {
    const Shape4 ls = logits.shape();
    const std::size_t pixels = static_cast<std::size_t>(ls.n) * ls.h * ls.w;
    if (labels.size() != pixels) {
        throw DimensionError("cross_entropy: " + std::to_string(labels.size()) +
                             " labels for " + std::to_string(pixels) + " pixels");
    }
    const int classes = ls.c;
    const std::size_t plane = static_cast<std::size_t>(ls.h) * ls.w;

    // softmax probabilities, kept for the backward pass
    std::vector<double> probs(logits.numel());
    double loss_sum = 0.0;
    std::int64_t valid = 0;
    for (int n = 0; n < ls.n; ++n) {
        const double* img = logits.data() + static_cast<std::size_t>(n) * classes * plane;
        double* pimg = probs.data() + static_cast<std::size_t>(n) * classes * plane;
        for (std::size_t px = 0; px < plane; ++px) {
            const int label = labels[static_cast<std::size_t>(n) * plane + px];
            double best = img[px];
            for (int c = 1; c < classes; ++c) {
                best = std::max(best, img[static_cast<std::size_t>(c) * plane + px]);
            }
            double denom = 0.0;
            for (int c = 0; c < classes; ++c) {
                denom += std::exp(img[static_cast<std::size_t>(c) * plane + px] - best);
            }
            const double log_denom = std::log(denom);
            for (int c = 0; c < classes; ++c) {
                pimg[static_cast<std::size_t>(c) * plane + px] =
                    std::exp(img[static_cast<std::size_t>(c) * plane + px] - best) / denom;
            }
            if (label == ignore_index) {
                continue;
            }
            if (label < 0 || label >= classes) {
                throw DataError("cross_entropy: label " + std::to_string(label) +
                                " out of range for " + std::to_string(classes) + " classes");
            }
            loss_sum += log_denom + best - img[static_cast<std::size_t>(label) * plane + px];
            ++valid;
        }
    }
    const double mean = valid > 0 ? loss_sum / static_cast<double>(valid) : 0.0;
    Tensor4 out({1, 1, 1, 1}, {mean});

    if (!tape || !tape->tracks(logits)) {
        return out;
    }
    const NodeId ln = logits.node();
    NodeId id = tape->record(
        {ln}, 1,
        [ls, plane, classes, valid, ln, ignore_index, labels,
         probs = std::move(probs)](const std::vector<double>& gout, Tape::Grads& sink) {
            if (valid == 0) {
                return;
            }
            auto& dl = sink.buf(ln, ls.numel());
            const double scale = gout[0] / static_cast<double>(valid);
            for (int n = 0; n < ls.n; ++n) {
                const double* pimg = probs.data() + static_cast<std::size_t>(n) * classes * plane;
                double* dimg = dl.data() + static_cast<std::size_t>(n) * classes * plane;
                for (std::size_t px = 0; px < plane; ++px) {
                    const int label = labels[static_cast<std::size_t>(n) * plane + px];
                    if (label == ignore_index) {
                        continue;
                    }
                    for (int c = 0; c < classes; ++c) {
                        const double p = pimg[static_cast<std::size_t>(c) * plane + px];
                        dimg[static_cast<std::size_t>(c) * plane + px] +=
                            scale * (p - (c == label ? 1.0 : 0.0));
                    }
                }
            }
        });
    out.bind_node(id, tape->id(), false);
    return out;
}

SegmentationScore score_predictions(const std::vector<std::uint8_t>& pred,
                                    const std::vector<std::uint8_t>& gt, int num_classes,
                                    int ignore_index) {
    if (pred.size() != gt.size()) {
        throw DimensionError("score_predictions: prediction/label size mismatch");
    }
    SegmentationScore s;
    s.confusion.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
    std::int64_t correct = 0, total = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (gt[i] == ignore_index) {
            continue;
        }
        if (gt[i] >= num_classes || pred[i] >= num_classes) {
            throw DataError("score_predictions: label outside class range");
        }
        ++s.confusion[static_cast<std::size_t>(gt[i]) * num_classes + pred[i]];
        correct += pred[i] == gt[i];
        ++total;
    }
    s.iou.assign(num_classes, 0.0);
    s.present_in_gt.assign(num_classes, false);
    double iou_sum = 0.0;
    int iou_count = 0;
    for (int c = 0; c < num_classes; ++c) {
        std::int64_t gt_c = 0, pred_c = 0;
        for (int k = 0; k < num_classes; ++k) {
            gt_c += s.confusion[static_cast<std::size_t>(c) * num_classes + k];
            pred_c += s.confusion[static_cast<std::size_t>(k) * num_classes + c];
        }
        const std::int64_t inter = s.confusion[static_cast<std::size_t>(c) * num_classes + c];
        const std::int64_t uni = gt_c + pred_c - inter;
        s.present_in_gt[c] = gt_c > 0;
        s.iou[c] = uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
        if (s.present_in_gt[c]) {
            iou_sum += s.iou[c];
            ++iou_count;
        }
    }
    s.mean_iou = iou_count > 0 ? iou_sum / iou_count : 0.0;
    s.pixel_acc = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    return s;
}

std::vector<std::uint8_t> argmax_labels(const Tensor4& logits) {
    const Shape4 ls = logits.shape();
    const std::size_t plane = static_cast<std::size_t>(ls.h) * ls.w;
    std::vector<std::uint8_t> out(static_cast<std::size_t>(ls.n) * plane);
    for (int n = 0; n < ls.n; ++n) {
        const double* img = logits.data() + static_cast<std::size_t>(n) * ls.c * plane;
        for (std::size_t px = 0; px < plane; ++px) {
            int best = 0;
            double best_v = img[px];
            for (int c = 1; c < ls.c; ++c) {
                const double v = img[static_cast<std::size_t>(c) * plane + px];
                if (v > best_v) {
                    best_v = v;
                    best = c;
                }
            }
            out[static_cast<std::size_t>(n) * plane + px] = static_cast<std::uint8_t>(best);
        }
    }
    return out;
}

SegmentationScore evaluate_miou(Network& net, const std::vector<Sample>& samples,
                                int ignore_index) {
    std::vector<std::uint8_t> all_pred, all_gt;
    for (const auto& s : samples) {
        Tensor4 logits = network_forward(nullptr, net, s.image, /*training=*/false);
        std::vector<std::uint8_t> pred = argmax_labels(logits);
        all_pred.insert(all_pred.end(), pred.begin(), pred.end());
        all_gt.insert(all_gt.end(), s.mask.begin(), s.mask.end());
    }
    return score_predictions(all_pred, all_gt, net.spec.num_classes, ignore_index);
}

}  // namespace lrnn
