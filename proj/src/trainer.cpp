// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#include "trainer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "loss.hpp"
#include "ops.hpp"

namespace lrnn {

double poly_lr(int iter, const TrainConfig& cfg) {
    if (iter < 0 || iter > cfg.max_iters) {
        throw ConfigError("poly_lr: iteration outside [0, max_iters]");
    }
    const double frac = 1.0 - static_cast<double>(iter) / cfg.max_iters;
    return cfg.base_lr * std::pow(frac, cfg.lr_power);
}

namespace {

// Batch sample index: pure function of (seed, iteration, slot).
std::size_t batch_index(std::uint64_t seed, int iter, int slot, std::size_t dataset_size) {
    return static_cast<std::size_t>(
        mix_seed(seed ^ 0x7261696eULL,
                 (static_cast<std::uint64_t>(iter) << 20) ^ static_cast<std::uint64_t>(slot)) %
        dataset_size);
}

struct Batch {
    Tensor4 images;
    std::vector<std::uint8_t> labels;
};

Batch assemble_batch(const std::vector<Sample>& data, const TrainConfig& cfg, int iter) {
    const Shape4 s0 = data.front().image.shape();
    const Shape4 bs{cfg.batch_size, s0.c, s0.h, s0.w};
    std::vector<double> images(bs.numel());
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(cfg.batch_size) * s0.h * s0.w);
    const std::size_t img_sz = s0.numel();
    const std::size_t mask_sz = static_cast<std::size_t>(s0.h) * s0.w;
    for (int j = 0; j < cfg.batch_size; ++j) {
        const Sample& s = data[batch_index(cfg.seed, iter, j, data.size())];
        std::memcpy(images.data() + static_cast<std::size_t>(j) * img_sz, s.image.data(),
                    img_sz * sizeof(double));
        std::memcpy(labels.data() + static_cast<std::size_t>(j) * mask_sz, s.mask.data(),
                    mask_sz);
    }
    return Batch{Tensor4(bs, std::move(images)), std::move(labels)};
}

void write_log(const std::string& path, const std::vector<TrainLogRow>& rows) {
    if (path.empty()) {
        return;
    }
    std::ofstream out(path);
    if (!out) {
        throw IoError("train: cannot open log '" + path + "'");
    }
    out << "iter,lr,loss\n";
    char line[96];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%d,%.12g,%.12g\n", r.iter, r.lr, r.loss);
        out << line;
    }
}

}  // namespace

TrainResult train(Network& net, const std::vector<Sample>& data, const TrainConfig& cfg,
                  const ProgressFn& progress, const std::string& resume_path) {
    if (data.empty()) {
        throw ConfigError("train: empty dataset");
    }
    if (cfg.batch_size < 1 || cfg.max_iters < 1 || cfg.base_lr <= 0.0) {
        throw ConfigError("train: invalid configuration");
    }
    set_num_threads(cfg.threads);

    TrainerState state;
    if (!resume_path.empty()) {
        load_checkpoint(resume_path, net, &state);
    }

    // Learnable entries in build order; momentum buffers follow this order.
    std::vector<Tensor4*> params;
    visit_params(net, [&](const ParamEntry& e) {
        if (e.learnable()) {
            params.push_back(e.tensor);
        }
    });
    if (state.momentum.empty()) {
        state.momentum.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.momentum[i].assign(params[i]->numel(), 0.0);
        }
    } else if (state.momentum.size() != params.size()) {
        throw CheckpointError("train: resumed optimizer state does not match the network");
    }

    // Periodic saves get an .iterN suffix; the final state goes to the
    // configured path itself.
    auto save = [&](int next_iter, bool final) {
        if (cfg.checkpoint_path.empty()) {
            return;
        }
        state.iteration = next_iter;
        const std::string path = final
                                     ? cfg.checkpoint_path
                                     : cfg.checkpoint_path + ".iter" + std::to_string(next_iter);
        save_checkpoint(path, net, &state);
        // Keep live state equal to what a reload would produce, so an
        // interrupted-and-resumed run continues bit-identically.
        quantize_state_to_f32(net, &state);
    };

    TrainResult result;
    for (int iter = state.iteration; iter < cfg.max_iters; ++iter) {
        const double lr = poly_lr(iter, cfg);
        Batch batch = assemble_batch(data, cfg, iter);

        Tape tape;
        for (Tensor4* p : params) {
            tape.watch(*p);
        }
        Tensor4 logits = network_forward(&tape, net, batch.images, /*training=*/true);
        Tensor4 loss = cross_entropy_loss(&tape, logits, batch.labels);
        const double loss_value = loss.data()[0];
        if (!std::isfinite(loss_value)) {
            throw NumericError("train: loss diverged (not finite) at iteration " +
                               std::to_string(iter));
        }
        GradMap grads = tape.backward(loss, Tensor4::ones({1, 1, 1, 1}));

        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor4& w = *params[i];
            const std::vector<double>* g = grads.find(w);
            std::vector<double>& m = state.momentum[i];
            std::vector<double> next(w.vec());
            for (std::size_t j = 0; j < next.size(); ++j) {
                const double grad = (g ? (*g)[j] : 0.0) + cfg.weight_decay * next[j];
                m[j] = cfg.momentum * m[j] + grad;
                next[j] -= lr * m[j];
            }
            w = Tensor4(w.shape(), std::move(next));
        }

        result.rows.push_back(TrainLogRow{iter, lr, loss_value});
        if (progress) {
            progress(iter, lr, loss_value);
        }
        if (cfg.checkpoint_every > 0 && (iter + 1) % cfg.checkpoint_every == 0 &&
            iter + 1 < cfg.max_iters) {
            save(iter + 1, /*final=*/false);
        }
    }
    save(cfg.max_iters, /*final=*/true);

    if (!result.rows.empty()) {
        result.initial_loss = result.rows.front().loss;
        result.final_loss = result.rows.back().loss;
    }
    write_log(cfg.log_path, result.rows);
    return result;
}

}  // namespace lrnn
