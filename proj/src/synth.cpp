// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#include "synth.hpp"

#include <algorithm>
#include <cmath>

namespace lrnn {

namespace {

struct Color {
    double r, g, b;
};

// Distinct, well-separated colors for shape classes 1..N (index 0 unused).
constexpr Color kPalette[] = {
    {0.12, 0.12, 0.14},  // background base
    {0.85, 0.20, 0.20}, {0.20, 0.80, 0.25}, {0.20, 0.35, 0.90}, {0.90, 0.85, 0.20},
    {0.80, 0.30, 0.85}, {0.25, 0.85, 0.85}, {0.95, 0.55, 0.15}, {0.55, 0.35, 0.10},
};
constexpr int kPaletteSize = static_cast<int>(sizeof(kPalette) / sizeof(kPalette[0]));

void validate(const SynthConfig& cfg) {
    if (cfg.height < 8 || cfg.width < 8) {
        throw ConfigError("synth: image size too small");
    }
    if (cfg.num_classes < 1) {
        throw ConfigError("synth: need at least the background class");
    }
    if (cfg.min_shapes < 0 || cfg.max_shapes < cfg.min_shapes) {
        throw ConfigError("synth: invalid shape count range");
    }
    if (cfg.num_classes == 1 && cfg.min_shapes > 0) {
        throw ConfigError("synth: shapes require at least one foreground class");
    }
    if (cfg.noise_stddev < 0.0) {
        throw ConfigError("synth: negative noise level");
    }
    if (cfg.train_size < 1 || cfg.val_size < 0) {
        throw ConfigError("synth: invalid split sizes");
    }
}

}  // namespace

Sample gen_sample(const SynthConfig& cfg, int split, int index) {
    validate(cfg);
    Rng rng(mix_seed(cfg.seed, (static_cast<std::uint64_t>(split) << 32) ^
                                   static_cast<std::uint64_t>(index)));
    const int h = cfg.height;
    const int w = cfg.width;
    std::vector<double> img(3 * static_cast<std::size_t>(h) * w);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(h) * w, 0);

    const double bg_jitter = rng.uniform(-0.04, 0.04);
    const Color bg{kPalette[0].r + bg_jitter, kPalette[0].g + bg_jitter,
                   kPalette[0].b + bg_jitter};
    auto paint = [&](int y, int x, const Color& col, std::uint8_t cls) {
        const std::size_t px = static_cast<std::size_t>(y) * w + x;
        img[px] = col.r;
        img[static_cast<std::size_t>(h) * w + px] = col.g;
        img[2 * static_cast<std::size_t>(h) * w + px] = col.b;
        mask[px] = cls;
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            paint(y, x, bg, 0);
        }
    }

    const int fg_classes = cfg.num_classes - 1;
    const int count = cfg.max_shapes == cfg.min_shapes
                          ? cfg.min_shapes
                          : rng.uniform_int(cfg.min_shapes, cfg.max_shapes);
    for (int s = 0; s < count; ++s) {
        // First shape cycles through the classes by sample index so every
        // class appears somewhere in any split of reasonable size.
        const int cls = (s == 0 && fg_classes > 0)
                            ? 1 + (index % fg_classes)
                            : rng.uniform_int(1, fg_classes);
        const Color base = kPalette[1 + (cls - 1) % (kPaletteSize - 1)];
        const double jitter = rng.uniform(-0.06, 0.06);
        const Color col{std::clamp(base.r + jitter, 0.0, 1.0),
                        std::clamp(base.g + jitter, 0.0, 1.0),
                        std::clamp(base.b + jitter, 0.0, 1.0)};
        const bool ellipse = rng.uniform() < 0.5;
        if (ellipse) {
            const int ra = rng.uniform_int(w / 10, w / 5);
            const int rb = rng.uniform_int(h / 10, h / 5);
            const int cx = rng.uniform_int(ra, w - 1 - ra);
            const int cy = rng.uniform_int(rb, h - 1 - rb);
            for (int y = cy - rb; y <= cy + rb; ++y) {
                for (int x = cx - ra; x <= cx + ra; ++x) {
                    const double dy = static_cast<double>(y - cy) / rb;
                    const double dx = static_cast<double>(x - cx) / ra;
                    if (dx * dx + dy * dy <= 1.0) {
                        paint(y, x, col, static_cast<std::uint8_t>(cls));
                    }
                }
            }
        } else {
            const int bw = rng.uniform_int(w / 8, w / 3);
            const int bh = rng.uniform_int(h / 8, h / 3);
            const int x0 = rng.uniform_int(0, w - bw);
            const int y0 = rng.uniform_int(0, h - bh);
            for (int y = y0; y < y0 + bh; ++y) {
                for (int x = x0; x < x0 + bw; ++x) {
                    paint(y, x, col, static_cast<std::uint8_t>(cls));
                }
            }
        }
    }

    if (cfg.noise_stddev > 0.0) {
        for (auto& v : img) {
            v = std::clamp(v + cfg.noise_stddev * rng.normal(), 0.0, 1.0);
        }
    }
    return Sample{Tensor4({1, 3, h, w}, std::move(img)), std::move(mask)};
}

SynthDataset gen_synthetic_dataset(const SynthConfig& cfg) {
    validate(cfg);
    SynthDataset ds;
    ds.height = cfg.height;
    ds.width = cfg.width;
    ds.num_classes = cfg.num_classes;
    ds.train.reserve(cfg.train_size);
    for (int i = 0; i < cfg.train_size; ++i) {
        ds.train.push_back(gen_sample(cfg, 0, i));
    }
    ds.val.reserve(cfg.val_size);
    for (int i = 0; i < cfg.val_size; ++i) {
        ds.val.push_back(gen_sample(cfg, 1, i));
    }
    return ds;
}

}  // namespace lrnn
