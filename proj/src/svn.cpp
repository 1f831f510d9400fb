// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#include "svn.hpp"

#include <algorithm>
#include <cmath>

#include "gemm.hpp"

namespace lrnn {

void validate(const SVNConfig& cfg) {
    if (cfg.bottleneck_channels < 1) {
        throw ConfigError("svn: bottleneck channel count must be positive");
    }
    if (cfg.power_iters < 1) {
        throw ConfigError("svn: power iteration count must be >= 1");
    }
    if (cfg.scales.empty()) {
        throw ConfigError("svn: at least one region grid required");
    }
    for (std::size_t i = 0; i < cfg.scales.size(); ++i) {
        const auto& g = cfg.scales[i];
        if (g.g_h < 1 || g.g_w < 1) {
            throw ConfigError("svn: region grid must be positive");
        }
        for (std::size_t j = i + 1; j < cfg.scales.size(); ++j) {
            if (cfg.scales[j] == g) {
                throw ConfigError("svn: duplicate region grid in scale list");
            }
        }
    }
    if (cfg.zero_tol <= 0.0) {
        throw ConfigError("svn: zero tolerance must be positive");
    }
}

namespace {

struct ScaleLayout {
    RegionGrid grid;
    int rh = 0;  // region height (padded map / grid)
    int rw = 0;
    int ph = 0;  // padded map size
    int pw = 0;
};

ScaleLayout scale_layout(int h, int w, const RegionGrid& g) {
    ScaleLayout sl;
    sl.grid = g;
    sl.rh = (h + g.g_h - 1) / g.g_h;
    sl.rw = (w + g.g_w - 1) / g.g_w;
    sl.ph = sl.rh * g.g_h;
    sl.pw = sl.rw * g.g_w;
    return sl;
}

// Region (ry, rx) of the zero-padded map as a C x (rh*rw) matrix; pixels
// beyond the true map read as zero.
Mat region_matrix(const double* f, int c, int h, int w, const ScaleLayout& sl, int ry, int rx) {
    Mat a(c, sl.rh * sl.rw);
    for (int ci = 0; ci < c; ++ci) {
        const double* chan = f + static_cast<std::size_t>(ci) * h * w;
        double* row = a.row(ci);
        for (int ly = 0; ly < sl.rh; ++ly) {
            const int py = ry * sl.rh + ly;
            for (int lx = 0; lx < sl.rw; ++lx) {
                const int px = rx * sl.rw + lx;
                row[ly * sl.rw + lx] =
                    (py < h && px < w) ? chan[static_cast<std::size_t>(py) * w + px] : 0.0;
            }
        }
    }
    return a;
}

void scatter_region_grad(const Mat& da, int c, int h, int w, const ScaleLayout& sl, int ry,
                         int rx, double* df) {
    for (int ci = 0; ci < c; ++ci) {
        double* chan = df + static_cast<std::size_t>(ci) * h * w;
        const double* row = da.row(ci);
        for (int ly = 0; ly < sl.rh; ++ly) {
            const int py = ry * sl.rh + ly;
            if (py >= h) {
                continue;
            }
            for (int lx = 0; lx < sl.rw; ++lx) {
                const int px = rx * sl.rw + lx;
                if (px < w) {
                    chan[static_cast<std::size_t>(py) * w + px] += row[ly * sl.rw + lx];
                }
            }
        }
    }
}

struct ImageKeys {
    Mat bank;                       // C x S_total
    std::vector<PowerTrace> traces; // one per bank column
};

ImageKeys extract_keys_traced(const double* f, int c, int h, int w, const SVNConfig& cfg) {
    ImageKeys out;
    out.bank = Mat(c, cfg.total_regions());
    out.traces.reserve(cfg.total_regions());
    const std::vector<double> ones(c, 1.0);
    int col = 0;
    for (const auto& grid : cfg.scales) {
        const ScaleLayout sl = scale_layout(h, w, grid);
        for (int ry = 0; ry < grid.g_h; ++ry) {
            for (int rx = 0; rx < grid.g_w; ++rx) {
                const Mat a = region_matrix(f, c, h, w, sl, ry, rx);
                PowerTrace tr =
                    power_iteration_traced(a, cfg.power_iters, ones, cfg.zero_tol, cfg.sign_fix);
                for (int r = 0; r < c; ++r) {
                    out.bank.at(r, col) = tr.key[r];
                }
                out.traces.push_back(std::move(tr));
                ++col;
            }
        }
    }
    return out;
}

}  // namespace

std::vector<Mat> partition_regions(const Mat& f, int h, int w, const RegionGrid& grid) {
    if (f.cols != h * w) {
        throw DimensionError("partition_regions: map has " + std::to_string(f.cols) +
                             " columns, expected " + std::to_string(h * w));
    }
    if (grid.g_h < 1 || grid.g_w < 1 || h % grid.g_h != 0 || w % grid.g_w != 0) {
        throw ConfigError("partition_regions: grid " + std::to_string(grid.g_h) + "x" +
                          std::to_string(grid.g_w) + " does not divide map " +
                          std::to_string(h) + "x" + std::to_string(w));
    }
    const ScaleLayout sl = scale_layout(h, w, grid);
    std::vector<Mat> regions;
    regions.reserve(grid.g_h * grid.g_w);
    for (int ry = 0; ry < grid.g_h; ++ry) {
        for (int rx = 0; rx < grid.g_w; ++rx) {
            regions.push_back(region_matrix(f.v.data(), f.rows, h, w, sl, ry, rx));
        }
    }
    return regions;
}

KeyValueBank extract_keys(const Mat& f, int h, int w, const SVNConfig& cfg) {
    validate(cfg);
    if (f.cols != h * w) {
        throw DimensionError("extract_keys: map has " + std::to_string(f.cols) +
                             " columns, expected " + std::to_string(h * w));
    }
    return KeyValueBank{extract_keys_traced(f.v.data(), f.rows, h, w, cfg).bank};
}

Tensor4 svn_attention(Tape* tape, const Tensor4& f, const SVNConfig& cfg) {
    validate(cfg);
    const Shape4 fs = f.shape();
    if (fs.c != cfg.bottleneck_channels) {
        throw ConfigError("svn_attention: feature channels " + std::to_string(fs.c) +
                          " != configured bottleneck " +
                          std::to_string(cfg.bottleneck_channels));
    }
    const int c = fs.c;
    const int hw = fs.h * fs.w;
    const std::size_t img = static_cast<std::size_t>(c) * hw;

    std::vector<ImageKeys> keys;
    keys.reserve(fs.n);
    std::vector<double> y(fs.numel(), 0.0);
    for (int n = 0; n < fs.n; ++n) {
        const double* fn = f.data() + static_cast<std::size_t>(n) * img;
        ImageKeys ik = extract_keys_traced(fn, c, fs.h, fs.w, cfg);
        const int s_total = ik.bank.cols;
        // scores = bank^T Q, out = bank * scores
        Mat bank_t = transposed(ik.bank);
        Mat scores(s_total, hw);
        gemm_acc(s_total, hw, c, bank_t.v.data(), c, fn, hw, scores.v.data(), hw);
        gemm_acc(c, hw, s_total, ik.bank.v.data(), s_total, scores.v.data(), hw,
                 y.data() + static_cast<std::size_t>(n) * img, hw);
        keys.push_back(std::move(ik));
    }
    Tensor4 out(fs, std::move(y));

    if (!tape || !tape->tracks(f)) {
        return out;
    }
    const NodeId fn_node = f.node();
    const Tensor4 f_saved = f;
    NodeId id = tape->record(
        {fn_node}, fs.numel(),
        [f_saved, cfg, fs, c, hw, img, fn_node,
         keys = std::move(keys)](const std::vector<double>& gout, Tape::Grads& sink) {
            auto& df = sink.buf(fn_node, fs.numel());
            for (int n = 0; n < fs.n; ++n) {
                const ImageKeys& ik = keys[n];
                const int s_total = ik.bank.cols;
                const double* fn = f_saved.data() + static_cast<std::size_t>(n) * img;
                const double* go = gout.data() + static_cast<std::size_t>(n) * img;
                double* dfn = df.data() + static_cast<std::size_t>(n) * img;

                Mat bank_t = transposed(ik.bank);
                // dQ = bank (bank^T dO)
                Mat dscore(s_total, hw);
                gemm_acc(s_total, hw, c, bank_t.v.data(), c, go, hw, dscore.v.data(), hw);
                gemm_acc(c, hw, s_total, ik.bank.v.data(), s_total, dscore.v.data(), hw, dfn,
                         hw);

                if (cfg.stop_key_grad) {
                    continue;
                }
                // dBank = dO M^T + Q dM^T with M = bank^T Q, dM = bank^T dO
                Mat m(s_total, hw);
                gemm_acc(s_total, hw, c, bank_t.v.data(), c, fn, hw, m.v.data(), hw);
                Mat m_t = transposed(m);
                Mat dm_t = transposed(dscore);
                Mat dbank(c, s_total);
                gemm_acc(c, s_total, hw, go, hw, m_t.v.data(), s_total, dbank.v.data(),
                         s_total);
                gemm_acc(c, s_total, hw, fn, hw, dm_t.v.data(), s_total, dbank.v.data(),
                         s_total);

                // push each column's gradient through its power iteration
                int col = 0;
                std::vector<double> dkey(c);
                for (const auto& grid : cfg.scales) {
                    const ScaleLayout sl = scale_layout(fs.h, fs.w, grid);
                    for (int ry = 0; ry < grid.g_h; ++ry) {
                        for (int rx = 0; rx < grid.g_w; ++rx) {
                            const PowerTrace& tr = ik.traces[col];
                            if (!tr.degenerate) {
                                for (int r = 0; r < c; ++r) {
                                    dkey[r] = dbank.at(r, col);
                                }
                                const Mat a = region_matrix(fn, c, fs.h, fs.w, sl, ry, rx);
                                Mat da(c, sl.rh * sl.rw);
                                power_iteration_backward(a, tr, dkey, da);
                                scatter_region_grad(da, c, fs.h, fs.w, sl, ry, rx, dfn);
                            }
                            ++col;
                        }
                    }
                }
            }
        });
    out.bind_node(id, tape->id(), false);
    return out;
}

Tensor4 svn_module_forward(Tape* tape, const Tensor4& x, SVNModuleParams& p, bool training) {
    if (p.conv_out.weight.n() != x.c()) {
        throw ConfigError("svn_module: expansion conv does not restore input channels");
    }
    Tensor4 f = conv2d(tape, x, p.conv_in, Pad2{0, 0});
    if (p.norm_relu_after_in) {
        f = batch_norm(tape, f, p.norm_in, training);
        f = relu(tape, f);
    }
    Tensor4 attended = svn_attention(tape, f, p.cfg);
    Tensor4 expanded = conv2d(tape, attended, p.conv_out, Pad2{0, 0});
    return add(tape, x, expanded);
}

}  // namespace lrnn
