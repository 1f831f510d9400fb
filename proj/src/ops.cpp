// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#include "ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <thread>

#include "gemm.hpp"

namespace lrnn {

namespace {

std::atomic<int> g_threads{1};

void parallel_for(int count, const std::function<void(int)>& fn) {
    const int threads = std::min(g_threads.load(), count);
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                fn(i);
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
}

struct ConvDims {
    int cpg = 0;  // input channels per group
    int cog = 0;  // output channels per group
    int kh = 0;
    int kw = 0;
    int oh = 0;
    int ow = 0;
    int patch = 0;  // cpg * kh * kw
};

ConvDims conv_dims(const Shape4& x, const ConvParams& p, Pad2 pad) {
    const Shape4& ws = p.weight.shape();
    if (p.groups < 1 || x.c % p.groups != 0) {
        throw ConfigError("conv2d: groups " + std::to_string(p.groups) +
                          " does not divide input channels " + std::to_string(x.c));
    }
    if (ws.n % p.groups != 0) {
        throw ConfigError("conv2d: groups " + std::to_string(p.groups) +
                          " does not divide output channels " + std::to_string(ws.n));
    }
    if (ws.c != x.c / p.groups) {
        throw DimensionError("conv2d: weight " + ws.str() + " expects " +
                             std::to_string(ws.c * p.groups) + " input channels, got " +
                             std::to_string(x.c));
    }
    if (p.stride_h < 1 || p.stride_w < 1 || p.dilation_h < 1 || p.dilation_w < 1) {
        throw ConfigError("conv2d: stride/dilation must be positive");
    }
    if (p.bias && (p.bias->numel() != static_cast<std::size_t>(ws.n))) {
        throw DimensionError("conv2d: bias length does not match output channels");
    }
    ConvDims d;
    d.cpg = ws.c;
    d.cog = ws.n / p.groups;
    d.kh = ws.h;
    d.kw = ws.w;
    d.oh = (x.h + 2 * pad.h - p.dilation_h * (d.kh - 1) - 1) / p.stride_h + 1;
    d.ow = (x.w + 2 * pad.w - p.dilation_w * (d.kw - 1) - 1) / p.stride_w + 1;
    if (d.oh <= 0 || d.ow <= 0) {
        throw DimensionError("conv2d: kernel does not fit input " + x.str());
    }
    d.patch = d.cpg * d.kh * d.kw;
    return d;
}

// Patch matrix (patch x oh*ow) for channels [c0, c0+cpg) of one image.
void im2col(const double* x, const Shape4& xs, int c0, const ConvParams& p, Pad2 pad,
            const ConvDims& d, double* col) {
    const int ohw = d.oh * d.ow;
    for (int ci = 0; ci < d.cpg; ++ci) {
        const double* chan =
            x + (static_cast<std::size_t>(c0 + ci) * xs.h) * xs.w;
        for (int ky = 0; ky < d.kh; ++ky) {
            for (int kx = 0; kx < d.kw; ++kx) {
                double* row = col + (static_cast<std::size_t>(ci) * d.kh * d.kw +
                                     static_cast<std::size_t>(ky) * d.kw + kx) *
                                        ohw;
                const int off_y = ky * p.dilation_h - pad.h;
                const int off_x = kx * p.dilation_w - pad.w;
                for (int oy = 0; oy < d.oh; ++oy) {
                    const int iy = oy * p.stride_h + off_y;
                    double* dst = row + static_cast<std::size_t>(oy) * d.ow;
                    if (iy < 0 || iy >= xs.h) {
                        std::memset(dst, 0, sizeof(double) * d.ow);
                        continue;
                    }
                    const double* src = chan + static_cast<std::size_t>(iy) * xs.w;
                    if (p.stride_w == 1) {
                        // valid ox range: 0 <= ox + off_x < W
                        int lo = std::max(0, -off_x);
                        int hi = std::min(d.ow, xs.w - off_x);
                        if (lo > 0) {
                            std::memset(dst, 0, sizeof(double) * std::min(lo, d.ow));
                        }
                        if (hi > lo) {
                            std::memcpy(dst + lo, src + lo + off_x, sizeof(double) * (hi - lo));
                        }
                        if (hi < d.ow) {
                            std::memset(dst + std::max(hi, 0), 0,
                                        sizeof(double) * (d.ow - std::max(hi, 0)));
                        }
                    } else {
                        for (int ox = 0; ox < d.ow; ++ox) {
                            const int ix = ox * p.stride_w + off_x;
                            dst[ox] = (ix >= 0 && ix < xs.w)
                                          ? src[ix]
                                          : 0.0;
                        }
                    }
                }
            }
        }
    }
}

// Scatter-add of a patch-matrix gradient back onto the input layout.
void col2im_acc(const double* col, const Shape4& xs, int c0, const ConvParams& p, Pad2 pad,
                const ConvDims& d, double* dx) {
    const int ohw = d.oh * d.ow;
    for (int ci = 0; ci < d.cpg; ++ci) {
        double* chan = dx + (static_cast<std::size_t>(c0 + ci) * xs.h) * xs.w;
        for (int ky = 0; ky < d.kh; ++ky) {
            for (int kx = 0; kx < d.kw; ++kx) {
                const double* row = col + (static_cast<std::size_t>(ci) * d.kh * d.kw +
                                           static_cast<std::size_t>(ky) * d.kw + kx) *
                                              ohw;
                const int off_y = ky * p.dilation_h - pad.h;
                const int off_x = kx * p.dilation_w - pad.w;
                for (int oy = 0; oy < d.oh; ++oy) {
                    const int iy = oy * p.stride_h + off_y;
                    if (iy < 0 || iy >= xs.h) {
                        continue;
                    }
                    double* dst = chan + static_cast<std::size_t>(iy) * xs.w;
                    const double* src = row + static_cast<std::size_t>(oy) * d.ow;
                    for (int ox = 0; ox < d.ow; ++ox) {
                        const int ix = ox * p.stride_w + off_x;
                        if (ix >= 0 && ix < xs.w) {
                            dst[ix] += src[ox];
                        }
                    }
                }
            }
        }
    }
}

void transpose(int rows, int cols, const double* src, double* dst) {
    constexpr int kBlock = 32;
    for (int r0 = 0; r0 < rows; r0 += kBlock) {
        const int r1 = std::min(rows, r0 + kBlock);
        for (int c0 = 0; c0 < cols; c0 += kBlock) {
            const int c1 = std::min(cols, c0 + kBlock);
            for (int r = r0; r < r1; ++r) {
                for (int c = c0; c < c1; ++c) {
                    dst[static_cast<std::size_t>(c) * rows + r] =
                        src[static_cast<std::size_t>(r) * cols + c];
                }
            }
        }
    }
}

// True when the patch matrix is just the input slice (pointwise conv).
bool is_pointwise(const ConvParams& p, Pad2 pad, const ConvDims& d) {
    return d.kh == 1 && d.kw == 1 && p.stride_h == 1 && p.stride_w == 1 && pad.h == 0 &&
           pad.w == 0;
}

bool is_depthwise(const Shape4& xs, const ConvParams& p, const ConvDims& d) {
    return p.groups == xs.c && d.cpg == 1 && d.cog == 1;
}

// Per-channel stencil as one row AXPY per kernel tap over the valid output
// span; the tap loop stays innermost per element in effect, but the ox loop
// carries no bounds checks for the common stride-1 case.
void depthwise_forward(const Tensor4& x, const ConvParams& p, Pad2 pad, const ConvDims& d,
                       double* y) {
    const Shape4 xs = x.shape();
    const std::size_t iplane = static_cast<std::size_t>(xs.h) * xs.w;
    const std::size_t oplane = static_cast<std::size_t>(d.oh) * d.ow;
    const double* bias = p.bias ? p.bias->data() : nullptr;
    parallel_for(xs.n, [&](int n) {
        for (int c = 0; c < xs.c; ++c) {
            const double* src = x.data() + (static_cast<std::size_t>(n) * xs.c + c) * iplane;
            const double* w = p.weight.data() + static_cast<std::size_t>(c) * d.kh * d.kw;
            double* dst = y + (static_cast<std::size_t>(n) * xs.c + c) * oplane;
            const double b = bias ? bias[c] : 0.0;
            for (std::size_t i = 0; i < oplane; ++i) {
                dst[i] = b;
            }
            for (int ky = 0; ky < d.kh; ++ky) {
                for (int kx = 0; kx < d.kw; ++kx) {
                    const double wv = w[ky * d.kw + kx];
                    const int off_x = kx * p.dilation_w - pad.w;
                    for (int oy = 0; oy < d.oh; ++oy) {
                        const int iy = oy * p.stride_h - pad.h + ky * p.dilation_h;
                        if (iy < 0 || iy >= xs.h) {
                            continue;
                        }
                        double* drow = dst + static_cast<std::size_t>(oy) * d.ow;
                        const double* srow = src + static_cast<std::size_t>(iy) * xs.w;
                        if (p.stride_w == 1) {
                            const int lo = std::max(0, -off_x);
                            const int hi = std::min(d.ow, xs.w - off_x);
                            for (int ox = lo; ox < hi; ++ox) {
                                drow[ox] += wv * srow[ox + off_x];
                            }
                        } else {
                            for (int ox = 0; ox < d.ow; ++ox) {
                                const int ix = ox * p.stride_w + off_x;
                                if (ix >= 0 && ix < xs.w) {
                                    drow[ox] += wv * srow[ix];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
}

void depthwise_backward(const Tensor4& x, const ConvParams& p, Pad2 pad, const ConvDims& d,
                        const double* gy, double* dx, double* dw) {
    const Shape4 xs = x.shape();
    const std::size_t iplane = static_cast<std::size_t>(xs.h) * xs.w;
    const std::size_t oplane = static_cast<std::size_t>(d.oh) * d.ow;
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            const double* src = x.data() + (static_cast<std::size_t>(n) * xs.c + c) * iplane;
            const double* g = gy + (static_cast<std::size_t>(n) * xs.c + c) * oplane;
            const double* w = p.weight.data() + static_cast<std::size_t>(c) * d.kh * d.kw;
            double* dxc = dx ? dx + (static_cast<std::size_t>(n) * xs.c + c) * iplane : nullptr;
            double* dwc = dw ? dw + static_cast<std::size_t>(c) * d.kh * d.kw : nullptr;
            for (int ky = 0; ky < d.kh; ++ky) {
                for (int kx = 0; kx < d.kw; ++kx) {
                    const double wv = w[ky * d.kw + kx];
                    const int off_x = kx * p.dilation_w - pad.w;
                    double wgrad = 0.0;
                    for (int oy = 0; oy < d.oh; ++oy) {
                        const int iy = oy * p.stride_h - pad.h + ky * p.dilation_h;
                        if (iy < 0 || iy >= xs.h) {
                            continue;
                        }
                        const double* grow = g + static_cast<std::size_t>(oy) * d.ow;
                        const double* srow = src + static_cast<std::size_t>(iy) * xs.w;
                        double* dxrow =
                            dxc ? dxc + static_cast<std::size_t>(iy) * xs.w : nullptr;
                        if (p.stride_w == 1) {
                            const int lo = std::max(0, -off_x);
                            const int hi = std::min(d.ow, xs.w - off_x);
                            if (dxrow) {
                                for (int ox = lo; ox < hi; ++ox) {
                                    dxrow[ox + off_x] += wv * grow[ox];
                                }
                            }
                            double s = 0.0;
                            for (int ox = lo; ox < hi; ++ox) {
                                s += srow[ox + off_x] * grow[ox];
                            }
                            wgrad += s;
                        } else {
                            for (int ox = 0; ox < d.ow; ++ox) {
                                const int ix = ox * p.stride_w + off_x;
                                if (ix < 0 || ix >= xs.w) {
                                    continue;
                                }
                                if (dxrow) {
                                    dxrow[ix] += wv * grow[ox];
                                }
                                wgrad += srow[ix] * grow[ox];
                            }
                        }
                    }
                    if (dwc) {
                        dwc[ky * d.kw + kx] += wgrad;
                    }
                }
            }
        }
    }
}

void conv2d_forward_into(const Tensor4& x, const ConvParams& p, Pad2 pad, const ConvDims& d,
                         double* y) {
    const Shape4 xs = x.shape();
    if (is_depthwise(xs, p, d)) {
        depthwise_forward(x, p, pad, d, y);
        return;
    }
    const int ohw = d.oh * d.ow;
    const bool pointwise = is_pointwise(p, pad, d);
    const double* wp = p.weight.data();
    const std::size_t y_img = static_cast<std::size_t>(p.weight.n()) * ohw;

    parallel_for(xs.n * p.groups, [&](int task) {
        const int n = task / p.groups;
        const int g = task % p.groups;
        const double* xn = x.data() + static_cast<std::size_t>(n) * xs.c * xs.h * xs.w;
        std::vector<double> col_buf;
        const double* col;
        if (pointwise) {
            col = xn + static_cast<std::size_t>(g) * d.cpg * xs.h * xs.w;
        } else {
            col_buf.resize(static_cast<std::size_t>(d.patch) * ohw);
            im2col(xn, xs, g * d.cpg, p, pad, d, col_buf.data());
            col = col_buf.data();
        }
        double* yg = y + static_cast<std::size_t>(n) * y_img +
                     static_cast<std::size_t>(g) * d.cog * ohw;
        gemm_acc(d.cog, ohw, d.patch, wp + static_cast<std::size_t>(g) * d.cog * d.patch,
                 d.patch, col, ohw, yg, ohw);
    });

    if (p.bias) {
        const double* bp = p.bias->data();
        const int c_out = p.weight.n();
        for (int n = 0; n < xs.n; ++n) {
            for (int c = 0; c < c_out; ++c) {
                double* row = y + static_cast<std::size_t>(n) * y_img +
                              static_cast<std::size_t>(c) * ohw;
                const double b = bp[c];
                for (int i = 0; i < ohw; ++i) {
                    row[i] += b;
                }
            }
        }
    }
}

}  // namespace

void set_num_threads(int threads) { g_threads.store(std::max(1, threads)); }
int num_threads() { return g_threads.load(); }

NormParams make_norm(int c) {
    NormParams p;
    p.gamma = Tensor4::ones({1, c, 1, 1});
    p.beta = Tensor4::zeros({1, c, 1, 1});
    p.running_mean.assign(c, 0.0);
    p.running_var.assign(c, 1.0);
    return p;
}

Shape4 conv2d_out_shape(const Shape4& x, const ConvParams& p, Pad2 pad) {
    const ConvDims d = conv_dims(x, p, pad);
    return Shape4{x.n, p.weight.n(), d.oh, d.ow};
}

Tensor4 conv2d(Tape* tape, const Tensor4& x, const ConvParams& p, Pad2 pad) {
    const ConvDims d = conv_dims(x.shape(), p, pad);
    const Shape4 ys{x.n(), p.weight.n(), d.oh, d.ow};
    std::vector<double> y(ys.numel(), 0.0);
    conv2d_forward_into(x, p, pad, d, y.data());
    Tensor4 out(ys, std::move(y));

    const bool need_x = tape && tape->tracks(x);
    const bool need_w = tape && tape->tracks(p.weight);
    const bool need_b = tape && p.bias && tape->tracks(*p.bias);
    if (!need_x && !need_w && !need_b) {
        return out;
    }

    std::vector<NodeId> parents;
    if (need_x) parents.push_back(x.node());
    if (need_w) parents.push_back(p.weight.node());
    if (need_b) parents.push_back(p.bias->node());

    const Tensor4 x_saved = x;
    const ConvParams p_saved = p;
    const NodeId xn = need_x ? x.node() : -1;
    const NodeId wn = need_w ? p.weight.node() : -1;
    const NodeId bn = need_b ? p.bias->node() : -1;

    NodeId id = tape->record(
        std::move(parents), ys.numel(),
        [x_saved, p_saved, pad, d, ys, xn, wn, bn](const std::vector<double>& gout,
                                                   Tape::Grads& sink) {
            const Shape4 xs = x_saved.shape();
            const int ohw = d.oh * d.ow;
            const bool pointwise = is_pointwise(p_saved, pad, d);
            const double* wp = p_saved.weight.data();

            if (bn >= 0) {
                auto& db = sink.buf(bn, p_saved.bias->numel());
                for (int n = 0; n < ys.n; ++n) {
                    for (int c = 0; c < ys.c; ++c) {
                        const double* row = gout.data() +
                                            (static_cast<std::size_t>(n) * ys.c + c) * ohw;
                        double s = 0.0;
                        for (int i = 0; i < ohw; ++i) {
                            s += row[i];
                        }
                        db[c] += s;
                    }
                }
            }

            std::vector<double>* dw = wn >= 0 ? &sink.buf(wn, p_saved.weight.numel()) : nullptr;
            std::vector<double>* dx = xn >= 0 ? &sink.buf(xn, xs.numel()) : nullptr;

            if (is_depthwise(xs, p_saved, d)) {
                depthwise_backward(x_saved, p_saved, pad, d, gout.data(),
                                   dx ? dx->data() : nullptr, dw ? dw->data() : nullptr);
                return;
            }

            // transposed per-group weights, shared across the batch
            std::vector<double> wT;
            if (dx) {
                wT.resize(static_cast<std::size_t>(p_saved.groups) * d.patch * d.cog);
                for (int g = 0; g < p_saved.groups; ++g) {
                    transpose(d.cog, d.patch, wp + static_cast<std::size_t>(g) * d.cog * d.patch,
                              wT.data() + static_cast<std::size_t>(g) * d.patch * d.cog);
                }
            }
            std::vector<double> col_buf, dcol;
            for (int n = 0; n < xs.n; ++n) {
                const double* xp = x_saved.data() +
                                   static_cast<std::size_t>(n) * xs.c * xs.h * xs.w;
                for (int g = 0; g < p_saved.groups; ++g) {
                    const double* gy = gout.data() +
                                       (static_cast<std::size_t>(n) * ys.c +
                                        static_cast<std::size_t>(g) * d.cog) *
                                           ohw;
                    if (dw) {
                        const double* col;
                        if (pointwise) {
                            col = xp + static_cast<std::size_t>(g) * d.cpg * xs.h * xs.w;
                        } else {
                            col_buf.resize(static_cast<std::size_t>(d.patch) * ohw);
                            im2col(xp, xs, g * d.cpg, p_saved, pad, d, col_buf.data());
                            col = col_buf.data();
                        }
                        gemm_acc_bt(d.cog, d.patch, ohw, gy, ohw, col, ohw,
                                    dw->data() + static_cast<std::size_t>(g) * d.cog * d.patch,
                                    d.patch);
                    }
                    if (dx) {
                        dcol.assign(static_cast<std::size_t>(d.patch) * ohw, 0.0);
                        gemm_acc(d.patch, ohw, d.cog,
                                 wT.data() + static_cast<std::size_t>(g) * d.patch * d.cog,
                                 d.cog, gy, ohw, dcol.data(), ohw);
                        double* dxn = dx->data() +
                                      static_cast<std::size_t>(n) * xs.c * xs.h * xs.w;
                        if (pointwise) {
                            double* dst = dxn + static_cast<std::size_t>(g) * d.cpg * xs.h * xs.w;
                            const std::size_t cnt = static_cast<std::size_t>(d.cpg) * ohw;
                            for (std::size_t i = 0; i < cnt; ++i) {
                                dst[i] += dcol[i];
                            }
                        } else {
                            col2im_acc(dcol.data(), xs, g * d.cpg, p_saved, pad, d, dxn);
                        }
                    }
                }
            }
        });
    out.bind_node(id, tape->id(), false);
    return out;
}

std::pair<Tensor4, Tensor4> channel_split(Tape* tape, const Tensor4& x) {
    if (x.c() % 2 != 0) {
        throw ConfigError("channel_split: odd channel count " + std::to_string(x.c()));
    }
    const Shape4 xs = x.shape();
    const int half = xs.c / 2;
    const Shape4 hs{xs.n, half, xs.h, xs.w};
    const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
    const std::size_t half_sz = static_cast<std::size_t>(half) * plane;

    auto slice = [&](int c0) {
        std::vector<double> v(hs.numel());
        for (int n = 0; n < xs.n; ++n) {
            std::memcpy(v.data() + static_cast<std::size_t>(n) * half_sz,
                        x.data() + (static_cast<std::size_t>(n) * xs.c + c0) * plane,
                        sizeof(double) * half_sz);
        }
        return Tensor4(hs, std::move(v));
    };
    Tensor4 lo = slice(0);
    Tensor4 hi = slice(half);

    if (tape && tape->tracks(x)) {
        const NodeId xn = x.node();
        auto record_half = [&](Tensor4& t, int c0) {
            NodeId id = tape->record(
                {xn}, hs.numel(),
                [xs, hs, xn, c0, plane, half_sz](const std::vector<double>& gout,
                                                 Tape::Grads& sink) {
                    auto& dx = sink.buf(xn, xs.numel());
                    for (int n = 0; n < xs.n; ++n) {
                        const double* src = gout.data() + static_cast<std::size_t>(n) * half_sz;
                        double* dst = dx.data() +
                                      (static_cast<std::size_t>(n) * xs.c + c0) * plane;
                        for (std::size_t i = 0; i < half_sz; ++i) {
                            dst[i] += src[i];
                        }
                    }
                });
            t.bind_node(id, tape->id(), false);
        };
        record_half(lo, 0);
        record_half(hi, half);
    }
    return {std::move(lo), std::move(hi)};
}

Tensor4 concat_channels(Tape* tape, const Tensor4& a, const Tensor4& b) {
    const Shape4 as = a.shape();
    const Shape4 bs = b.shape();
    if (as.n != bs.n || as.h != bs.h || as.w != bs.w) {
        throw DimensionError("concat_channels: incompatible shapes " + as.str() + " vs " +
                             bs.str());
    }
    const Shape4 ys{as.n, as.c + bs.c, as.h, as.w};
    const std::size_t plane = static_cast<std::size_t>(as.h) * as.w;
    const std::size_t a_sz = static_cast<std::size_t>(as.c) * plane;
    const std::size_t b_sz = static_cast<std::size_t>(bs.c) * plane;
    std::vector<double> v(ys.numel());
    for (int n = 0; n < ys.n; ++n) {
        std::memcpy(v.data() + static_cast<std::size_t>(n) * (a_sz + b_sz),
                    a.data() + static_cast<std::size_t>(n) * a_sz, sizeof(double) * a_sz);
        std::memcpy(v.data() + static_cast<std::size_t>(n) * (a_sz + b_sz) + a_sz,
                    b.data() + static_cast<std::size_t>(n) * b_sz, sizeof(double) * b_sz);
    }
    Tensor4 out(ys, std::move(v));

    const bool need_a = tape && tape->tracks(a);
    const bool need_b = tape && tape->tracks(b);
    if (tape && (need_a || need_b)) {
        std::vector<NodeId> parents;
        if (need_a) parents.push_back(a.node());
        if (need_b) parents.push_back(b.node());
        const NodeId an = need_a ? a.node() : -1;
        const NodeId bn2 = need_b ? b.node() : -1;
        const std::size_t a_numel = a.numel();
        const std::size_t b_numel = b.numel();
        NodeId id = tape->record(
            std::move(parents), ys.numel(),
            [ys, an, bn2, a_sz, b_sz, a_numel, b_numel](const std::vector<double>& gout,
                                                        Tape::Grads& sink) {
                if (an >= 0) {
                    auto& da = sink.buf(an, a_numel);
                    for (int n = 0; n < ys.n; ++n) {
                        const double* src = gout.data() +
                                            static_cast<std::size_t>(n) * (a_sz + b_sz);
                        double* dst = da.data() + static_cast<std::size_t>(n) * a_sz;
                        for (std::size_t i = 0; i < a_sz; ++i) {
                            dst[i] += src[i];
                        }
                    }
                }
                if (bn2 >= 0) {
                    auto& db = sink.buf(bn2, b_numel);
                    for (int n = 0; n < ys.n; ++n) {
                        const double* src = gout.data() +
                                            static_cast<std::size_t>(n) * (a_sz + b_sz) + a_sz;
                        double* dst = db.data() + static_cast<std::size_t>(n) * b_sz;
                        for (std::size_t i = 0; i < b_sz; ++i) {
                            dst[i] += src[i];
                        }
                    }
                }
            });
        out.bind_node(id, tape->id(), false);
    }
    return out;
}

Tensor4 channel_shuffle(Tape* tape, const Tensor4& x, int groups) {
    const Shape4 xs = x.shape();
    if (groups < 1 || xs.c % groups != 0) {
        throw ConfigError("channel_shuffle: groups " + std::to_string(groups) +
                          " does not divide channels " + std::to_string(xs.c));
    }
    const int per = xs.c / groups;
    // out channel i reads in channel (i % groups) * per + i / groups
    std::vector<int> src_of(xs.c);
    for (int i = 0; i < xs.c; ++i) {
        src_of[i] = (i % groups) * per + i / groups;
    }
    const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
    std::vector<double> v(xs.numel());
    for (int n = 0; n < xs.n; ++n) {
        for (int i = 0; i < xs.c; ++i) {
            std::memcpy(v.data() + (static_cast<std::size_t>(n) * xs.c + i) * plane,
                        x.data() + (static_cast<std::size_t>(n) * xs.c + src_of[i]) * plane,
                        sizeof(double) * plane);
        }
    }
    Tensor4 out(xs, std::move(v));
    if (tape && tape->tracks(x)) {
        const NodeId xn = x.node();
        NodeId id = tape->record(
            {xn}, xs.numel(),
            [xs, xn, src_of, plane](const std::vector<double>& gout, Tape::Grads& sink) {
                auto& dx = sink.buf(xn, xs.numel());
                for (int n = 0; n < xs.n; ++n) {
                    for (int i = 0; i < xs.c; ++i) {
                        const double* src =
                            gout.data() + (static_cast<std::size_t>(n) * xs.c + i) * plane;
                        double* dst = dx.data() +
                                      (static_cast<std::size_t>(n) * xs.c + src_of[i]) * plane;
                        for (std::size_t j = 0; j < plane; ++j) {
                            dst[j] += src[j];
                        }
                    }
                }
            });
        out.bind_node(id, tape->id(), false);
    }
    return out;
}

Tensor4 batch_norm(Tape* tape, const Tensor4& x, NormParams& p, bool training) {
    const Shape4 xs = x.shape();
    const int c = xs.c;
    if (static_cast<int>(p.running_mean.size()) != c ||
        static_cast<int>(p.running_var.size()) != c || p.gamma.numel() != static_cast<std::size_t>(c) ||
        p.beta.numel() != static_cast<std::size_t>(c)) {
        throw DimensionError("batch_norm: parameter vectors do not match " +
                             std::to_string(c) + " channels");
    }
    const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
    const std::size_t m = static_cast<std::size_t>(xs.n) * plane;  // per-channel count

    std::vector<double> mean(c, 0.0), inv_std(c, 0.0);
    if (training) {
        for (int ch = 0; ch < c; ++ch) {
            double s = 0.0;
            for (int n = 0; n < xs.n; ++n) {
                const double* row = x.data() + (static_cast<std::size_t>(n) * c + ch) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    s += row[i];
                }
            }
            mean[ch] = s / static_cast<double>(m);
            double v = 0.0;
            for (int n = 0; n < xs.n; ++n) {
                const double* row = x.data() + (static_cast<std::size_t>(n) * c + ch) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const double dlt = row[i] - mean[ch];
                    v += dlt * dlt;
                }
            }
            v /= static_cast<double>(m);
            inv_std[ch] = 1.0 / std::sqrt(v + p.epsilon);
            p.running_mean[ch] = (1.0 - p.momentum) * p.running_mean[ch] + p.momentum * mean[ch];
            p.running_var[ch] = (1.0 - p.momentum) * p.running_var[ch] + p.momentum * v;
        }
    } else {
        for (int ch = 0; ch < c; ++ch) {
            mean[ch] = p.running_mean[ch];
            inv_std[ch] = 1.0 / std::sqrt(p.running_var[ch] + p.epsilon);
        }
    }

    const double* gp = p.gamma.data();
    const double* bp = p.beta.data();
    std::vector<double> y(xs.numel());
    for (int n = 0; n < xs.n; ++n) {
        for (int ch = 0; ch < c; ++ch) {
            const double* row = x.data() + (static_cast<std::size_t>(n) * c + ch) * plane;
            double* dst = y.data() + (static_cast<std::size_t>(n) * c + ch) * plane;
            const double scale = gp[ch] * inv_std[ch];
            const double shift = bp[ch] - mean[ch] * scale;
            for (std::size_t i = 0; i < plane; ++i) {
                dst[i] = row[i] * scale + shift;
            }
        }
    }
    Tensor4 out(xs, std::move(y));

    const bool need_x = tape && tape->tracks(x);
    const bool need_g = tape && tape->tracks(p.gamma);
    const bool need_b = tape && tape->tracks(p.beta);
    if (!need_x && !need_g && !need_b) {
        return out;
    }
    std::vector<NodeId> parents;
    if (need_x) parents.push_back(x.node());
    if (need_g) parents.push_back(p.gamma.node());
    if (need_b) parents.push_back(p.beta.node());
    const NodeId xn = need_x ? x.node() : -1;
    const NodeId gn = need_g ? p.gamma.node() : -1;
    const NodeId bn = need_b ? p.beta.node() : -1;
    const Tensor4 x_saved = x;
    const Tensor4 gamma_saved = p.gamma;

    NodeId id = tape->record(
        std::move(parents), xs.numel(),
        [x_saved, gamma_saved, xs, plane, m, mean, inv_std, training, xn, gn,
         bn](const std::vector<double>& gout, Tape::Grads& sink) {
            const int c = xs.c;
            const double* gp = gamma_saved.data();
            // per-channel reductions
            std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
            for (int n = 0; n < xs.n; ++n) {
                for (int ch = 0; ch < c; ++ch) {
                    const double* go = gout.data() + (static_cast<std::size_t>(n) * c + ch) * plane;
                    const double* row =
                        x_saved.data() + (static_cast<std::size_t>(n) * c + ch) * plane;
                    double sg = 0.0, sgx = 0.0;
                    for (std::size_t i = 0; i < plane; ++i) {
                        sg += go[i];
                        sgx += go[i] * (row[i] - mean[ch]) * inv_std[ch];
                    }
                    sum_g[ch] += sg;
                    sum_gx[ch] += sgx;
                }
            }
            if (gn >= 0) {
                auto& dg = sink.buf(gn, static_cast<std::size_t>(c));
                for (int ch = 0; ch < c; ++ch) {
                    dg[ch] += sum_gx[ch];
                }
            }
            if (bn >= 0) {
                auto& db = sink.buf(bn, static_cast<std::size_t>(c));
                for (int ch = 0; ch < c; ++ch) {
                    db[ch] += sum_g[ch];
                }
            }
            if (xn >= 0) {
                auto& dx = sink.buf(xn, xs.numel());
                const double inv_m = 1.0 / static_cast<double>(m);
                for (int n = 0; n < xs.n; ++n) {
                    for (int ch = 0; ch < c; ++ch) {
                        const double* go =
                            gout.data() + (static_cast<std::size_t>(n) * c + ch) * plane;
                        const double* row =
                            x_saved.data() + (static_cast<std::size_t>(n) * c + ch) * plane;
                        double* dst = dx.data() + (static_cast<std::size_t>(n) * c + ch) * plane;
                        const double k = gp[ch] * inv_std[ch];
                        if (training) {
                            for (std::size_t i = 0; i < plane; ++i) {
                                const double xh = (row[i] - mean[ch]) * inv_std[ch];
                                dst[i] += k * (go[i] - inv_m * sum_g[ch] - xh * inv_m * sum_gx[ch]);
                            }
                        } else {
                            for (std::size_t i = 0; i < plane; ++i) {
                                dst[i] += k * go[i];
                            }
                        }
                    }
                }
            }
        });
    out.bind_node(id, tape->id(), false);
    return out;
}

Tensor4 relu(Tape* tape, const Tensor4& x) {
    const Shape4 xs = x.shape();
    std::vector<double> y(xs.numel());
    const double* xp = x.data();
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = xp[i] > 0.0 ? xp[i] : 0.0;
    }
    Tensor4 out(xs, std::move(y));
    if (tape && tape->tracks(x)) {
        const NodeId xn = x.node();
        const Tensor4 x_saved = x;
        NodeId id = tape->record({xn}, xs.numel(),
                                 [x_saved, xn](const std::vector<double>& gout, Tape::Grads& sink) {
                                     auto& dx = sink.buf(xn, x_saved.numel());
                                     const double* xp = x_saved.data();
                                     for (std::size_t i = 0; i < gout.size(); ++i) {
                                         dx[i] += xp[i] > 0.0 ? gout[i] : 0.0;
                                     }
                                 });
        out.bind_node(id, tape->id(), false);
    }
    return out;
}

Tensor4 max_pool2d(Tape* tape, const Tensor4& x) {
    const Shape4 xs = x.shape();
    if (xs.h < 2 || xs.w < 2) {
        throw DimensionError("max_pool2d: input " + xs.str() + " smaller than 2x2 window");
    }
    const int oh = (xs.h + 1) / 2;
    const int ow = (xs.w + 1) / 2;
    const Shape4 ys{xs.n, xs.c, oh, ow};
    std::vector<double> y(ys.numel());
    std::vector<std::int32_t> argmax(ys.numel());
    const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
    for (int n = 0; n < xs.n; ++n) {
        for (int ch = 0; ch < xs.c; ++ch) {
            const double* src = x.data() + (static_cast<std::size_t>(n) * xs.c + ch) * plane;
            double* dst = y.data() + (static_cast<std::size_t>(n) * xs.c + ch) *
                                         (static_cast<std::size_t>(oh) * ow);
            std::int32_t* am = argmax.data() + (static_cast<std::size_t>(n) * xs.c + ch) *
                                                   (static_cast<std::size_t>(oh) * ow);
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::int32_t best_idx = -1;
                    for (int dy = 0; dy < 2; ++dy) {
                        const int iy = oy * 2 + dy;
                        if (iy >= xs.h) break;
                        for (int dx2 = 0; dx2 < 2; ++dx2) {
                            const int ix = ox * 2 + dx2;
                            if (ix >= xs.w) break;
                            const double v = src[static_cast<std::size_t>(iy) * xs.w + ix];
                            if (v > best) {
                                best = v;
                                best_idx = static_cast<std::int32_t>(iy * xs.w + ix);
                            }
                        }
                    }
                    dst[static_cast<std::size_t>(oy) * ow + ox] = best;
                    am[static_cast<std::size_t>(oy) * ow + ox] = best_idx;
                }
            }
        }
    }
    Tensor4 out(ys, std::move(y));
    if (tape && tape->tracks(x)) {
        const NodeId xn = x.node();
        const std::size_t x_numel = xs.numel();
        const std::size_t oplane = static_cast<std::size_t>(oh) * ow;
        NodeId id = tape->record(
            {xn}, ys.numel(),
            [xn, xs, x_numel, plane, oplane, argmax = std::move(argmax)](
                const std::vector<double>& gout, Tape::Grads& sink) {
                auto& dx = sink.buf(xn, x_numel);
                const std::size_t nc = static_cast<std::size_t>(xs.n) * xs.c;
                for (std::size_t p = 0; p < nc; ++p) {
                    const double* go = gout.data() + p * oplane;
                    const std::int32_t* am = argmax.data() + p * oplane;
                    double* dst = dx.data() + p * plane;
                    for (std::size_t i = 0; i < oplane; ++i) {
                        dst[am[i]] += go[i];
                    }
                }
            });
        out.bind_node(id, tape->id(), false);
    }
    return out;
}

namespace {

struct LerpAxis {
    std::vector<int> i0, i1;
    std::vector<double> w1;  // weight of i1; weight of i0 is 1 - w1
};

LerpAxis make_lerp_axis(int in, int factor) {
    LerpAxis ax;
    const int out = in * factor;
    ax.i0.resize(out);
    ax.i1.resize(out);
    ax.w1.resize(out);
    const double scale = 1.0 / factor;
    for (int o = 0; o < out; ++o) {
        double s = (o + 0.5) * scale - 0.5;
        if (s < 0.0) {
            s = 0.0;
        }
        int lo = static_cast<int>(s);
        if (lo > in - 1) {
            lo = in - 1;
        }
        const int hi = std::min(lo + 1, in - 1);
        ax.i0[o] = lo;
        ax.i1[o] = hi;
        ax.w1[o] = s - lo;
    }
    return ax;
}

}  // namespace

Tensor4 upsample_bilinear(Tape* tape, const Tensor4& x, int factor) {
    if (factor < 1) {
        throw ConfigError("upsample_bilinear: factor must be >= 1");
    }
    if (factor == 1) {
        // identity; still produce a distinct tensor participating in the tape
        Tensor4 out(x.shape(), std::vector<double>(x.vec()));
        if (tape && tape->tracks(x)) {
            const NodeId xn = x.node();
            const std::size_t n = x.numel();
            NodeId id = tape->record({xn}, n,
                                     [xn, n](const std::vector<double>& gout, Tape::Grads& sink) {
                                         auto& dx = sink.buf(xn, n);
                                         for (std::size_t i = 0; i < n; ++i) {
                                             dx[i] += gout[i];
                                         }
                                     });
            out.bind_node(id, tape->id(), false);
        }
        return out;
    }
    const Shape4 xs = x.shape();
    const Shape4 ys{xs.n, xs.c, xs.h * factor, xs.w * factor};
    const LerpAxis ay = make_lerp_axis(xs.h, factor);
    const LerpAxis axx = make_lerp_axis(xs.w, factor);
    std::vector<double> y(ys.numel());
    const std::size_t iplane = static_cast<std::size_t>(xs.h) * xs.w;
    const std::size_t oplane = static_cast<std::size_t>(ys.h) * ys.w;
    const std::size_t nc = static_cast<std::size_t>(xs.n) * xs.c;
    for (std::size_t p = 0; p < nc; ++p) {
        const double* src = x.data() + p * iplane;
        double* dst = y.data() + p * oplane;
        for (int oy = 0; oy < ys.h; ++oy) {
            const double* r0 = src + static_cast<std::size_t>(ay.i0[oy]) * xs.w;
            const double* r1 = src + static_cast<std::size_t>(ay.i1[oy]) * xs.w;
            const double wy1 = ay.w1[oy];
            const double wy0 = 1.0 - wy1;
            double* orow = dst + static_cast<std::size_t>(oy) * ys.w;
            for (int ox = 0; ox < ys.w; ++ox) {
                const double wx1 = axx.w1[ox];
                const double wx0 = 1.0 - wx1;
                orow[ox] = wy0 * (wx0 * r0[axx.i0[ox]] + wx1 * r0[axx.i1[ox]]) +
                           wy1 * (wx0 * r1[axx.i0[ox]] + wx1 * r1[axx.i1[ox]]);
            }
        }
    }
    Tensor4 out(ys, std::move(y));
    if (tape && tape->tracks(x)) {
        const NodeId xn = x.node();
        NodeId id = tape->record(
            {xn}, ys.numel(),
            [xn, xs, ys, ay, axx, iplane, oplane, nc](const std::vector<double>& gout,
                                                      Tape::Grads& sink) {
                auto& dx = sink.buf(xn, xs.numel());
                for (std::size_t p = 0; p < nc; ++p) {
                    const double* go = gout.data() + p * oplane;
                    double* dst = dx.data() + p * iplane;
                    for (int oy = 0; oy < ys.h; ++oy) {
                        double* r0 = dst + static_cast<std::size_t>(ay.i0[oy]) * xs.w;
                        double* r1 = dst + static_cast<std::size_t>(ay.i1[oy]) * xs.w;
                        const double wy1 = ay.w1[oy];
                        const double wy0 = 1.0 - wy1;
                        const double* grow = go + static_cast<std::size_t>(oy) * ys.w;
                        for (int ox = 0; ox < ys.w; ++ox) {
                            const double g = grow[ox];
                            const double wx1 = axx.w1[ox];
                            const double wx0 = 1.0 - wx1;
                            r0[axx.i0[ox]] += wy0 * wx0 * g;
                            r0[axx.i1[ox]] += wy0 * wx1 * g;
                            r1[axx.i0[ox]] += wy1 * wx0 * g;
                            r1[axx.i1[ox]] += wy1 * wx1 * g;
                        }
                    }
                }
            });
        out.bind_node(id, tape->id(), false);
    }
    return out;
}

Tensor4 add(Tape* tape, const Tensor4& a, const Tensor4& b) {
    if (!(a.shape() == b.shape())) {
        throw DimensionError("add: shape mismatch " + a.shape().str() + " vs " +
                             b.shape().str());
    }
    std::vector<double> y(a.numel());
    const double* ap = a.data();
    const double* bp = b.data();
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = ap[i] + bp[i];
    }
    Tensor4 out(a.shape(), std::move(y));
    const bool need_a = tape && tape->tracks(a);
    const bool need_b = tape && tape->tracks(b);
    if (tape && (need_a || need_b)) {
        std::vector<NodeId> parents;
        if (need_a) parents.push_back(a.node());
        if (need_b) parents.push_back(b.node());
        const NodeId an = need_a ? a.node() : -1;
        const NodeId bn = need_b ? b.node() : -1;
        const std::size_t numel = a.numel();
        NodeId id = tape->record(std::move(parents), numel,
                                 [an, bn, numel](const std::vector<double>& gout,
                                                 Tape::Grads& sink) {
                                     if (an >= 0) {
                                         auto& da = sink.buf(an, numel);
                                         for (std::size_t i = 0; i < numel; ++i) {
                                             da[i] += gout[i];
                                         }
                                     }
                                     if (bn >= 0) {
                                         auto& db = sink.buf(bn, numel);
                                         for (std::size_t i = 0; i < numel; ++i) {
                                             db[i] += gout[i];
                                         }
                                     }
                                 });
        out.bind_node(id, tape->id(), false);
    }
    return out;
}

Tensor4 sum_all(Tape* tape, const Tensor4& x) {
    double s = 0.0;
    const double* xp = x.data();
    for (std::size_t i = 0; i < x.numel(); ++i) {
        s += xp[i];
    }
    Tensor4 out({1, 1, 1, 1}, {s});
    if (tape && tape->tracks(x)) {
        const NodeId xn = x.node();
        const std::size_t numel = x.numel();
        NodeId id = tape->record({xn}, 1,
                                 [xn, numel](const std::vector<double>& gout, Tape::Grads& sink) {
                                     auto& dx = sink.buf(xn, numel);
                                     const double g = gout[0];
                                     for (std::size_t i = 0; i < numel; ++i) {
                                         dx[i] += g;
                                     }
                                 });
        out.bind_node(id, tape->id(), false);
    }
    return out;
}

}  // namespace lrnn
