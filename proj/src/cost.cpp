// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#include "cost.hpp"

#include <sstream>

namespace lrnn {

const char* convention_name(Convention c) {
    return c == Convention::kMacs ? "macs" : "flops2x";
}

namespace {

std::int64_t conv_params(const ConvParams& p) {
    std::int64_t n = static_cast<std::int64_t>(p.weight.numel());
    if (p.bias) {
        n += static_cast<std::int64_t>(p.bias->numel());
    }
    return n;
}

std::int64_t norm_params(const NormParams& p) {
    return static_cast<std::int64_t>(p.gamma.numel() + p.beta.numel());
}

// MACs of a conv at a given output: out_elements * kernel_volume * c_in/groups
std::int64_t conv_macs(const ConvParams& p, int oh, int ow, int batch) {
    const auto& w = p.weight.shape();
    return static_cast<std::int64_t>(batch) * w.n * oh * ow * (w.c * w.h * w.w);
}

struct Walker {
    CostReport report;
    int n = 1, c = 0, h = 0, w = 0;
    bool with_macs = false;

    void row(const std::string& name, std::int64_t params, std::int64_t macs) {
        report.rows.push_back(CostRow{name, params, with_macs ? macs : 0});
    }
    void overhead(std::int64_t ops) {
        if (with_macs) {
            report.overhead_ops += ops;
        }
    }
    std::int64_t plane() const { return static_cast<std::int64_t>(n) * h * w; }

    void downsample(const std::string& name, DownsampleParams& p) {
        const int c_in = c;
        const int c_out = c_in + p.conv.weight.n();
        const int oh = (h + 1) / 2;
        const int ow = (w + 1) / 2;
        const std::int64_t macs = conv_macs(p.conv, oh, ow, n);
        row(name, conv_params(p.conv) + norm_params(p.norm), macs);
        const std::int64_t out_plane = static_cast<std::int64_t>(n) * oh * ow;
        overhead(out_plane * c_in * 3);     // 2x2 max pool: 3 compares per output
        overhead(out_plane * c_out * 3);    // norm (2) + relu (1)
        c = c_out;
        h = oh;
        w = ow;
    }

    void fcb(const std::string& name, FCBParams& p) {
        const std::int64_t hw = plane();
        const int half = c / 2;
        std::int64_t params = 0;
        params += conv_params(p.g1_conv31) + conv_params(p.g1_conv13) + norm_params(p.g1_norm);
        params += conv_params(p.g2_conv31) + conv_params(p.g2_conv13) + norm_params(p.g2_norm);
        params += conv_params(p.dw_conv) + norm_params(p.dw_norm);
        params += conv_params(p.pw_conv) + norm_params(p.pw_norm);
        std::int64_t macs = 0;
        macs += 4 * hw * half * (3 * half);  // two 1D convs per half
        macs += hw * c * 9;                  // depthwise 3x3
        macs += hw * c * c;                  // pointwise
        row(name, params, macs);
        // relu after 3x1, relu after half norms, relu after dw norm, final relu
        overhead(hw * c * 4);
        // three norm stages (halves count as one c-wide stage)
        overhead(hw * c * 6);
        overhead(hw * c);  // residual add
        c = p.pw_conv.weight.n();
    }

    void svn_module(SVNModuleParams& p) {
        const std::int64_t hw = plane();
        const int cp = p.cfg.bottleneck_channels;
        row("svn.conv_in", conv_params(p.conv_in) + norm_params(p.norm_in),
            hw * cp * c);
        if (p.norm_relu_after_in) {
            overhead(hw * cp * 3);
        }
        const AttentionCost ac = attention_cost_here(p.cfg);
        row("svn.attention", 0, ac.attention_macs);
        row("svn.power_iter", 0, ac.power_iter_macs);
        row("svn.conv_out", conv_params(p.conv_out), hw * c * cp);
        overhead(hw * c);  // residual add
    }

    AttentionCost attention_cost_here(const SVNConfig& cfg) const {
        AttentionCost total;
        const std::int64_t n_px = static_cast<std::int64_t>(h) * w;
        total.attention_macs = static_cast<std::int64_t>(n) * 2 * cfg.bottleneck_channels *
                               n_px * cfg.total_regions();
        for (const auto& g : cfg.scales) {
            const std::int64_t ph = static_cast<std::int64_t>((h + g.g_h - 1) / g.g_h) * g.g_h;
            const std::int64_t pw = static_cast<std::int64_t>((w + g.g_w - 1) / g.g_w) * g.g_w;
            total.power_iter_macs += static_cast<std::int64_t>(n) * 2 * cfg.power_iters *
                                     cfg.bottleneck_channels * ph * pw;
        }
        return total;
    }

    void classifier(Network& net) {
        const std::int64_t hw = plane();
        const int mid = net.cls_conv3.weight.n();
        row("head.conv3", conv_params(net.cls_conv3) + norm_params(net.cls_norm),
            hw * mid * 9 * c);
        overhead(hw * mid * 3);  // norm + relu
        const int classes = net.cls_conv1.weight.n();
        row("head.conv1", conv_params(net.cls_conv1), hw * classes * mid);
        const int f = net.upsample_factor;
        overhead(hw * static_cast<std::int64_t>(f) * f * classes * 8);  // bilinear lerps
        c = classes;
        h *= f;
        w *= f;
    }
};

CostReport walk(Network& net, const Shape4* input, Convention convention) {
    Walker wk;
    wk.with_macs = input != nullptr;
    if (input) {
        if (input->h % 8 != 0 || input->w % 8 != 0) {
            throw ConfigError("count_flops: input " + input->str() + " not divisible by 8");
        }
        wk.n = input->n;
        wk.c = input->c;
        wk.h = input->h;
        wk.w = input->w;
        wk.report.input_shape = *input;
    } else {
        wk.n = 1;
        wk.c = net.spec.input_channels;
        wk.h = 8;
        wk.w = 8;
    }
    wk.report.convention = convention;

    wk.downsample("ds1", net.ds1);
    for (std::size_t i = 0; i < net.stage1.size(); ++i) {
        wk.fcb("stage1.block" + std::to_string(i), net.stage1[i]);
    }
    wk.downsample("ds2", net.ds2);
    for (std::size_t i = 0; i < net.stage2.size(); ++i) {
        wk.fcb("stage2.block" + std::to_string(i), net.stage2[i]);
    }
    wk.downsample("ds3", net.ds3);
    for (std::size_t i = 0; i < net.stage3.size(); ++i) {
        wk.fcb("stage3.block" + std::to_string(i), net.stage3[i]);
    }
    if (net.svn) {
        wk.svn_module(*net.svn);
    }
    wk.classifier(net);

    for (const auto& r : wk.report.rows) {
        wk.report.total_params += r.params;
        wk.report.total_macs += r.macs;
    }
    return wk.report;
}

}  // namespace

CostReport count_params(Network& net) { return walk(net, nullptr, Convention::kMacs); }

CostReport count_flops(Network& net, Shape4 input, Convention convention) {
    return walk(net, &input, convention);
}

AttentionCost attention_flops(int channels, int n_pixels, int s_total, int t_iters,
                              int n_scales) {
    if (channels < 1 || n_pixels < 1 || s_total < 1 || t_iters < 1 || n_scales < 1) {
        throw ConfigError("attention_flops: arguments must be positive");
    }
    AttentionCost c;
    c.attention_macs =
        2LL * channels * static_cast<std::int64_t>(n_pixels) * s_total;
    c.power_iter_macs =
        2LL * t_iters * channels * static_cast<std::int64_t>(n_pixels) * n_scales;
    return c;
}

std::int64_t standard_nonlocal_macs(int channels, int n_pixels) {
    return 2LL * channels * static_cast<std::int64_t>(n_pixels) * n_pixels;
}

std::string CostReport::csv() const {
    std::ostringstream os;
    os << "layer,params,macs,flops2x\n";
    for (const auto& r : rows) {
        os << r.layer << "," << r.params << "," << r.macs << "," << 2 * r.macs << "\n";
    }
    os << "overhead,0," << overhead_ops << "," << overhead_ops << "\n";
    os << "total," << total_params << "," << total_macs + overhead_ops << ","
       << 2 * total_macs + overhead_ops << "\n";
    return os.str();
}

}  // namespace lrnn
