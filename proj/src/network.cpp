// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#include "network.hpp"

#include <sstream>

namespace lrnn {

NetworkSpec NetworkSpec::model(char variant, int num_classes) {
    NetworkSpec spec;
    spec.num_classes = num_classes;
    switch (variant) {
        case 'A':
        case 'a':
            break;
        case 'B':
        case 'b': {
            SVNConfig cfg;
            cfg.bottleneck_channels = 32;
            cfg.scales = {RegionGrid{8, 8}};
            spec.svn = cfg;
            break;
        }
        case 'C':
        case 'c': {
            SVNConfig cfg;
            cfg.bottleneck_channels = 32;
            cfg.scales = {RegionGrid{8, 8}, RegionGrid{4, 4}};
            spec.svn = cfg;
            break;
        }
        default:
            throw ConfigError(std::string("unknown model variant '") + variant +
                              "' (expected A, B or C)");
    }
    return spec;
}

void NetworkSpec::check() const {
    if (input_channels < 1 || num_classes < 1 || classifier_mid_channels < 1) {
        throw ConfigError("network spec: channel/class counts must be positive");
    }
    for (int c : stage_channels) {
        if (c < 2 || c % 2 != 0) {
            throw ConfigError("network spec: stage channels must be even and >= 2");
        }
    }
    for (int b : blocks_per_stage) {
        if (b < 0) {
            throw ConfigError("network spec: negative block count");
        }
    }
    if (static_cast<int>(stage3_dilations.size()) != blocks_per_stage[2]) {
        throw ConfigError("network spec: dilation list length " +
                          std::to_string(stage3_dilations.size()) +
                          " != stage-3 block count " + std::to_string(blocks_per_stage[2]));
    }
    for (int d : stage3_dilations) {
        if (d < 1) {
            throw ConfigError("network spec: dilation must be >= 1");
        }
    }
    if (!(input_channels < stage_channels[0] && stage_channels[0] < stage_channels[1] &&
          stage_channels[1] < stage_channels[2])) {
        throw ConfigError("network spec: stage channels must increase (downsample units concat a pooled copy)");
    }
    if (svn) {
        validate(*svn);
    }
}

std::string NetworkSpec::canonical() const {
    std::ostringstream os;
    os << "lrnnet-v1;in=" << input_channels << ";stages=" << stage_channels[0] << ","
       << stage_channels[1] << "," << stage_channels[2] << ";blocks=" << blocks_per_stage[0]
       << "," << blocks_per_stage[1] << "," << blocks_per_stage[2] << ";dil=";
    for (std::size_t i = 0; i < stage3_dilations.size(); ++i) {
        os << (i ? "," : "") << stage3_dilations[i];
    }
    os << ";classes=" << num_classes << ";mid=" << classifier_mid_channels << ";svn=";
    if (!svn) {
        os << "none";
    } else {
        os << svn->bottleneck_channels << ":T" << svn->power_iters << ":";
        for (std::size_t i = 0; i < svn->scales.size(); ++i) {
            os << (i ? "+" : "") << svn->scales[i].g_h << "x" << svn->scales[i].g_w;
        }
    }
    return os.str();
}

std::uint64_t NetworkSpec::hash() const {
    // FNV-1a over the canonical string
    std::uint64_t h = 1469598103934665603ULL;
    for (char ch : canonical()) {
        h ^= static_cast<unsigned char>(ch);
        h *= 1099511628211ULL;
    }
    return h;
}

Network build_lrnnet(const NetworkSpec& spec, std::uint64_t seed) {
    spec.check();
    Rng rng(mix_seed(seed, 0x6c726e6e));  // one stream consumed in build order
    Network net;
    net.spec = spec;
    net.ds1 = make_downsample(spec.input_channels, spec.stage_channels[0], rng);
    for (int i = 0; i < spec.blocks_per_stage[0]; ++i) {
        net.stage1.push_back(make_fcb(spec.stage_channels[0], 1, rng));
    }
    net.ds2 = make_downsample(spec.stage_channels[0], spec.stage_channels[1], rng);
    for (int i = 0; i < spec.blocks_per_stage[1]; ++i) {
        net.stage2.push_back(make_fcb(spec.stage_channels[1], 1, rng));
    }
    net.ds3 = make_downsample(spec.stage_channels[1], spec.stage_channels[2], rng);
    for (int i = 0; i < spec.blocks_per_stage[2]; ++i) {
        net.stage3.push_back(make_fcb(spec.stage_channels[2], spec.stage3_dilations[i], rng));
    }
    if (spec.svn) {
        SVNModuleParams svn;
        svn.cfg = *spec.svn;
        svn.conv_in = make_conv(svn.cfg.bottleneck_channels, spec.stage_channels[2], 1, 1, 1, 1,
                                1, rng, /*with_bias=*/false);
        svn.norm_in = make_norm(svn.cfg.bottleneck_channels);
        svn.conv_out = make_conv(spec.stage_channels[2], svn.cfg.bottleneck_channels, 1, 1, 1,
                                 1, 1, rng);
        net.svn = std::move(svn);
    }
    net.cls_conv3 = make_conv(spec.classifier_mid_channels, spec.stage_channels[2], 3, 3, 1, 1,
                              1, rng, /*with_bias=*/false);
    net.cls_norm = make_norm(spec.classifier_mid_channels);
    net.cls_conv1 = make_conv(spec.num_classes, spec.classifier_mid_channels, 1, 1, 1, 1, 1,
                              rng);
    return net;
}

Tensor4 network_forward(Tape* tape, Network& net, const Tensor4& x, bool training) {
    if (x.c() != net.spec.input_channels) {
        throw ConfigError("network_forward: input has " + std::to_string(x.c()) +
                          " channels, spec expects " +
                          std::to_string(net.spec.input_channels));
    }
    if (x.h() % 8 != 0 || x.w() % 8 != 0) {
        throw ConfigError("network_forward: input " + x.shape().str() +
                          " not divisible by 8 (three downsampling stages)");
    }
    Tensor4 t = downsample_unit(tape, x, net.ds1, training);
    for (auto& block : net.stage1) {
        t = fcb_forward(tape, t, block, training);
    }
    t = downsample_unit(tape, t, net.ds2, training);
    for (auto& block : net.stage2) {
        t = fcb_forward(tape, t, block, training);
    }
    t = downsample_unit(tape, t, net.ds3, training);
    for (auto& block : net.stage3) {
        t = fcb_forward(tape, t, block, training);
    }
    if (net.svn) {
        t = svn_module_forward(tape, t, *net.svn, training);
    }
    t = conv2d(tape, t, net.cls_conv3, Pad2{1, 1});
    t = batch_norm(tape, t, net.cls_norm, training);
    t = relu(tape, t);
    t = conv2d(tape, t, net.cls_conv1, Pad2{0, 0});
    return upsample_bilinear(tape, t, net.upsample_factor);
}

namespace {

using Visitor = std::function<void(const ParamEntry&)>;

void visit_conv(const std::string& prefix, ConvParams& p, const Visitor& fn) {
    fn(ParamEntry{prefix + ".weight", &p.weight, nullptr, p.weight.shape()});
    if (p.bias) {
        fn(ParamEntry{prefix + ".bias", &*p.bias, nullptr, p.bias->shape()});
    }
}

void visit_norm(const std::string& prefix, NormParams& p, const Visitor& fn) {
    fn(ParamEntry{prefix + ".gamma", &p.gamma, nullptr, p.gamma.shape()});
    fn(ParamEntry{prefix + ".beta", &p.beta, nullptr, p.beta.shape()});
    const int c = p.gamma.c();
    fn(ParamEntry{prefix + ".running_mean", nullptr, &p.running_mean, Shape4{1, c, 1, 1}});
    fn(ParamEntry{prefix + ".running_var", nullptr, &p.running_var, Shape4{1, c, 1, 1}});
}

void visit_fcb(const std::string& prefix, FCBParams& p, const Visitor& fn) {
    visit_conv(prefix + ".g1.conv31", p.g1_conv31, fn);
    visit_conv(prefix + ".g1.conv13", p.g1_conv13, fn);
    visit_norm(prefix + ".g1.norm", p.g1_norm, fn);
    visit_conv(prefix + ".g2.conv31", p.g2_conv31, fn);
    visit_conv(prefix + ".g2.conv13", p.g2_conv13, fn);
    visit_norm(prefix + ".g2.norm", p.g2_norm, fn);
    visit_conv(prefix + ".dw.conv", p.dw_conv, fn);
    visit_norm(prefix + ".dw.norm", p.dw_norm, fn);
    visit_conv(prefix + ".pw.conv", p.pw_conv, fn);
    visit_norm(prefix + ".pw.norm", p.pw_norm, fn);
}

void visit_ds(const std::string& prefix, DownsampleParams& p, const Visitor& fn) {
    visit_conv(prefix + ".conv", p.conv, fn);
    visit_norm(prefix + ".norm", p.norm, fn);
}

}  // namespace

void visit_params(Network& net, const Visitor& fn) {
    visit_ds("ds1", net.ds1, fn);
    for (std::size_t i = 0; i < net.stage1.size(); ++i) {
        visit_fcb("stage1.block" + std::to_string(i), net.stage1[i], fn);
    }
    visit_ds("ds2", net.ds2, fn);
    for (std::size_t i = 0; i < net.stage2.size(); ++i) {
        visit_fcb("stage2.block" + std::to_string(i), net.stage2[i], fn);
    }
    visit_ds("ds3", net.ds3, fn);
    for (std::size_t i = 0; i < net.stage3.size(); ++i) {
        visit_fcb("stage3.block" + std::to_string(i), net.stage3[i], fn);
    }
    if (net.svn) {
        visit_conv("svn.conv_in", net.svn->conv_in, fn);
        visit_norm("svn.norm_in", net.svn->norm_in, fn);
        visit_conv("svn.conv_out", net.svn->conv_out, fn);
    }
    visit_conv("head.conv3", net.cls_conv3, fn);
    visit_norm("head.norm", net.cls_norm, fn);
    visit_conv("head.conv1", net.cls_conv1, fn);
}

std::int64_t parameter_count(Network& net) {
    std::int64_t total = 0;
    visit_params(net, [&](const ParamEntry& e) {
        if (e.learnable()) {
            total += static_cast<std::int64_t>(e.tensor->numel());
        }
    });
    return total;
}

}  // namespace lrnn
