// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Talks to the core exclusively through the shared
// library's C API. Exit codes: 0 success, 2 usage/config, 3 checkpoint,
// 4 I/O, 1 anything else.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lrnnet/lrnnet.h"

namespace {

int exit_code(lrn_status s) {
    switch (s) {
        case LRN_OK:
            return 0;
        case LRN_ERR_INVALID_ARG:
        case LRN_ERR_CONFIG:
            return 2;
        case LRN_ERR_CHECKPOINT:
            return 3;
        case LRN_ERR_IO:
            return 4;
        default:
            return 1;
    }
}

[[noreturn]] void fail(lrn_status s) {
    std::fprintf(stderr, "error: %s\n", lrn_last_error());
    std::exit(exit_code(s));
}

#define CHECK(call)                 \
    do {                            \
        lrn_status s_ = (call);     \
        if (s_ != LRN_OK) fail(s_); \
    } while (0)

struct NetHandle {
    lrn_net* net = nullptr;
    ~NetHandle() { lrn_net_destroy(net); }
};

struct DatasetHandle {
    lrn_dataset* data = nullptr;
    ~DatasetHandle() { lrn_dataset_destroy(data); }
};

bool parse_size(const std::string& text, int* h, int* w) {
    return std::sscanf(text.c_str(), "%dx%d", h, w) == 2 && *h > 0 && *w > 0;
}

// Reference cost figures for the 512x1024 operating point, used for the
// side-by-side deltas printed by `audit`.
struct Reference {
    double params_m;
    double gflops;
};
Reference reference_for(char variant) {
    switch (variant) {
        case 'A':
            return {0.67, 8.48};
        case 'B':
            return {0.68, 8.57};
        default:
            return {0.68, 8.58};
    }
}

struct CommonOpts {
    std::string model = "C";
    std::string size = "512x1024";
    std::string grids;
    int power_iters = 2;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string convention = "macs";
    std::string out;
};

void add_model_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--model", o.model, "Model variant: A, B or C")
        ->check(CLI::IsMember({"A", "B", "C", "a", "b", "c"}));
    cmd->add_option("--grids", o.grids, "Region grids, e.g. 8x8,4x4");
    cmd->add_option("--power-iters", o.power_iters, "Power iteration count T");
    cmd->add_option("--seed", o.seed, "Random seed");
}

NetHandle make_net(const CommonOpts& o, int num_classes) {
    lrn_net_options opts;
    lrn_net_options_defaults(&opts);
    opts.variant = o.model[0];
    opts.num_classes = num_classes;
    opts.seed = o.seed;
    opts.power_iters = o.power_iters;
    opts.grids = o.grids.empty() ? nullptr : o.grids.c_str();
    NetHandle h;
    CHECK(lrn_net_create(&opts, &h.net));
    return h;
}

double as_gops(std::int64_t n) { return static_cast<double>(n) / 1e9; }
double as_mops(std::int64_t n) { return static_cast<double>(n) / 1e6; }

int cmd_audit(const CommonOpts& o, int num_classes) {
    int h = 0, w = 0;
    if (!parse_size(o.size, &h, &w)) {
        std::fprintf(stderr, "error: bad --size '%s' (expected HxW)\n", o.size.c_str());
        return 2;
    }
    NetHandle net = make_net(o, num_classes);
    lrn_report* report = nullptr;
    CHECK(lrn_audit(net.net, h, w, &report));
    std::unique_ptr<lrn_report, decltype(&lrn_report_destroy)> guard(report,
                                                                     &lrn_report_destroy);

    const std::int64_t params = lrn_report_total_params(report);
    const std::int64_t macs = lrn_report_total_macs(report);
    const std::int64_t overhead = lrn_report_overhead_ops(report);
    const bool flops2x = o.convention == "flops2x";
    const double total_ops = (flops2x ? 2.0 * macs : static_cast<double>(macs)) + overhead;

    int cin = 0, mid = 0, cls = 0;
    lrn_net_classifier_widths(net.net, &cin, &mid, &cls);
    char desc[256] = {0};
    lrn_net_spec_string(net.net, desc, sizeof(desc));

    std::printf("model %c at %dx%d (convention: %s)\n", o.model[0], h, w,
                flops2x ? "flops2x" : "macs");
    std::printf("  structure: %s\n", desc);
    std::printf("  classifier widths: %d -> %d -> %d\n", cin, mid, cls);
    std::printf("  parameters: %" PRId64 " (%.4f M)\n", params, params / 1e6);
    std::printf("  conv+attention: %.4f G%s, overhead: %.4f G, total: %.4f G\n",
                flops2x ? 2.0 * as_gops(macs) : as_gops(macs), flops2x ? "FLOPs" : "MACs",
                as_gops(overhead), total_ops / 1e9);
    if (h == 512 && w == 1024 && num_classes == 19) {
        const Reference ref = reference_for(std::toupper(o.model[0]));
        std::printf("  reference: %.2f M params  -> delta %+.2f%%\n", ref.params_m,
                    100.0 * (params / 1e6 / ref.params_m - 1.0));
        std::printf("  reference: %.2f GFLOPS    -> delta %+.2f%% (macs convention)\n",
                    ref.gflops, 100.0 * ((as_gops(macs) + as_gops(overhead)) / ref.gflops - 1.0));
    }
    if (!o.out.empty()) {
        CHECK(lrn_report_write_csv(report, o.out.c_str()));
        std::printf("  wrote %s\n", o.out.c_str());
    }
    return 0;
}

int cmd_svn_demo(const CommonOpts& o, int reps, bool per_region) {
    lrn_svn_demo_options opts;
    lrn_svn_demo_options_defaults(&opts);
    opts.seed = o.seed;
    opts.power_iters = o.power_iters;
    opts.bench_reps = reps;
    opts.threads = o.threads;
    if (!o.grids.empty()) {
        opts.grids = o.grids.c_str();
    }
    lrn_svn_demo* demo = nullptr;
    CHECK(lrn_svn_demo_run(&opts, &demo));
    std::unique_ptr<lrn_svn_demo, decltype(&lrn_svn_demo_destroy)> guard(
        demo, &lrn_svn_demo_destroy);

    const int regions = lrn_svn_demo_region_count(demo);
    std::printf("svn demo: %dx%dx%d block, T=%d, %d keys\n", opts.channels, opts.height,
                opts.width, opts.power_iters, regions);
    if (per_region) {
        for (int i = 0; i < regions; ++i) {
            std::printf("  region %3d: |cos| = %.6f\n", i, lrn_svn_demo_cosine(demo, i));
        }
    }
    std::printf("  key fidelity vs exact SVD: min |cos| = %.6f, median = %.6f\n",
                lrn_svn_demo_min_cosine(demo), lrn_svn_demo_median_cosine(demo));
    std::printf("  reduced attention:  %.2f MMACs (macs convention)\n",
                as_mops(lrn_svn_demo_attention_macs(demo)));
    std::printf("  power iteration:    %.2f MMACs\n",
                as_mops(lrn_svn_demo_power_iter_macs(demo)));
    std::printf("  standard non-local: %.2f GMACs\n",
                as_gops(lrn_svn_demo_standard_macs(demo)));
    std::printf("  reduced vs standard(K=V=keys, no normalizer): max |diff| = %.3e\n",
                lrn_svn_demo_max_abs_diff(demo));
    const double rms = lrn_svn_demo_reduced_ms(demo);
    const double sms = lrn_svn_demo_standard_ms(demo);
    std::printf("  timing: reduced %.3f ms, standard %.3f ms (%.1fx)\n", rms, sms,
                sms / (rms > 0 ? rms : 1e-9));
    return 0;
}

void progress_printer(int iter, double lr, double loss, void* user) {
    const int every = *static_cast<int*>(user);
    if (every > 0 && (iter % every == 0)) {
        std::printf("iter %5d  lr %.6f  loss %.6f\n", iter, lr, loss);
        std::fflush(stdout);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lrnnet: factorized-convolution segmentation network with reduced "
                 "non-local attention"};
    app.require_subcommand(1);

    CommonOpts common;
    int num_classes = 19;
    int data_classes = 5;
    std::string data_size = "64x128";
    int train_size = 512, val_size = 64;
    std::uint64_t data_seed = 1234;
    int iters = 2000, batch = 8, log_every = 100, ckpt_every = 0, reps = 10;
    double lr = 0.01, wd = 1e-4;
    std::string ckpt, resume, input, output, split = "val";
    bool per_region = false, bench_attention = false;

    auto add_data_flags = [&](CLI::App* cmd) {
        cmd->add_option("--data-size", data_size, "Synthetic image size HxW");
        cmd->add_option("--classes", data_classes, "Synthetic class count (incl. background)");
        cmd->add_option("--train-size", train_size, "Training split size");
        cmd->add_option("--val-size", val_size, "Validation split size");
        cmd->add_option("--data-seed", data_seed, "Dataset seed");
    };
    auto make_data = [&]() {
        lrn_synth_options so;
        lrn_synth_options_defaults(&so);
        int dh = 0, dw = 0;
        if (!parse_size(data_size, &dh, &dw)) {
            std::fprintf(stderr, "error: bad --data-size '%s'\n", data_size.c_str());
            std::exit(2);
        }
        so.height = dh;
        so.width = dw;
        so.num_classes = data_classes;
        so.train_size = train_size;
        so.val_size = val_size;
        so.seed = data_seed;
        DatasetHandle d;
        CHECK(lrn_dataset_generate(&so, &d.data));
        return d;
    };

    CLI::App* audit = app.add_subcommand("audit", "Parameter and FLOP accounting");
    add_model_flags(audit, common);
    audit->add_option("--size", common.size, "Input size HxW (default 512x1024)");
    audit->add_option("--classes", num_classes, "Class count (default 19)");
    audit->add_option("--convention", common.convention, "macs or flops2x")
        ->check(CLI::IsMember({"macs", "flops2x"}));
    audit->add_option("--out", common.out, "Write per-layer CSV here");

    CLI::App* demo = app.add_subcommand("svn-demo", "Key fidelity, cost arithmetic and "
                                                    "reduced-vs-standard comparison");
    add_model_flags(demo, common);
    demo->add_option("--reps", reps, "Benchmark repetitions (>= 10)");
    demo->add_option("--threads", common.threads, "Compute threads");
    demo->add_flag("--per-region", per_region, "Print every region's cosine");

    CLI::App* bench = app.add_subcommand("bench", "Forward-pass latency");
    add_model_flags(bench, common);
    bench->add_option("--size", common.size, "Input size HxW");
    bench->add_option("--classes", num_classes, "Class count");
    bench->add_option("--reps", reps, "Repetitions (>= 10)");
    bench->add_option("--threads", common.threads, "Compute threads");
    bench->add_flag("--attention", bench_attention,
                    "Also compare reduced vs standard non-local");

    CLI::App* train = app.add_subcommand("train", "Train on synthetic data");
    add_model_flags(train, common);
    add_data_flags(train);
    train->add_option("--iters", iters, "Iterations (default 2000)");
    train->add_option("--batch", batch, "Batch size (default 8)");
    train->add_option("--lr", lr, "Base learning rate (default 0.01)");
    train->add_option("--weight-decay", wd, "Weight decay (default 1e-4)");
    train->add_option("--threads", common.threads, "Compute threads");
    train->add_option("--out", common.out, "Training log CSV path");
    train->add_option("--ckpt", ckpt, "Checkpoint path");
    train->add_option("--ckpt-every", ckpt_every, "Also checkpoint every N iterations");
    train->add_option("--resume", resume, "Resume from checkpoint");
    train->add_option("--log-every", log_every, "Print progress every N iterations");

    CLI::App* eval = app.add_subcommand("eval", "Per-class IoU of a checkpoint");
    add_model_flags(eval, common);
    add_data_flags(eval);
    eval->add_option("--ckpt", ckpt, "Checkpoint path")->required();
    eval->add_option("--split", split, "train or val")
        ->check(CLI::IsMember({"train", "val"}));

    CLI::App* infer = app.add_subcommand("infer", "Segment one PPM image");
    add_model_flags(infer, common);
    infer->add_option("--classes", data_classes, "Class count of the checkpoint");
    infer->add_option("--ckpt", ckpt, "Checkpoint path")->required();
    infer->add_option("--input", input, "Input binary PPM")->required();
    infer->add_option("--output", output, "Output binary PGM")->required();

    CLI::App* gen = app.add_subcommand("gen-data", "Export the synthetic dataset");
    gen->add_option("--seed", data_seed, "Dataset seed");
    add_data_flags(gen);
    gen->add_option("--out", common.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (audit->parsed()) {
        return cmd_audit(common, num_classes);
    }
    if (demo->parsed()) {
        return cmd_svn_demo(common, reps, per_region);
    }
    if (bench->parsed()) {
        int h = 0, w = 0;
        if (!parse_size(common.size, &h, &w)) {
            std::fprintf(stderr, "error: bad --size '%s'\n", common.size.c_str());
            return 2;
        }
        NetHandle net = make_net(common, num_classes);
        double median = 0, mean = 0, p95 = 0;
        CHECK(lrn_bench_net(net.net, h, w, reps, common.threads, &median, &mean, &p95));
        std::printf("forward %c @%dx%d: median %.2f ms, mean %.2f ms, p95 %.2f ms "
                    "(%d reps, %d threads)\n",
                    common.model[0], h, w, median, mean, p95, reps, common.threads);
        if (bench_attention) {
            return cmd_svn_demo(common, reps, false);
        }
        return 0;
    }
    if (train->parsed()) {
        DatasetHandle data = make_data();
        NetHandle net = make_net(common, data_classes);
        lrn_train_options to;
        lrn_train_options_defaults(&to);
        to.base_lr = lr;
        to.weight_decay = wd;
        to.max_iters = iters;
        to.batch_size = batch;
        to.checkpoint_every = ckpt_every;
        to.threads = common.threads;
        to.seed = common.seed;
        to.log_path = common.out.empty() ? nullptr : common.out.c_str();
        to.checkpoint_path = ckpt.empty() ? nullptr : ckpt.c_str();
        to.resume_path = resume.empty() ? nullptr : resume.c_str();
        double first = 0, last = 0;
        CHECK(lrn_train_run(net.net, data.data, &to, progress_printer, &log_every, &first,
                            &last));
        std::printf("train done: initial loss %.6f, final loss %.6f (%.1f%%)\n", first, last,
                    first > 0 ? 100.0 * last / first : 0.0);
        return 0;
    }
    if (eval->parsed()) {
        DatasetHandle data = make_data();
        NetHandle net = make_net(common, data_classes);
        CHECK(lrn_net_load(net.net, ckpt.c_str()));
        lrn_eval_result r;
        CHECK(lrn_eval_run(net.net, data.data, split == "train", &r));
        std::printf("split: %s\n", split.c_str());
        std::printf("class  iou\n");
        for (int c = 0; c < r.num_classes; ++c) {
            std::printf("%5d  %.4f%s\n", c, r.class_iou[c],
                        r.class_in_gt[c] ? "" : "  (absent in gt)");
        }
        std::printf("mean IoU: %.4f   pixel accuracy: %.4f\n", r.mean_iou, r.pixel_acc);
        return 0;
    }
    if (infer->parsed()) {
        NetHandle net = make_net(common, data_classes);
        CHECK(lrn_net_load(net.net, ckpt.c_str()));
        CHECK(lrn_infer_image(net.net, input.c_str(), output.c_str()));
        std::printf("wrote %s\n", output.c_str());
        return 0;
    }
    if (gen->parsed()) {
        DatasetHandle data = make_data();
        CHECK(lrn_dataset_export(data.data, common.out.c_str()));
        std::printf("wrote dataset under %s\n", common.out.c_str());
        return 0;
    }
    return 2;
}
