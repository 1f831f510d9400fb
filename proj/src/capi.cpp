// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0
//
// extern "C" surface over the C++ core. Exceptions are mapped onto status
// codes here; a thread-local string keeps the last failure message.

#include "lrnnet/lrnnet.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "bench.hpp"
#include "checkpoint.hpp"
#include "cost.hpp"
#include "image_io.hpp"
#include "linalg.hpp"
#include "loss.hpp"
#include "network.hpp"
#include "ops.hpp"
#include "svn.hpp"
#include "synth.hpp"
#include "trainer.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

template <typename Fn>
lrn_status wrap(Fn&& fn) noexcept {
    try {
        fn();
        return LRN_OK;
    } catch (const lrnn::ConfigError& e) {
        set_error(e.what());
        return LRN_ERR_CONFIG;
    } catch (const lrnn::DimensionError& e) {
        set_error(e.what());
        return LRN_ERR_CONFIG;
    } catch (const lrnn::CheckpointError& e) {
        set_error(e.what());
        return LRN_ERR_CHECKPOINT;
    } catch (const lrnn::IoError& e) {
        set_error(e.what());
        return LRN_ERR_IO;
    } catch (const lrnn::NumericError& e) {
        set_error(e.what());
        return LRN_ERR_NUMERIC;
    } catch (const lrnn::DataError& e) {
        set_error(e.what());
        return LRN_ERR_DATA;
    } catch (const std::exception& e) {
        set_error(e.what());
        return LRN_ERR_INTERNAL;
    } catch (...) {
        set_error("unknown error");
        return LRN_ERR_INTERNAL;
    }
}

std::vector<lrnn::RegionGrid> parse_grids(const char* text) {
    std::vector<lrnn::RegionGrid> grids;
    std::string s(text);
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t comma = s.find(',', pos);
        if (comma == std::string::npos) {
            comma = s.size();
        }
        const std::string part = s.substr(pos, comma - pos);
        int gh = 0, gw = 0;
        if (std::sscanf(part.c_str(), "%dx%d", &gh, &gw) != 2 || gh < 1 || gw < 1) {
            throw lrnn::ConfigError("bad region grid '" + part + "' (expected GxG)");
        }
        grids.push_back(lrnn::RegionGrid{gh, gw});
        pos = comma + 1;
    }
    if (grids.empty()) {
        throw lrnn::ConfigError("empty region grid list");
    }
    return grids;
}

}  // namespace

struct lrn_net {
    lrnn::Network net;
};

struct lrn_report {
    lrnn::CostReport report;
};

struct lrn_dataset {
    lrnn::SynthDataset data;
};

struct lrn_svn_demo {
    std::vector<double> cosines;
    double min_cosine = 0.0;
    double median_cosine = 0.0;
    std::int64_t attention_macs = 0;
    std::int64_t power_iter_macs = 0;
    std::int64_t standard_macs = 0;
    double max_abs_diff = 0.0;
    double reduced_ms = 0.0;
    double standard_ms = 0.0;
};

extern "C" {

const char* lrn_version(void) { return "lrnnet 1.0.0"; }

const char* lrn_last_error(void) { return g_last_error.c_str(); }

void lrn_net_options_defaults(lrn_net_options* opts) {
    if (!opts) {
        return;
    }
    opts->variant = 'C';
    opts->num_classes = 19;
    opts->seed = 1;
    opts->grids = nullptr;
    opts->power_iters = 2;
}

lrn_status lrn_net_create(const lrn_net_options* opts, lrn_net** out) {
    return wrap([&] {
        if (!opts || !out) {
            throw lrnn::ConfigError("lrn_net_create: null argument");
        }
        lrnn::NetworkSpec spec = lrnn::NetworkSpec::model(
            opts->variant, opts->num_classes > 0 ? opts->num_classes : 19);
        if (spec.svn) {
            if (opts->grids) {
                spec.svn->scales = parse_grids(opts->grids);
            }
            if (opts->power_iters > 0) {
                spec.svn->power_iters = opts->power_iters;
            }
        } else if (opts->grids) {
            throw lrnn::ConfigError("model A has no SVN module; --grids is not applicable");
        }
        *out = new lrn_net{lrnn::build_lrnnet(spec, opts->seed)};
    });
}

void lrn_net_destroy(lrn_net* net) { delete net; }

int64_t lrn_net_param_count(lrn_net* net) {
    return net ? lrnn::parameter_count(net->net) : 0;
}

void lrn_net_classifier_widths(lrn_net* net, int* in_ch, int* mid_ch, int* classes) {
    if (!net) {
        return;
    }
    if (in_ch) {
        *in_ch = net->net.spec.stage_channels[2];
    }
    if (mid_ch) {
        *mid_ch = net->net.spec.classifier_mid_channels;
    }
    if (classes) {
        *classes = net->net.spec.num_classes;
    }
}

lrn_status lrn_net_spec_string(lrn_net* net, char* buf, size_t len) {
    return wrap([&] {
        if (!net || !buf || len == 0) {
            throw lrnn::ConfigError("lrn_net_spec_string: null argument");
        }
        const std::string s = net->net.spec.canonical();
        std::snprintf(buf, len, "%s", s.c_str());
    });
}

lrn_status lrn_net_save(lrn_net* net, const char* path) {
    return wrap([&] {
        if (!net || !path) {
            throw lrnn::ConfigError("lrn_net_save: null argument");
        }
        lrnn::save_checkpoint(path, net->net, nullptr);
    });
}

lrn_status lrn_net_load(lrn_net* net, const char* path) {
    return wrap([&] {
        if (!net || !path) {
            throw lrnn::ConfigError("lrn_net_load: null argument");
        }
        lrnn::load_checkpoint(path, net->net, nullptr);
    });
}

lrn_status lrn_audit(lrn_net* net, int height, int width, lrn_report** out) {
    return wrap([&] {
        if (!net || !out) {
            throw lrnn::ConfigError("lrn_audit: null argument");
        }
        *out = new lrn_report{lrnn::count_flops(
            net->net, lrnn::Shape4{1, net->net.spec.input_channels, height, width},
            lrnn::Convention::kMacs)};
    });
}

void lrn_report_destroy(lrn_report* report) { delete report; }

int lrn_report_row_count(const lrn_report* report) {
    return report ? static_cast<int>(report->report.rows.size()) : 0;
}

lrn_status lrn_report_row(const lrn_report* report, int index, const char** layer,
                          int64_t* params, int64_t* macs) {
    return wrap([&] {
        if (!report || index < 0 || index >= static_cast<int>(report->report.rows.size())) {
            throw lrnn::ConfigError("lrn_report_row: index out of range");
        }
        const auto& row = report->report.rows[index];
        if (layer) {
            *layer = row.layer.c_str();
        }
        if (params) {
            *params = row.params;
        }
        if (macs) {
            *macs = row.macs;
        }
    });
}

int64_t lrn_report_total_params(const lrn_report* report) {
    return report ? report->report.total_params : 0;
}

int64_t lrn_report_total_macs(const lrn_report* report) {
    return report ? report->report.total_macs : 0;
}

int64_t lrn_report_overhead_ops(const lrn_report* report) {
    return report ? report->report.overhead_ops : 0;
}

lrn_status lrn_report_write_csv(const lrn_report* report, const char* path) {
    return wrap([&] {
        if (!report || !path) {
            throw lrnn::ConfigError("lrn_report_write_csv: null argument");
        }
        std::ofstream out(path);
        if (!out) {
            throw lrnn::IoError(std::string("cannot open '") + path + "' for writing");
        }
        out << report->report.csv();
        if (!out) {
            throw lrnn::IoError(std::string("write to '") + path + "' failed");
        }
    });
}

void lrn_attention_macs(int channels, int n_pixels, int s_total, int power_iters,
                        int n_scales, int64_t* attention_macs, int64_t* power_iter_macs) {
    const lrnn::AttentionCost c =
        lrnn::attention_flops(channels, n_pixels, s_total, power_iters, n_scales);
    if (attention_macs) {
        *attention_macs = c.attention_macs;
    }
    if (power_iter_macs) {
        *power_iter_macs = c.power_iter_macs;
    }
}

int64_t lrn_standard_nonlocal_macs(int channels, int n_pixels) {
    return lrnn::standard_nonlocal_macs(channels, n_pixels);
}

void lrn_synth_options_defaults(lrn_synth_options* opts) {
    if (!opts) {
        return;
    }
    const lrnn::SynthConfig d;
    opts->height = d.height;
    opts->width = d.width;
    opts->num_classes = d.num_classes;
    opts->min_shapes = d.min_shapes;
    opts->max_shapes = d.max_shapes;
    opts->noise_stddev = d.noise_stddev;
    opts->train_size = d.train_size;
    opts->val_size = d.val_size;
    opts->seed = d.seed;
}

namespace {

lrnn::SynthConfig to_synth_config(const lrn_synth_options* opts) {
    lrnn::SynthConfig cfg;
    cfg.height = opts->height;
    cfg.width = opts->width;
    cfg.num_classes = opts->num_classes;
    cfg.min_shapes = opts->min_shapes;
    cfg.max_shapes = opts->max_shapes;
    cfg.noise_stddev = opts->noise_stddev;
    cfg.train_size = opts->train_size;
    cfg.val_size = opts->val_size;
    cfg.seed = opts->seed;
    return cfg;
}

}  // namespace

lrn_status lrn_dataset_generate(const lrn_synth_options* opts, lrn_dataset** out) {
    return wrap([&] {
        if (!opts || !out) {
            throw lrnn::ConfigError("lrn_dataset_generate: null argument");
        }
        *out = new lrn_dataset{lrnn::gen_synthetic_dataset(to_synth_config(opts))};
    });
}

void lrn_dataset_destroy(lrn_dataset* data) { delete data; }

lrn_status lrn_dataset_export(const lrn_dataset* data, const char* dir) {
    return wrap([&] {
        if (!data || !dir) {
            throw lrnn::ConfigError("lrn_dataset_export: null argument");
        }
        namespace fs = std::filesystem;
        const auto write_split = [&](const std::vector<lrnn::Sample>& samples,
                                     const char* name) {
            const fs::path base = fs::path(dir) / name;
            std::error_code ec;
            fs::create_directories(base, ec);
            if (ec) {
                throw lrnn::IoError("cannot create directory '" + base.string() + "'");
            }
            char file[64];
            for (std::size_t i = 0; i < samples.size(); ++i) {
                std::snprintf(file, sizeof(file), "img_%05zu.ppm", i);
                lrnn::write_ppm((base / file).string(), samples[i].image);
                std::snprintf(file, sizeof(file), "mask_%05zu.pgm", i);
                lrnn::write_pgm((base / file).string(), samples[i].mask,
                                samples[i].image.h(), samples[i].image.w());
            }
        };
        write_split(data->data.train, "train");
        write_split(data->data.val, "val");
    });
}

void lrn_train_options_defaults(lrn_train_options* opts) {
    if (!opts) {
        return;
    }
    const lrnn::TrainConfig d;
    opts->base_lr = d.base_lr;
    opts->lr_power = d.lr_power;
    opts->momentum = d.momentum;
    opts->weight_decay = d.weight_decay;
    opts->max_iters = d.max_iters;
    opts->batch_size = d.batch_size;
    opts->checkpoint_every = d.checkpoint_every;
    opts->threads = 1;
    opts->seed = d.seed;
    opts->log_path = nullptr;
    opts->checkpoint_path = nullptr;
    opts->resume_path = nullptr;
}

lrn_status lrn_train_run(lrn_net* net, const lrn_dataset* data, const lrn_train_options* opts,
                         lrn_progress_fn progress, void* user, double* initial_loss,
                         double* final_loss) {
    return wrap([&] {
        if (!net || !data || !opts) {
            throw lrnn::ConfigError("lrn_train_run: null argument");
        }
        lrnn::TrainConfig cfg;
        cfg.base_lr = opts->base_lr;
        cfg.lr_power = opts->lr_power;
        cfg.momentum = opts->momentum;
        cfg.weight_decay = opts->weight_decay;
        cfg.max_iters = opts->max_iters;
        cfg.batch_size = opts->batch_size;
        cfg.checkpoint_every = opts->checkpoint_every;
        cfg.threads = opts->threads > 0 ? opts->threads : 1;
        cfg.seed = opts->seed;
        if (opts->log_path) {
            cfg.log_path = opts->log_path;
        }
        if (opts->checkpoint_path) {
            cfg.checkpoint_path = opts->checkpoint_path;
        }
        lrnn::ProgressFn cb;
        if (progress) {
            cb = [progress, user](int iter, double lr, double loss) {
                progress(iter, lr, loss, user);
            };
        }
        const lrnn::TrainResult r =
            lrnn::train(net->net, data->data.train, cfg, cb,
                        opts->resume_path ? opts->resume_path : std::string());
        if (initial_loss) {
            *initial_loss = r.initial_loss;
        }
        if (final_loss) {
            *final_loss = r.final_loss;
        }
    });
}

lrn_status lrn_eval_run(lrn_net* net, const lrn_dataset* data, int use_train_split,
                        lrn_eval_result* out) {
    return wrap([&] {
        if (!net || !data || !out) {
            throw lrnn::ConfigError("lrn_eval_run: null argument");
        }
        const int classes = net->net.spec.num_classes;
        if (classes > LRN_MAX_CLASSES) {
            throw lrnn::ConfigError("lrn_eval_run: more than LRN_MAX_CLASSES classes");
        }
        const auto& split = use_train_split ? data->data.train : data->data.val;
        if (split.empty()) {
            throw lrnn::ConfigError("lrn_eval_run: requested split is empty");
        }
        const lrnn::SegmentationScore s = lrnn::evaluate_miou(net->net, split);
        out->num_classes = classes;
        out->mean_iou = s.mean_iou;
        out->pixel_acc = s.pixel_acc;
        for (int c = 0; c < classes; ++c) {
            out->class_iou[c] = s.iou[c];
            out->class_in_gt[c] = s.present_in_gt[c] ? 1 : 0;
        }
    });
}

lrn_status lrn_infer_image(lrn_net* net, const char* input_ppm, const char* output_pgm) {
    return wrap([&] {
        if (!net || !input_ppm || !output_pgm) {
            throw lrnn::ConfigError("lrn_infer_image: null argument");
        }
        const lrnn::Tensor4 image = lrnn::read_ppm(input_ppm);
        lrnn::Tensor4 logits = lrnn::network_forward(nullptr, net->net, image, false);
        const std::vector<std::uint8_t> labels = lrnn::argmax_labels(logits);
        lrnn::write_pgm(output_pgm, labels, logits.h(), logits.w());
    });
}

lrn_status lrn_compare_masks(const char* pred_pgm, const char* ref_pgm, double* pixel_acc) {
    return wrap([&] {
        if (!pred_pgm || !ref_pgm || !pixel_acc) {
            throw lrnn::ConfigError("lrn_compare_masks: null argument");
        }
        int ph = 0, pw = 0, rh = 0, rw = 0;
        const auto pred = lrnn::read_pgm(pred_pgm, &ph, &pw);
        const auto ref = lrnn::read_pgm(ref_pgm, &rh, &rw);
        if (ph != rh || pw != rw) {
            throw lrnn::DimensionError("lrn_compare_masks: mask dimensions differ");
        }
        std::size_t same = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            same += pred[i] == ref[i];
        }
        *pixel_acc = static_cast<double>(same) / static_cast<double>(pred.size());
    });
}

void lrn_svn_demo_options_defaults(lrn_svn_demo_options* opts) {
    if (!opts) {
        return;
    }
    opts->channels = 32;
    opts->height = 64;
    opts->width = 128;
    opts->grids = nullptr;
    opts->power_iters = 2;
    opts->seed = 7;
    opts->bench_reps = 10;
    opts->threads = 1;
}

lrn_status lrn_svn_demo_run(const lrn_svn_demo_options* opts, lrn_svn_demo** out) {
    return wrap([&] {
        if (!opts || !out) {
            throw lrnn::ConfigError("lrn_svn_demo_run: null argument");
        }
        lrnn::SVNConfig cfg;
        cfg.bottleneck_channels = opts->channels;
        cfg.scales = opts->grids ? parse_grids(opts->grids)
                                 : std::vector<lrnn::RegionGrid>{{8, 8}, {4, 4}};
        cfg.power_iters = opts->power_iters > 0 ? opts->power_iters : 2;
        lrnn::validate(cfg);

        const int c = opts->channels;
        const int h = opts->height;
        const int w = opts->width;
        if (c < 1 || h < 1 || w < 1) {
            throw lrnn::ConfigError("svn demo: dimensions must be positive");
        }
        lrnn::Rng rng(opts->seed);
        lrnn::Mat f(c, h * w);
        for (auto& x : f.v) {
            x = rng.uniform();  // nonnegative feature block
        }
        const lrnn::KeyValueBank bank = lrnn::extract_keys(f, h, w, cfg);

        auto demo = std::make_unique<lrn_svn_demo>();
        // per-region fidelity against the exact SVD
        int col = 0;
        for (const auto& grid : cfg.scales) {
            const int ph = (h + grid.g_h - 1) / grid.g_h * grid.g_h;
            const int pw = (w + grid.g_w - 1) / grid.g_w * grid.g_w;
            lrnn::Mat padded(c, ph * pw);
            for (int ci = 0; ci < c; ++ci) {
                for (int y = 0; y < h; ++y) {
                    for (int x = 0; x < w; ++x) {
                        padded.at(ci, y * pw + x) = f.at(ci, y * w + x);
                    }
                }
            }
            const auto regions = lrnn::partition_regions(padded, ph, pw, grid);
            for (const auto& region : regions) {
                const lrnn::SVDResult svd = lrnn::svd_oracle(region);
                std::vector<double> u1(c), key(c);
                for (int r = 0; r < c; ++r) {
                    u1[r] = svd.u.at(r, 0);
                    key[r] = bank.columns.at(r, col);
                }
                demo->cosines.push_back(lrnn::abs_cosine(key, u1));
                ++col;
            }
        }
        std::vector<double> sorted = demo->cosines;
        std::sort(sorted.begin(), sorted.end());
        demo->min_cosine = sorted.front();
        demo->median_cosine = sorted.size() % 2
                                  ? sorted[sorted.size() / 2]
                                  : 0.5 * (sorted[sorted.size() / 2 - 1] +
                                           sorted[sorted.size() / 2]);

        const lrnn::AttentionCost ac = lrnn::attention_flops(
            c, h * w, cfg.total_regions(), cfg.power_iters,
            static_cast<int>(cfg.scales.size()));
        demo->attention_macs = ac.attention_macs;
        demo->power_iter_macs = ac.power_iter_macs;
        demo->standard_macs = lrnn::standard_nonlocal_macs(c, h * w);

        // reduced output must coincide with the unnormalized QKV form when
        // the bank supplies Keys and Values
        const lrnn::Mat reduced = lrnn::reduced_nonlocal(f, bank.columns);
        const lrnn::Mat same = lrnn::standard_nonlocal(f, bank.columns, bank.columns,
                                                       lrnn::Normalizer::kNone);
        double diff = 0.0;
        for (std::size_t i = 0; i < reduced.v.size(); ++i) {
            diff = std::max(diff, std::abs(reduced.v[i] - same.v[i]));
        }
        demo->max_abs_diff = diff;

        const int reps = std::max(10, opts->bench_reps);
        const int threads = std::max(1, opts->threads);
        demo->reduced_ms =
            lrnn::bench_latency([&] { lrnn::reduced_nonlocal(f, bank.columns); }, reps, 3,
                                threads)
                .median_ms;
        demo->standard_ms =
            lrnn::bench_latency([&] { lrnn::standard_nonlocal(f, f, f, lrnn::Normalizer::kNone); },
                                reps, 3, threads)
                .median_ms;
        *out = demo.release();
    });
}

void lrn_svn_demo_destroy(lrn_svn_demo* demo) { delete demo; }

int lrn_svn_demo_region_count(const lrn_svn_demo* demo) {
    return demo ? static_cast<int>(demo->cosines.size()) : 0;
}

double lrn_svn_demo_cosine(const lrn_svn_demo* demo, int index) {
    if (!demo || index < 0 || index >= static_cast<int>(demo->cosines.size())) {
        return 0.0;
    }
    return demo->cosines[index];
}

double lrn_svn_demo_min_cosine(const lrn_svn_demo* demo) {
    return demo ? demo->min_cosine : 0.0;
}

double lrn_svn_demo_median_cosine(const lrn_svn_demo* demo) {
    return demo ? demo->median_cosine : 0.0;
}

int64_t lrn_svn_demo_attention_macs(const lrn_svn_demo* demo) {
    return demo ? demo->attention_macs : 0;
}

int64_t lrn_svn_demo_power_iter_macs(const lrn_svn_demo* demo) {
    return demo ? demo->power_iter_macs : 0;
}

int64_t lrn_svn_demo_standard_macs(const lrn_svn_demo* demo) {
    return demo ? demo->standard_macs : 0;
}

double lrn_svn_demo_max_abs_diff(const lrn_svn_demo* demo) {
    return demo ? demo->max_abs_diff : 0.0;
}

double lrn_svn_demo_reduced_ms(const lrn_svn_demo* demo) {
    return demo ? demo->reduced_ms : 0.0;
}

double lrn_svn_demo_standard_ms(const lrn_svn_demo* demo) {
    return demo ? demo->standard_ms : 0.0;
}

lrn_status lrn_bench_net(lrn_net* net, int height, int width, int reps, int threads,
                         double* median_ms, double* mean_ms, double* p95_ms) {
    return wrap([&] {
        if (!net) {
            throw lrnn::ConfigError("lrn_bench_net: null argument");
        }
        lrnn::Rng rng(99);
        const lrnn::Tensor4 x = lrnn::uniform_tensor(
            {1, net->net.spec.input_channels, height, width}, rng, 0.0, 1.0);
        const lrnn::BenchResult r = lrnn::bench_latency(
            [&] { lrnn::network_forward(nullptr, net->net, x, false); }, reps, 3,
            std::max(1, threads));
        if (median_ms) {
            *median_ms = r.median_ms;
        }
        if (mean_ms) {
            *mean_ms = r.mean_ms;
        }
        if (p95_ms) {
            *p95_ms = r.p95_ms;
        }
    });
}

}  // extern "C"
