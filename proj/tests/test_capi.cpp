// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0
//
// Exercises the shared library surface: opaque handles, status codes and
// the thread-local error message.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "lrnnet/lrnnet.h"

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("lrnnet_capi_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const char* name) const { return (path / name).string(); }
};

lrn_net* make_model(char variant, int classes, const char* grids = nullptr) {
    lrn_net_options o;
    lrn_net_options_defaults(&o);
    o.variant = variant;
    o.num_classes = classes;
    o.grids = grids;
    lrn_net* net = nullptr;
    REQUIRE(lrn_net_create(&o, &net) == LRN_OK);
    REQUIRE(net != nullptr);
    return net;
}

}  // namespace

TEST_CASE("version and error message plumbing") {
    CHECK(std::string(lrn_version()).rfind("lrnnet", 0) == 0);
    lrn_net_options o;
    lrn_net_options_defaults(&o);
    o.variant = 'Z';
    lrn_net* net = nullptr;
    CHECK(lrn_net_create(&o, &net) == LRN_ERR_CONFIG);
    CHECK(std::strlen(lrn_last_error()) > 0);
    CHECK(lrn_net_create(nullptr, &net) == LRN_ERR_CONFIG);
}

TEST_CASE("model handle basics") {
    lrn_net* a = make_model('A', 19);
    const int64_t pa = lrn_net_param_count(a);
    CHECK(pa > 600000);
    CHECK(pa < 740000);
    int cin = 0, mid = 0, cls = 0;
    lrn_net_classifier_widths(a, &cin, &mid, &cls);
    CHECK(cin == 128);
    CHECK(mid == 32);
    CHECK(cls == 19);
    lrn_net_destroy(a);

    // grid override is rejected for a model without an SVN module
    lrn_net_options o;
    lrn_net_options_defaults(&o);
    o.variant = 'A';
    o.grids = "8x8";
    lrn_net* net = nullptr;
    CHECK(lrn_net_create(&o, &net) == LRN_ERR_CONFIG);

    o.variant = 'C';
    o.grids = "nonsense";
    CHECK(lrn_net_create(&o, &net) == LRN_ERR_CONFIG);
}

TEST_CASE("audit through the C API") {
    TempDir dir;
    lrn_net* c = make_model('C', 19);
    lrn_report* report = nullptr;
    REQUIRE(lrn_audit(c, 512, 1024, &report) == LRN_OK);
    const double params_m = lrn_report_total_params(report) / 1e6;
    CHECK(std::abs(params_m - 0.68) / 0.68 < 0.10);
    const double gmacs = lrn_report_total_macs(report) / 1e9;
    CHECK(std::abs(gmacs - 8.58) / 8.58 < 0.20);
    CHECK(lrn_report_overhead_ops(report) > 0);

    const int rows = lrn_report_row_count(report);
    CHECK(rows > 10);
    const char* layer = nullptr;
    int64_t p = 0, m = 0;
    REQUIRE(lrn_report_row(report, 0, &layer, &p, &m) == LRN_OK);
    CHECK(std::string(layer) == "ds1");
    CHECK(lrn_report_row(report, rows, &layer, &p, &m) == LRN_ERR_CONFIG);

    const std::string csv = dir.file("audit.csv");
    REQUIRE(lrn_report_write_csv(report, csv.c_str()) == LRN_OK);
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "layer,params,macs,flops2x");
    lrn_report_destroy(report);

    // indivisible audit size is a config error
    CHECK(lrn_audit(c, 100, 100, &report) == LRN_ERR_CONFIG);
    lrn_net_destroy(c);
}

TEST_CASE("attention cost helpers") {
    int64_t attn = 0, power = 0;
    lrn_attention_macs(32, 64 * 128, 64, 2, 1, &attn, &power);
    CHECK(attn == 2LL * 32 * 8192 * 64);
    CHECK(power == 2LL * 2 * 32 * 8192);
    CHECK(lrn_standard_nonlocal_macs(32, 8192) == 2LL * 32 * 8192 * 8192);
}

TEST_CASE("checkpoint round trip and status codes") {
    TempDir dir;
    lrn_net* b = make_model('B', 5);
    const std::string path = dir.file("b.ckpt");
    REQUIRE(lrn_net_save(b, path.c_str()) == LRN_OK);
    CHECK(lrn_net_load(b, path.c_str()) == LRN_OK);

    lrn_net* c = make_model('C', 5);
    CHECK(lrn_net_load(c, path.c_str()) == LRN_ERR_CHECKPOINT);
    CHECK(lrn_net_load(c, dir.file("missing.ckpt").c_str()) == LRN_ERR_IO);
    lrn_net_destroy(c);
    lrn_net_destroy(b);
}

TEST_CASE("dataset, train, eval, infer through the C API") {
    TempDir dir;
    lrn_synth_options so;
    lrn_synth_options_defaults(&so);
    so.height = 16;
    so.width = 32;
    so.num_classes = 4;
    so.train_size = 12;
    so.val_size = 4;
    lrn_dataset* data = nullptr;
    REQUIRE(lrn_dataset_generate(&so, &data) == LRN_OK);

    REQUIRE(lrn_dataset_export(data, dir.file("ds").c_str()) == LRN_OK);
    CHECK(std::filesystem::exists(dir.path / "ds" / "train" / "img_00000.ppm"));
    CHECK(std::filesystem::exists(dir.path / "ds" / "train" / "mask_00011.pgm"));
    CHECK(std::filesystem::exists(dir.path / "ds" / "val" / "img_00003.ppm"));

    lrn_net* net = make_model('B', 4, "2x2");
    lrn_train_options to;
    lrn_train_options_defaults(&to);
    to.max_iters = 10;
    to.batch_size = 2;
    const std::string ckpt = dir.file("toy.ckpt");
    to.checkpoint_path = ckpt.c_str();
    double first = 0.0, last = 0.0;
    REQUIRE(lrn_train_run(net, data, &to, nullptr, nullptr, &first, &last) == LRN_OK);
    CHECK(std::isfinite(first));
    CHECK(std::isfinite(last));

    lrn_eval_result result;
    REQUIRE(lrn_eval_run(net, data, 0, &result) == LRN_OK);
    CHECK(result.num_classes == 4);
    CHECK(result.pixel_acc >= 0.0);
    CHECK(result.pixel_acc <= 1.0);
    CHECK(result.mean_iou >= 0.0);
    CHECK(result.mean_iou <= 1.0);

    // infer against one of the exported images
    const std::string in_ppm = (dir.path / "ds" / "train" / "img_00000.ppm").string();
    const std::string out_pgm = dir.file("pred.pgm");
    REQUIRE(lrn_infer_image(net, in_ppm.c_str(), out_pgm.c_str()) == LRN_OK);
    double acc = 0.0;
    const std::string ref_pgm = (dir.path / "ds" / "train" / "mask_00000.pgm").string();
    REQUIRE(lrn_compare_masks(out_pgm.c_str(), ref_pgm.c_str(), &acc) == LRN_OK);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);

    CHECK(lrn_infer_image(net, dir.file("missing.ppm").c_str(), out_pgm.c_str()) ==
          LRN_ERR_IO);

    lrn_net_destroy(net);
    lrn_dataset_destroy(data);
}

TEST_CASE("svn demo through the C API") {
    lrn_svn_demo_options o;
    lrn_svn_demo_options_defaults(&o);
    o.height = 16;  // small block keeps the demo quick in unit tests
    o.width = 32;
    o.grids = "4x4,2x2";
    lrn_svn_demo* demo = nullptr;
    REQUIRE(lrn_svn_demo_run(&o, &demo) == LRN_OK);
    CHECK(lrn_svn_demo_region_count(demo) == 16 + 4);
    CHECK(lrn_svn_demo_min_cosine(demo) >= 0.99);
    CHECK(lrn_svn_demo_median_cosine(demo) >= lrn_svn_demo_min_cosine(demo));
    CHECK(lrn_svn_demo_max_abs_diff(demo) < 1e-12);
    CHECK(lrn_svn_demo_attention_macs(demo) == 2LL * 32 * 16 * 32 * 20);
    CHECK(lrn_svn_demo_cosine(demo, 0) > 0.0);
    CHECK(lrn_svn_demo_reduced_ms(demo) >= 0.0);
    CHECK(lrn_svn_demo_standard_ms(demo) > 0.0);
    lrn_svn_demo_destroy(demo);
}
