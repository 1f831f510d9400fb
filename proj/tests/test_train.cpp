// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "gradcheck.hpp"
#include "image_io.hpp"
#include "loss.hpp"
#include "synth.hpp"
#include "trainer.hpp"

using namespace lrnn;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("lrnnet_train_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const char* name) const { return (path / name).string(); }
};

SynthConfig tiny_synth() {
    SynthConfig cfg;
    cfg.height = 16;
    cfg.width = 32;
    cfg.num_classes = 4;
    cfg.train_size = 24;
    cfg.val_size = 8;
    cfg.seed = 99;
    return cfg;
}

NetworkSpec tiny_spec(char variant) {
    NetworkSpec spec = NetworkSpec::model(variant, 4);
    if (spec.svn) {
        spec.svn->scales = {RegionGrid{2, 2}};
    }
    return spec;
}

}  // namespace

TEST_CASE("synthetic dataset determinism and structure") {
    const SynthConfig cfg = tiny_synth();
    const SynthDataset a = gen_synthetic_dataset(cfg);
    const SynthDataset b = gen_synthetic_dataset(cfg);
    REQUIRE(a.train.size() == 24);
    REQUIRE(a.val.size() == 8);
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].image.vec() == b.train[i].image.vec());
        CHECK(a.train[i].mask == b.train[i].mask);
    }

    // per-pixel label counts always total h*w
    for (const auto& s : a.train) {
        std::vector<int> hist(cfg.num_classes, 0);
        for (auto l : s.mask) {
            REQUIRE(l < cfg.num_classes);
            ++hist[l];
        }
        int total = 0;
        for (int h : hist) {
            total += h;
        }
        CHECK(total == cfg.height * cfg.width);
    }

    // every class appears somewhere in the train split
    std::vector<int> coverage(cfg.num_classes, 0);
    for (const auto& s : a.train) {
        for (auto l : s.mask) {
            ++coverage[l];
        }
    }
    for (int c = 0; c < cfg.num_classes; ++c) {
        CAPTURE(c);
        CHECK(coverage[c] > 0);
    }
}

TEST_CASE("zero shapes per image gives pure background") {
    SynthConfig cfg = tiny_synth();
    cfg.min_shapes = cfg.max_shapes = 0;
    const Sample s = gen_sample(cfg, 0, 0);
    for (auto l : s.mask) {
        CHECK(l == 0);
    }
}

TEST_CASE("image files round-trip through 8-bit quantization") {
    TempDir dir;
    const Sample s = gen_sample(tiny_synth(), 0, 3);
    const std::string ppm = dir.file("img.ppm");
    write_ppm(ppm, s.image);
    const Tensor4 back = read_ppm(ppm);
    REQUIRE(back.shape() == s.image.shape());
    double worst = 0.0;
    for (std::size_t i = 0; i < back.numel(); ++i) {
        worst = std::max(worst, std::abs(back.data()[i] - s.image.data()[i]));
    }
    CHECK(worst <= 0.5 / 255.0 + 1e-12);

    const std::string pgm = dir.file("mask.pgm");
    write_pgm(pgm, s.mask, 16, 32);
    int h = 0, w = 0;
    CHECK(read_pgm(pgm, &h, &w) == s.mask);
    CHECK(h == 16);
    CHECK(w == 32);

    CHECK_THROWS_AS(read_ppm(dir.file("missing.ppm")), IoError);
    std::ofstream(dir.file("bad.ppm")) << "P3 broken";
    CHECK_THROWS_AS(read_ppm(dir.file("bad.ppm")), IoError);
}

TEST_CASE("poly learning rate schedule") {
    TrainConfig cfg;
    cfg.base_lr = 0.01;
    cfg.lr_power = 0.9;
    cfg.max_iters = 1000;
    CHECK(poly_lr(0, cfg) == 0.01);
    CHECK(poly_lr(1000, cfg) == 0.0);
    CHECK(poly_lr(500, cfg) == doctest::Approx(0.01 * std::pow(0.5, 0.9)).epsilon(1e-12));
    CHECK(poly_lr(500, cfg) == doctest::Approx(5.359e-3).epsilon(1e-3));
    CHECK_THROWS_AS(poly_lr(-1, cfg), ConfigError);
    CHECK_THROWS_AS(poly_lr(1001, cfg), ConfigError);
}

TEST_CASE("cross entropy closed forms") {
    SUBCASE("uniform logits cost ln K") {
        Tensor4 logits = Tensor4::full({1, 5, 2, 2}, 0.37);
        std::vector<std::uint8_t> labels(4, 2);
        Tensor4 loss = cross_entropy_loss(nullptr, logits, labels);
        CHECK(loss.data()[0] == doctest::Approx(std::log(5.0)).epsilon(1e-12));
    }
    SUBCASE("large margin on the true class drives the loss to zero") {
        Tensor4 logits({1, 2, 1, 1}, {50.0, -50.0});
        std::vector<std::uint8_t> labels(1, 0);
        Tensor4 loss = cross_entropy_loss(nullptr, logits, labels);
        CHECK(loss.data()[0] < 1e-12);
    }
    SUBCASE("matches a per-pixel naive computation") {
        Rng rng(5);
        Tensor4 logits = uniform_tensor({1, 4, 2, 2}, rng, -2.0, 2.0);
        std::vector<std::uint8_t> labels(4);
        for (auto& l : labels) {
            l = static_cast<std::uint8_t>(rng.uniform_int(0, 3));
        }
        Tensor4 loss = cross_entropy_loss(nullptr, logits, labels);
        double want = 0.0;
        for (int px = 0; px < 4; ++px) {
            double denom = 0.0;
            for (int c = 0; c < 4; ++c) {
                denom += std::exp(logits.data()[c * 4 + px]);
            }
            want += std::log(denom) - logits.data()[labels[px] * 4 + px];
        }
        want /= 4.0;
        CHECK(loss.data()[0] == doctest::Approx(want).epsilon(1e-12));
    }
    SUBCASE("gradient passes finite differences") {
        Rng rng(6);
        Tensor4 logits = uniform_tensor({1, 4, 2, 2}, rng, -2.0, 2.0);
        std::vector<std::uint8_t> labels{0, 3, 1, 255};  // one ignored pixel
        auto closure = [labels](Tape& tape, const std::vector<Tensor4>& in) {
            return cross_entropy_loss(&tape, in[0], labels);
        };
        CHECK(grad_check(closure, {logits}, 1e-6) < 1e-7);
    }
    SUBCASE("out-of-range label raises a data error") {
        Tensor4 logits = Tensor4::full({1, 3, 1, 1}, 0.0);
        std::vector<std::uint8_t> labels(1, 7);
        CHECK_THROWS_AS(cross_entropy_loss(nullptr, logits, labels), DataError);
    }
}

TEST_CASE("IoU scoring") {
    SUBCASE("perfect prediction") {
        std::vector<std::uint8_t> gt{0, 1, 2, 1, 0, 2};
        SegmentationScore s = score_predictions(gt, gt, 3);
        CHECK(s.mean_iou == 1.0);
        CHECK(s.pixel_acc == 1.0);
    }
    SUBCASE("constant background on a balanced two-class set") {
        std::vector<std::uint8_t> gt{0, 0, 1, 1};
        std::vector<std::uint8_t> pred{0, 0, 0, 0};
        SegmentationScore s = score_predictions(pred, gt, 2);
        CHECK(s.iou[0] == doctest::Approx(0.5));
        CHECK(s.iou[1] == 0.0);
        CHECK(s.mean_iou == doctest::Approx(0.25));
    }
    SUBCASE("hand-computed confusion matrix") {
        // gt/pred over 16 pixels, 3 classes
        std::vector<std::uint8_t> gt{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 0, 1, 2, 0};
        std::vector<std::uint8_t> pred{0, 0, 1, 2, 1, 1, 0, 1, 2, 2, 2, 1, 0, 1, 0, 0};
        SegmentationScore s = score_predictions(pred, gt, 3);
        // rows (gt): 0 -> {4,1,1}, 1 -> {1,4,0}, 2 -> {1,1,3}
        CHECK(s.confusion[0 * 3 + 0] == 4);
        CHECK(s.confusion[0 * 3 + 1] == 1);
        CHECK(s.confusion[0 * 3 + 2] == 1);
        CHECK(s.confusion[1 * 3 + 0] == 1);
        CHECK(s.confusion[1 * 3 + 1] == 4);
        CHECK(s.confusion[1 * 3 + 2] == 0);
        CHECK(s.confusion[2 * 3 + 0] == 1);
        CHECK(s.confusion[2 * 3 + 1] == 1);
        CHECK(s.confusion[2 * 3 + 2] == 3);
        // iou_c = inter / (gt_c + pred_c - inter)
        CHECK(s.iou[0] == doctest::Approx(4.0 / (6 + 6 - 4)));
        CHECK(s.iou[1] == doctest::Approx(4.0 / (5 + 6 - 4)));
        CHECK(s.iou[2] == doctest::Approx(3.0 / (5 + 4 - 3)));
        CHECK(s.pixel_acc == doctest::Approx(11.0 / 16.0));
    }
    SUBCASE("pixel order does not matter") {
        Rng rng(7);
        std::vector<std::uint8_t> gt(64), pred(64);
        for (int i = 0; i < 64; ++i) {
            gt[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 2));
            pred[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 2));
        }
        SegmentationScore s1 = score_predictions(pred, gt, 3);
        std::vector<int> perm(64);
        for (int i = 0; i < 64; ++i) {
            perm[i] = i;
        }
        for (int i = 63; i > 0; --i) {
            std::swap(perm[i], perm[rng.uniform_int(0, i)]);
        }
        std::vector<std::uint8_t> gt2(64), pred2(64);
        for (int i = 0; i < 64; ++i) {
            gt2[i] = gt[perm[i]];
            pred2[i] = pred[perm[i]];
        }
        SegmentationScore s2 = score_predictions(pred2, gt2, 3);
        CHECK(s1.mean_iou == s2.mean_iou);
        CHECK(s1.pixel_acc == s2.pixel_acc);
        CHECK(s1.confusion == s2.confusion);
    }
}

TEST_CASE("short training run: schedule logged pointwise, deterministic") {
    TempDir dir;
    const SynthDataset data = gen_synthetic_dataset(tiny_synth());
    TrainConfig cfg;
    cfg.max_iters = 8;
    cfg.batch_size = 2;
    cfg.seed = 5;
    cfg.threads = 1;
    cfg.log_path = dir.file("log.csv");

    Network net = build_lrnnet(tiny_spec('B'), 55);
    TrainResult r1 = train(net, data.train, cfg);
    REQUIRE(r1.rows.size() == 8);
    for (int i = 0; i < 8; ++i) {
        CHECK(r1.rows[i].iter == i);
        CHECK(r1.rows[i].lr == poly_lr(i, cfg));
        CHECK(std::isfinite(r1.rows[i].loss));
    }

    // identical seed and thread count reproduce identical losses
    Network net2 = build_lrnnet(tiny_spec('B'), 55);
    TrainResult r2 = train(net2, data.train, cfg);
    for (int i = 0; i < 8; ++i) {
        CHECK(r1.rows[i].loss == r2.rows[i].loss);
    }

    std::ifstream log(dir.file("log.csv"));
    std::string header;
    std::getline(log, header);
    CHECK(header == "iter,lr,loss");
}

TEST_CASE("resume reproduces the uninterrupted run exactly") {
    TempDir dir;
    const SynthDataset data = gen_synthetic_dataset(tiny_synth());
    TrainConfig cfg;
    cfg.max_iters = 6;
    cfg.batch_size = 2;
    cfg.seed = 17;
    cfg.checkpoint_every = 3;
    cfg.checkpoint_path = dir.file("mid.ckpt");

    Network full = build_lrnnet(tiny_spec('A'), 77);
    TrainResult uninterrupted = train(full, data.train, cfg);
    REQUIRE(uninterrupted.rows.size() == 6);
    // checkpoint_every=3 wrote the mid-run state to mid.ckpt.iter3

    Network resumed = build_lrnnet(tiny_spec('A'), 1);  // init overwritten by load
    TrainConfig rest = cfg;
    rest.checkpoint_every = 0;
    rest.checkpoint_path.clear();
    TrainResult tail = train(resumed, data.train, rest, {}, dir.file("mid.ckpt.iter3"));
    REQUIRE(tail.rows.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(tail.rows[i].iter == uninterrupted.rows[3 + i].iter);
        CHECK(tail.rows[i].loss == uninterrupted.rows[3 + i].loss);
    }
}

TEST_CASE("diverging training aborts with a numeric error") {
    const SynthDataset data = gen_synthetic_dataset(tiny_synth());
    TrainConfig cfg;
    cfg.max_iters = 30;
    cfg.batch_size = 2;
    cfg.base_lr = 1e30;  // weights reach overflow within a couple dozen steps
    Network net = build_lrnnet(tiny_spec('A'), 3);
    CHECK_THROWS_AS(train(net, data.train, cfg), NumericError);
}

TEST_CASE("a short run on the toy task already reduces the loss") {
    const SynthDataset data = gen_synthetic_dataset(tiny_synth());
    TrainConfig cfg;
    cfg.max_iters = 60;
    cfg.batch_size = 4;
    cfg.seed = 11;
    Network net = build_lrnnet(tiny_spec('A'), 13);
    TrainResult r = train(net, data.train, cfg);
    CHECK(r.final_loss < r.initial_loss);
}
