// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "blocks.hpp"
#include "svn.hpp"
#include "test_oracles.hpp"

using namespace lrnn;

namespace {

Mat random_mat(int r, int c, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    Rng rng(seed);
    Mat m(r, c);
    for (auto& v : m.v) {
        v = rng.uniform(lo, hi);
    }
    return m;
}

std::vector<double> ones_vec(int n) { return std::vector<double>(n, 1.0); }

double col_norm(const Mat& m, int c) {
    double s = 0.0;
    for (int r = 0; r < m.rows; ++r) {
        s += m.at(r, c) * m.at(r, c);
    }
    return std::sqrt(s);
}

std::vector<double> column(const Mat& m, int c) {
    std::vector<double> out(m.rows);
    for (int r = 0; r < m.rows; ++r) {
        out[r] = m.at(r, c);
    }
    return out;
}

}  // namespace

TEST_CASE("power iteration finds the dominant axis of diag(3,1)") {
    Mat a(2, 2);
    a.at(0, 0) = 3.0;
    a.at(1, 1) = 1.0;
    // T = 2 converges at rate (sigma2/sigma1)^2 per iteration
    auto u2 = power_iteration(a, 2, {1.0, 0.5}, 1e-12, SignFix::kLargestAbsPositive);
    CHECK(u2[0] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(std::abs(u2[1]) < 0.01);
    auto u8 = power_iteration(a, 8, {1.0, 0.5}, 1e-12, SignFix::kLargestAbsPositive);
    CHECK(u8[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(u8[1]) < 1e-6);
}

TEST_CASE("rank-1 matrix is a fixed point after one iteration") {
    Rng rng(5);
    std::vector<double> uu(6), vv(9);
    for (auto& x : uu) {
        x = rng.uniform(-1.0, 1.0);
    }
    for (auto& x : vv) {
        x = rng.uniform(-1.0, 1.0);
    }
    const double nu = norm2(uu);
    for (auto& x : uu) {
        x /= nu;
    }
    Mat a(6, 9);
    for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 9; ++c) {
            a.at(r, c) = 2.5 * uu[r] * vv[c];
        }
    }
    auto got = power_iteration(a, 1, ones_vec(6), 1e-12, SignFix::kNone);
    CHECK(abs_cosine(got, uu) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("power iteration with T=2 tracks the exact dominant vector") {
    const Mat a = random_mat(32, 128, 77);
    auto u = power_iteration(a, 2, ones_vec(32), 1e-12, SignFix::kLargestAbsPositive);
    const SVDResult svd = svd_oracle(a);
    CHECK(abs_cosine(u, column(svd.u, 0)) >= 0.99);
}

TEST_CASE("power iteration zero guard") {
    Mat a(4, 8);  // all zeros
    auto u = power_iteration(a, 2, ones_vec(4), 1e-12, SignFix::kLargestAbsPositive);
    for (double v : u) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("power iteration residual after T=2 on nonnegative matrices") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const Mat a = random_mat(32, 128, 500 + seed);
        const PowerTrace tr =
            power_iteration_traced(a, 2, ones_vec(32), 1e-12, SignFix::kLargestAbsPositive);
        REQUIRE(!tr.degenerate);
        const auto& v = tr.b_hat.back();
        std::vector<double> av(a.rows, 0.0);
        for (int r = 0; r < a.rows; ++r) {
            for (int c = 0; c < a.cols; ++c) {
                av[r] += a.at(r, c) * v[c];
            }
        }
        const double sigma = std::abs(dot(tr.key, av));
        double resid = 0.0;
        for (int r = 0; r < a.rows; ++r) {
            const double d = av[r] - sigma * tr.key[r] * (dot(tr.key, av) < 0 ? -1.0 : 1.0);
            resid += d * d;
        }
        CHECK(std::sqrt(resid) / sigma <= 0.05);
    }
}

TEST_CASE("svd oracle basics") {
    SUBCASE("identity") {
        Mat eye(3, 3);
        for (int i = 0; i < 3; ++i) {
            eye.at(i, i) = 1.0;
        }
        const SVDResult s = svd_oracle(eye);
        for (double sg : s.sigma) {
            CHECK(sg == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("diag(3,1)") {
        Mat a(2, 2);
        a.at(0, 0) = 3.0;
        a.at(1, 1) = 1.0;
        const SVDResult s = svd_oracle(a);
        CHECK(s.sigma[0] == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(s.sigma[1] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(s.u.at(0, 0)) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(s.u.at(1, 0)) < 1e-12);
    }
}

TEST_CASE("svd oracle reconstruction and orthonormality") {
    for (auto [rows, cols] : {std::pair{8, 5}, std::pair{5, 8}, std::pair{12, 12}}) {
        const Mat a = random_mat(rows, cols, 900 + rows * 16 + cols, -1.0, 1.0);
        const SVDResult s = svd_oracle(a);
        const int k = static_cast<int>(s.sigma.size());
        // descending order
        for (int i = 1; i < k; ++i) {
            CHECK(s.sigma[i - 1] >= s.sigma[i]);
        }
        // orthonormal columns
        for (int i = 0; i < k; ++i) {
            for (int j = i; j < k; ++j) {
                const double du = dot(column(s.u, i), column(s.u, j));
                const double dv = dot(column(s.v, i), column(s.v, j));
                CHECK(std::abs(du - (i == j ? 1.0 : 0.0)) < 1e-8);
                CHECK(std::abs(dv - (i == j ? 1.0 : 0.0)) < 1e-8);
            }
        }
        // reconstruction
        const Mat rec = rank_k_approx(s, k);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < a.v.size(); ++i) {
            num += (rec.v[i] - a.v[i]) * (rec.v[i] - a.v[i]);
            den += a.v[i] * a.v[i];
        }
        CHECK(std::sqrt(num / den) < 1e-10);
    }
}

TEST_CASE("rank-k approximation") {
    SUBCASE("k = 1 of diag(3,1)") {
        Mat a(2, 2);
        a.at(0, 0) = 3.0;
        a.at(1, 1) = 1.0;
        const Mat approx = rank_k_approx(svd_oracle(a), 1);
        CHECK(approx.at(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(std::abs(approx.at(0, 1)) < 1e-12);
        CHECK(std::abs(approx.at(1, 0)) < 1e-12);
        CHECK(std::abs(approx.at(1, 1)) < 1e-12);
    }
    SUBCASE("k = 1 Frobenius error matches sigma_2 on a rank-2 matrix") {
        // rank-2 by construction, so the residual after the best rank-1
        // approximation is exactly the second singular triplet
        const Mat b = random_mat(4, 2, 31, -1.0, 1.0);
        const Mat c = random_mat(2, 4, 32, -1.0, 1.0);
        const Mat a = matmul(b, c);
        const SVDResult s = svd_oracle(a);
        const Mat best = rank_k_approx(s, 1);
        double err2 = 0.0;
        for (std::size_t i = 0; i < a.v.size(); ++i) {
            err2 += (a.v[i] - best.v[i]) * (a.v[i] - best.v[i]);
        }
        CHECK(std::sqrt(err2) == doctest::Approx(s.sigma[1]).epsilon(1e-8));
    }
    SUBCASE("no random rank-1 candidate beats the SVD truncation") {
        const Mat a = random_mat(4, 4, 33, -1.0, 1.0);
        const SVDResult s = svd_oracle(a);
        const Mat best = rank_k_approx(s, 1);
        double best_err = 0.0;
        for (std::size_t i = 0; i < a.v.size(); ++i) {
            best_err += (a.v[i] - best.v[i]) * (a.v[i] - best.v[i]);
        }
        // exact identity: squared Frobenius error = sum of trailing sigma^2
        double tail = 0.0;
        for (std::size_t i = 1; i < s.sigma.size(); ++i) {
            tail += s.sigma[i] * s.sigma[i];
        }
        CHECK(best_err == doctest::Approx(tail).epsilon(1e-8));

        Rng rng(34);
        for (int trial = 0; trial < 1000; ++trial) {
            std::vector<double> u(4), v(4);
            for (auto& x : u) {
                x = rng.uniform(-1.0, 1.0);
            }
            for (auto& x : v) {
                x = rng.uniform(-1.0, 1.0);
            }
            // least-squares optimal scale for this direction pair
            double num = 0.0, den = 0.0;
            for (int r = 0; r < 4; ++r) {
                for (int cc = 0; cc < 4; ++cc) {
                    num += a.at(r, cc) * u[r] * v[cc];
                    den += u[r] * u[r] * v[cc] * v[cc];
                }
            }
            const double scale = den > 0 ? num / den : 0.0;
            double err = 0.0;
            for (int r = 0; r < 4; ++r) {
                for (int cc = 0; cc < 4; ++cc) {
                    const double d = a.at(r, cc) - scale * u[r] * v[cc];
                    err += d * d;
                }
            }
            CHECK(err >= best_err - 1e-9);
        }
    }
}

TEST_CASE("partition_regions") {
    SUBCASE("1x1 grid returns the whole flattened map") {
        const Mat f = random_mat(3, 4 * 6, 41);
        const auto regions = partition_regions(f, 4, 6, RegionGrid{1, 1});
        REQUIRE(regions.size() == 1);
        CHECK(regions[0].rows == 3);
        CHECK(regions[0].cols == 24);
        CHECK(oracle::max_rel_diff(regions[0], f) == 0.0);
    }
    SUBCASE("single-pixel regions") {
        const Mat f = random_mat(2, 3 * 5, 42);
        const auto regions = partition_regions(f, 3, 5, RegionGrid{3, 5});
        REQUIRE(regions.size() == 15);
        for (const auto& r : regions) {
            CHECK(r.cols == 1);
        }
        // every pixel appears exactly once, in row-major region order
        for (int y = 0; y < 3; ++y) {
            for (int x = 0; x < 5; ++x) {
                for (int c = 0; c < 2; ++c) {
                    CHECK(regions[y * 5 + x].at(c, 0) == f.at(c, y * 5 + x));
                }
            }
        }
    }
    SUBCASE("index arithmetic: pixel (1,2) of a 4x4 map under a 2x2 grid") {
        Mat f(2, 16);
        f.at(0, 1 * 4 + 2) = 42.0;
        const auto regions = partition_regions(f, 4, 4, RegionGrid{2, 2});
        REQUIRE(regions.size() == 4);
        // region (0,1) holds columns for rows [0,2), cols [2,4); local
        // column of (1,2) is 1*2 + 0 = 2
        CHECK(regions[1].at(0, 2) == 42.0);
    }
    SUBCASE("non-dividing grid is rejected") {
        const Mat f = random_mat(2, 4 * 6, 43);
        CHECK_THROWS_AS(partition_regions(f, 4, 6, RegionGrid{3, 2}), ConfigError);
    }
}

TEST_CASE("extract_keys") {
    SVNConfig cfg;
    cfg.bottleneck_channels = 3;
    cfg.scales = {RegionGrid{2, 2}};

    SUBCASE("constant region gives the uniform direction") {
        Mat f(3, 16);
        for (auto& v : f.v) {
            v = 0.7;
        }
        const KeyValueBank bank = extract_keys(f, 4, 4, cfg);
        REQUIRE(bank.columns.cols == 4);
        const double want = 1.0 / std::sqrt(3.0);
        for (int col = 0; col < 4; ++col) {
            for (int r = 0; r < 3; ++r) {
                CHECK(bank.columns.at(r, col) == doctest::Approx(want).epsilon(1e-12));
            }
        }
    }
    SUBCASE("single nonzero pixel gives that pixel's direction") {
        Mat f(3, 16);
        // one pixel in region (1,1): global (3,3) -> column 15
        f.at(0, 15) = 0.3;
        f.at(1, 15) = -0.4;
        f.at(2, 15) = 1.2;
        const KeyValueBank bank = extract_keys(f, 4, 4, cfg);
        std::vector<double> x{0.3, -0.4, 1.2};
        const double n = norm2(x);
        for (int r = 0; r < 3; ++r) {
            CHECK(std::abs(bank.columns.at(r, 3)) ==
                  doctest::Approx(std::abs(x[r]) / n).epsilon(1e-12));
        }
        CHECK(abs_cosine(column(bank.columns, 3), x) == doctest::Approx(1.0).epsilon(1e-12));
        // the other regions are all-zero and must yield zero columns
        for (int col = 0; col < 3; ++col) {
            CHECK(col_norm(bank.columns, col) == 0.0);
        }
    }
    SUBCASE("keys match oracle dominant vectors on random maps") {
        SVNConfig wide;
        wide.bottleneck_channels = 8;
        wide.scales = {RegionGrid{2, 4}};
        const int h = 8, w = 16;
        const Mat f = random_mat(8, h * w, 55);
        const KeyValueBank bank = extract_keys(f, h, w, wide);
        const auto regions = partition_regions(f, h, w, wide.scales[0]);
        REQUIRE(static_cast<int>(regions.size()) == bank.columns.cols);
        for (std::size_t i = 0; i < regions.size(); ++i) {
            const SVDResult s = svd_oracle(regions[i]);
            CHECK(abs_cosine(column(bank.columns, static_cast<int>(i)), column(s.u, 0)) >=
                  0.99);
        }
        // unit norm invariant
        for (int col = 0; col < bank.columns.cols; ++col) {
            CHECK(col_norm(bank.columns, col) == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
    SUBCASE("non-dividing maps are zero-padded for key extraction") {
        SVNConfig cfg2;
        cfg2.bottleneck_channels = 2;
        cfg2.scales = {RegionGrid{2, 2}};
        const Mat f = random_mat(2, 3 * 5, 56);  // 3x5 map, grid 2x2
        const KeyValueBank bank = extract_keys(f, 3, 5, cfg2);
        CHECK(bank.columns.cols == 4);
        for (int col = 0; col < 4; ++col) {
            const double n = col_norm(bank.columns, col);
            CHECK(n == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("key invariances") {
    const int c = 6, m = 20;
    const Mat a = random_mat(c, m, 60);
    const auto key = power_iteration(a, 2, ones_vec(c), 1e-12, SignFix::kLargestAbsPositive);

    SUBCASE("column permutation changes the key by at most sign") {
        Rng rng(61);
        Mat shuffled(c, m);
        std::vector<int> perm(m);
        for (int i = 0; i < m; ++i) {
            perm[i] = i;
        }
        for (int i = m - 1; i > 0; --i) {
            std::swap(perm[i], perm[rng.uniform_int(0, i)]);
        }
        for (int r = 0; r < c; ++r) {
            for (int col = 0; col < m; ++col) {
                shuffled.at(r, col) = a.at(r, perm[col]);
            }
        }
        const auto key2 =
            power_iteration(shuffled, 2, ones_vec(c), 1e-12, SignFix::kLargestAbsPositive);
        CHECK(abs_cosine(key, key2) >= 1.0 - 1e-8);
    }

    SUBCASE("row-major and column-major flattening agree up to sign") {
        // a is the row-major flattening of a 4x5 region; build the
        // column-major flattening as a column permutation
        REQUIRE(m == 20);
        Mat colmajor(c, m);
        for (int y = 0; y < 4; ++y) {
            for (int x = 0; x < 5; ++x) {
                for (int r = 0; r < c; ++r) {
                    colmajor.at(r, x * 4 + y) = a.at(r, y * 5 + x);
                }
            }
        }
        const auto key2 =
            power_iteration(colmajor, 2, ones_vec(c), 1e-12, SignFix::kLargestAbsPositive);
        CHECK(abs_cosine(key, key2) >= 1.0 - 1e-8);
    }

    SUBCASE("scale equivariance: keys of alpha*F equal keys of F") {
        SVNConfig cfg;
        cfg.bottleneck_channels = c;
        cfg.scales = {RegionGrid{2, 2}};
        const Mat f = random_mat(c, 8 * 8, 62);
        Mat scaled = f;
        for (auto& v : scaled.v) {
            v *= 37.5;
        }
        const KeyValueBank k1 = extract_keys(f, 8, 8, cfg);
        const KeyValueBank k2 = extract_keys(scaled, 8, 8, cfg);
        for (std::size_t i = 0; i < k1.columns.v.size(); ++i) {
            CHECK(k1.columns.v[i] == doctest::Approx(k2.columns.v[i]).epsilon(1e-8));
        }
    }

    SUBCASE("one-pixel regions reproduce pixel directions exactly") {
        SVNConfig cfg;
        cfg.bottleneck_channels = 3;
        cfg.scales = {RegionGrid{2, 3}};
        const Mat f = random_mat(3, 2 * 3, 63, 0.1, 1.0);
        const KeyValueBank bank = extract_keys(f, 2, 3, cfg);
        for (int px = 0; px < 6; ++px) {
            std::vector<double> x = column(f, px);
            const double n = norm2(x);
            for (int r = 0; r < 3; ++r) {
                CHECK(std::abs(bank.columns.at(r, px)) ==
                      doctest::Approx(std::abs(x[r]) / n).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("reduced non-local operation") {
    SUBCASE("single unit key acts as a projector") {
        Rng rng(70);
        std::vector<double> k(5);
        for (auto& v : k) {
            v = rng.uniform(-1.0, 1.0);
        }
        const double n = norm2(k);
        for (auto& v : k) {
            v /= n;
        }
        Mat bank(5, 1);
        for (int r = 0; r < 5; ++r) {
            bank.at(r, 0) = k[r];
        }
        Mat q(5, 7);
        for (int col = 0; col < 7; ++col) {
            for (int r = 0; r < 5; ++r) {
                q.at(r, col) = k[r];
            }
        }
        const Mat out = reduced_nonlocal(q, bank);
        for (int col = 0; col < 7; ++col) {
            for (int r = 0; r < 5; ++r) {
                CHECK(out.at(r, col) == doctest::Approx(k[r]).epsilon(1e-12));
            }
        }
    }
    SUBCASE("zero bank gives zero output") {
        const Mat q = random_mat(4, 9, 71);
        const Mat out = reduced_nonlocal(q, Mat(4, 3));
        for (double v : out.v) {
            CHECK(v == 0.0);
        }
    }
    SUBCASE("matches the brute-force triple loop") {
        const Mat q = random_mat(32, 64, 72, -1.0, 1.0);
        const Mat bank = random_mat(32, 20, 73, -1.0, 1.0);
        const Mat fast = reduced_nonlocal(q, bank);
        const Mat slow = oracle::reduced_nonlocal(q, bank);
        CHECK(oracle::max_rel_diff(fast, slow) < 1e-10);
    }
    SUBCASE("dimension mismatch is rejected") {
        CHECK_THROWS_AS(reduced_nonlocal(random_mat(4, 6, 74), random_mat(5, 3, 75)),
                        ConfigError);
    }
}

TEST_CASE("standard non-local operation") {
    SUBCASE("no normalizer with bank keys/values equals the reduced op") {
        const Mat q = random_mat(8, 30, 80, -1.0, 1.0);
        const Mat bank = random_mat(8, 6, 81, -1.0, 1.0);
        const Mat a = reduced_nonlocal(q, bank);
        const Mat b = standard_nonlocal(q, bank, bank, Normalizer::kNone);
        CHECK(oracle::max_rel_diff(a, b) < 1e-12);
    }
    SUBCASE("softmax with a single key/value returns that value everywhere") {
        const Mat q = random_mat(4, 5, 82, -2.0, 2.0);
        const Mat k = random_mat(4, 1, 83);
        const Mat v = random_mat(3, 1, 84);
        const Mat out = standard_nonlocal(q, k, v, Normalizer::kSoftmax);
        for (int col = 0; col < 5; ++col) {
            for (int r = 0; r < 3; ++r) {
                CHECK(out.at(r, col) == doctest::Approx(v.at(r, 0)).epsilon(1e-12));
            }
        }
    }
    SUBCASE("all normalizers match the naive double loop") {
        const Mat q = random_mat(4, 6, 85, -1.0, 1.0);
        const Mat k = random_mat(4, 3, 86, -1.0, 1.0);
        const Mat v = random_mat(4, 3, 87, -1.0, 1.0);
        for (auto norm : {Normalizer::kNone, Normalizer::kMean, Normalizer::kSoftmax}) {
            const Mat fast = standard_nonlocal(q, k, v, norm);
            const Mat slow = oracle::standard_nonlocal(q, k, v, norm);
            CHECK(oracle::max_rel_diff(fast, slow) < 1e-12);
        }
    }
}

TEST_CASE("values-linearity with frozen keys") {
    const Mat q = random_mat(6, 12, 90, -1.0, 1.0);
    const Mat keys = random_mat(6, 5, 91, -1.0, 1.0);
    const Mat v1 = random_mat(6, 5, 92, -1.0, 1.0);
    const Mat v2 = random_mat(6, 5, 93, -1.0, 1.0);
    const double a = 1.3, b = -2.1;
    Mat mix(6, 5);
    for (std::size_t i = 0; i < mix.v.size(); ++i) {
        mix.v[i] = a * v1.v[i] + b * v2.v[i];
    }
    const Mat lhs = standard_nonlocal(q, keys, mix, Normalizer::kNone);
    const Mat o1 = standard_nonlocal(q, keys, v1, Normalizer::kNone);
    const Mat o2 = standard_nonlocal(q, keys, v2, Normalizer::kNone);
    double worst = 0.0;
    for (std::size_t i = 0; i < lhs.v.size(); ++i) {
        const double want = a * o1.v[i] + b * o2.v[i];
        worst = std::max(worst, std::abs(lhs.v[i] - want) / std::max(1.0, std::abs(want)));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("svn module forward") {
    SUBCASE("zero expansion conv reduces to the identity") {
        Rng rng(100);
        SVNModuleParams p;
        p.cfg.bottleneck_channels = 2;
        p.cfg.scales = {RegionGrid{2, 2}};
        p.conv_in = make_conv(2, 4, 1, 1, 1, 1, 1, rng);
        p.norm_in = make_norm(2);
        p.conv_out = make_conv(4, 2, 1, 1, 1, 1, 1, rng);
        p.conv_out.weight = Tensor4::zeros(p.conv_out.weight.shape());
        p.conv_out.bias = Tensor4::zeros({1, 4, 1, 1});
        Tensor4 x = uniform_tensor({2, 4, 4, 4}, rng, -1.0, 1.0);
        Tensor4 y = svn_module_forward(nullptr, x, p, false);
        CHECK(oracle::max_abs_diff(y, x) == 0.0);
    }
    SUBCASE("single 1x1 grid on constant input gives spatially constant attention") {
        SVNConfig cfg;
        cfg.bottleneck_channels = 3;
        cfg.scales = {RegionGrid{1, 1}};
        Tensor4 f = Tensor4::full({1, 3, 4, 6}, 0.5);
        Tensor4 out = svn_attention(nullptr, f, cfg);
        for (int c = 0; c < 3; ++c) {
            const double first = out.at(0, c, 0, 0);
            for (int y = 0; y < 4; ++y) {
                for (int x = 0; x < 6; ++x) {
                    CHECK(out.at(0, c, y, x) == doctest::Approx(first).epsilon(1e-12));
                }
            }
        }
    }
    SUBCASE("multi-scale bank composes the per-scale pieces") {
        SVNConfig cfg;
        cfg.bottleneck_channels = 8;
        cfg.scales = {RegionGrid{8, 8}, RegionGrid{4, 4}};
        const int h = 16, w = 32;
        Rng rng(101);
        Tensor4 f = uniform_tensor({1, 8, h, w}, rng, 0.0, 1.0);
        const Mat fm(8, h * w, std::vector<double>(f.data(), f.data() + f.numel()));
        const KeyValueBank bank = extract_keys(fm, h, w, cfg);
        CHECK(bank.columns.cols == 64 + 16);
        const Mat expect = reduced_nonlocal(fm, bank.columns);
        Tensor4 got = svn_attention(nullptr, f, cfg);
        double worst = 0.0;
        for (std::size_t i = 0; i < got.numel(); ++i) {
            worst = std::max(worst, std::abs(got.data()[i] - expect.v[i]));
        }
        CHECK(worst < 1e-12);
    }
}
