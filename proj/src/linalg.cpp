// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#include "linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gemm.hpp"

namespace lrnn {

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) {
        throw DimensionError("matmul: " + std::to_string(a.cols) + " vs " +
                             std::to_string(b.rows));
    }
    Mat c(a.rows, b.cols);
    gemm_acc(a.rows, b.cols, a.cols, a.v.data(), a.cols, b.v.data(), b.cols, c.v.data(),
             b.cols);
    return c;
}

Mat transposed(const Mat& a) {
    Mat t(a.cols, a.rows);
    for (int r = 0; r < a.rows; ++r) {
        for (int c = 0; c < a.cols; ++c) {
            t.at(c, r) = a.at(r, c);
        }
    }
    return t;
}

double frobenius(const Mat& a) {
    double s = 0.0;
    for (double x : a.v) {
        s += x * x;
    }
    return std::sqrt(s);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

double abs_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    const double na = norm2(a);
    const double nb = norm2(b);
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return std::abs(dot(a, b)) / (na * nb);
}

namespace {

void apply_sign_fix(std::vector<double>& u, SignFix fix, double* sign_out) {
    double sign = 1.0;
    if (fix == SignFix::kLargestAbsPositive && !u.empty()) {
        std::size_t best = 0;
        double best_abs = std::abs(u[0]);
        for (std::size_t i = 1; i < u.size(); ++i) {
            const double a = std::abs(u[i]);
            if (a > best_abs) {
                best_abs = a;
                best = i;
            }
        }
        if (u[best] < 0.0) {
            sign = -1.0;
            for (auto& x : u) {
                x = -x;
            }
        }
    }
    if (sign_out) {
        *sign_out = sign;
    }
}

// y = A^T x  (A rows x cols, x length rows, y length cols)
void mat_t_vec(const Mat& a, const std::vector<double>& x, std::vector<double>& y) {
    y.assign(a.cols, 0.0);
    for (int r = 0; r < a.rows; ++r) {
        const double xr = x[r];
        const double* row = a.row(r);
        for (int c = 0; c < a.cols; ++c) {
            y[c] += xr * row[c];
        }
    }
}

// y = A x
void mat_vec(const Mat& a, const std::vector<double>& x, std::vector<double>& y) {
    y.assign(a.rows, 0.0);
    for (int r = 0; r < a.rows; ++r) {
        const double* row = a.row(r);
        double s = 0.0;
        for (int c = 0; c < a.cols; ++c) {
            s += row[c] * x[c];
        }
        y[r] = s;
    }
}

}  // namespace

PowerTrace power_iteration_traced(const Mat& a, int iters, const std::vector<double>& u0,
                                  double zero_tol, SignFix fix) {
    if (iters < 1) {
        throw ConfigError("power_iteration: iteration count must be >= 1");
    }
    if (static_cast<int>(u0.size()) != a.rows) {
        throw DimensionError("power_iteration: init vector length " +
                             std::to_string(u0.size()) + " != rows " + std::to_string(a.rows));
    }
    PowerTrace tr;
    std::vector<double> u = u0;
    std::vector<double> w;
    for (int t = 0; t < iters; ++t) {
        const double nu = norm2(u);
        if (nu < zero_tol) {
            tr.degenerate = true;
            tr.key.assign(a.rows, 0.0);
            return tr;
        }
        std::vector<double> a_hat(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) {
            a_hat[i] = u[i] / nu;
        }
        mat_t_vec(a, a_hat, w);
        const double nw = norm2(w);
        if (nw < zero_tol) {
            tr.degenerate = true;
            tr.key.assign(a.rows, 0.0);
            return tr;
        }
        std::vector<double> b_hat(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) {
            b_hat[i] = w[i] / nw;
        }
        mat_vec(a, b_hat, u);
        tr.n_u.push_back(nu);
        tr.n_w.push_back(nw);
        tr.a_hat.push_back(std::move(a_hat));
        tr.b_hat.push_back(std::move(b_hat));
        tr.u_next.push_back(u);
    }
    tr.n_final = norm2(u);
    if (tr.n_final < zero_tol) {
        tr.degenerate = true;
        tr.key.assign(a.rows, 0.0);
        return tr;
    }
    tr.key.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        tr.key[i] = u[i] / tr.n_final;
    }
    apply_sign_fix(tr.key, fix, &tr.sign);
    return tr;
}

std::vector<double> power_iteration(const Mat& a, int iters, std::vector<double> u0,
                                    double zero_tol, SignFix fix) {
    return power_iteration_traced(a, iters, u0, zero_tol, fix).key;
}

void power_iteration_backward(const Mat& a, const PowerTrace& tr,
                              const std::vector<double>& dkey, Mat& da) {
    if (tr.degenerate) {
        return;
    }
    const int iters = static_cast<int>(tr.a_hat.size());
    // k = sign * u_T / n_final
    std::vector<double> k_raw(tr.key.size());
    for (std::size_t i = 0; i < k_raw.size(); ++i) {
        k_raw[i] = tr.key[i] * tr.sign;  // undo the flip: sign^2 = 1
    }
    std::vector<double> du(k_raw.size());
    double proj = 0.0;
    for (std::size_t i = 0; i < k_raw.size(); ++i) {
        proj += k_raw[i] * dkey[i] * tr.sign;
    }
    for (std::size_t i = 0; i < k_raw.size(); ++i) {
        du[i] = (dkey[i] * tr.sign - proj * k_raw[i]) / tr.n_final;
    }

    std::vector<double> db, dw, da_hat, du_prev;
    for (int t = iters - 1; t >= 0; --t) {
        const auto& a_hat = tr.a_hat[t];
        const auto& b_hat = tr.b_hat[t];
        // u_{t+1} = A b_hat : dA += du (x) b_hat ; db = A^T du
        for (int r = 0; r < a.rows; ++r) {
            double* row = da.row(r);
            const double dur = du[r];
            for (int c = 0; c < a.cols; ++c) {
                row[c] += dur * b_hat[c];
            }
        }
        mat_t_vec(a, du, db);
        // b_hat = w / n_w : dw = (db - (b.db) b) / n_w
        double pb = dot(b_hat, db);
        dw.resize(db.size());
        for (std::size_t i = 0; i < db.size(); ++i) {
            dw[i] = (db[i] - pb * b_hat[i]) / tr.n_w[t];
        }
        // w = A^T a_hat : dA += a_hat (x) dw ; da_hat = A dw
        for (int r = 0; r < a.rows; ++r) {
            double* row = da.row(r);
            const double ar = a_hat[r];
            for (int c = 0; c < a.cols; ++c) {
                row[c] += ar * dw[c];
            }
        }
        mat_vec(a, dw, da_hat);
        // a_hat = u / n_u : du_prev = (da_hat - (a.da) a) / n_u
        double pa = dot(a_hat, da_hat);
        du_prev.resize(da_hat.size());
        for (std::size_t i = 0; i < da_hat.size(); ++i) {
            du_prev[i] = (da_hat[i] - pa * a_hat[i]) / tr.n_u[t];
        }
        du = du_prev;
    }
    // du now holds d(u0); u0 is a constant init, so it is discarded.
}

namespace {

// One-sided Jacobi on b (rows >= cols): returns sigma (unordered), b becomes
// U*diag(sigma), and v accumulates the right rotations.
void jacobi_sweeps(Mat& b, Mat& v) {
    const int n = b.cols;
    const int m = b.rows;
    constexpr int kMaxSweeps = 60;
    constexpr double kTol = 1e-15;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (int i = 0; i < n - 1; ++i) {
            for (int j = i + 1; j < n; ++j) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (int r = 0; r < m; ++r) {
                    const double bi = b.at(r, i);
                    const double bj = b.at(r, j);
                    alpha += bi * bi;
                    beta += bj * bj;
                    gamma += bi * bj;
                }
                if (std::abs(gamma) <= kTol * std::sqrt(alpha * beta) || gamma == 0.0) {
                    continue;
                }
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;
                for (int r = 0; r < m; ++r) {
                    const double bi = b.at(r, i);
                    const double bj = b.at(r, j);
                    b.at(r, i) = cs * bi - sn * bj;
                    b.at(r, j) = sn * bi + cs * bj;
                }
                for (int r = 0; r < n; ++r) {
                    const double vi = v.at(r, i);
                    const double vj = v.at(r, j);
                    v.at(r, i) = cs * vi - sn * vj;
                    v.at(r, j) = sn * vi + cs * vj;
                }
            }
        }
        if (!rotated) {
            return;
        }
    }
    throw NumericError("svd_oracle: Jacobi sweeps did not converge");
}

}  // namespace

SVDResult svd_oracle(const Mat& a) {
    if (static_cast<std::size_t>(a.rows) * a.cols > 1000000) {
        throw ConfigError("svd_oracle: matrix larger than the test-scale bound");
    }
    const bool flip = a.rows < a.cols;  // operate on the side with fewer columns
    Mat b = flip ? transposed(a) : a;
    const int m = b.rows;
    const int n = b.cols;
    Mat v(n, n);
    for (int i = 0; i < n; ++i) {
        v.at(i, i) = 1.0;
    }
    jacobi_sweeps(b, v);

    std::vector<double> sigma(n);
    for (int c = 0; c < n; ++c) {
        double s = 0.0;
        for (int r = 0; r < m; ++r) {
            s += b.at(r, c) * b.at(r, c);
        }
        sigma[c] = std::sqrt(s);
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return sigma[x] > sigma[y]; });

    Mat u_side(m, n);
    Mat v_side(n, n);
    std::vector<double> sorted(n);
    for (int k = 0; k < n; ++k) {
        const int src = order[k];
        sorted[k] = sigma[src];
        const double inv = sigma[src] > 0.0 ? 1.0 / sigma[src] : 0.0;
        for (int r = 0; r < m; ++r) {
            u_side.at(r, k) = b.at(r, src) * inv;
        }
        for (int r = 0; r < n; ++r) {
            v_side.at(r, k) = v.at(r, src);
        }
    }
    SVDResult out;
    out.sigma = std::move(sorted);
    if (flip) {
        out.u = std::move(v_side);  // a = (v_side) D (u_side)^T
        out.v = std::move(u_side);
    } else {
        out.u = std::move(u_side);
        out.v = std::move(v_side);
    }
    return out;
}

Mat rank_k_approx(const SVDResult& s, int k) {
    const int terms = static_cast<int>(s.sigma.size());
    if (k < 1 || k > terms) {
        throw ConfigError("rank_k_approx: k out of range");
    }
    Mat out(s.u.rows, s.v.rows);
    for (int t = 0; t < k; ++t) {
        const double sg = s.sigma[t];
        for (int r = 0; r < out.rows; ++r) {
            const double su = sg * s.u.at(r, t);
            for (int c = 0; c < out.cols; ++c) {
                out.at(r, c) += su * s.v.at(c, t);
            }
        }
    }
    return out;
}

Mat reduced_nonlocal(const Mat& q, const Mat& bank) {
    if (q.rows != bank.rows) {
        throw ConfigError("reduced_nonlocal: query rows " + std::to_string(q.rows) +
                          " != bank rows " + std::to_string(bank.rows));
    }
    const Mat scores = matmul(transposed(bank), q);  // S x N
    return matmul(bank, scores);                     // C x N
}

Mat standard_nonlocal(const Mat& q, const Mat& k, const Mat& v, Normalizer normalizer) {
    if (q.rows != k.rows) {
        throw ConfigError("standard_nonlocal: query/key channel mismatch");
    }
    if (k.cols != v.cols) {
        throw ConfigError("standard_nonlocal: key/value count mismatch");
    }
    Mat scores = matmul(transposed(k), q);  // N2 x N1
    switch (normalizer) {
        case Normalizer::kNone:
            break;
        case Normalizer::kMean: {
            const double inv = 1.0 / static_cast<double>(k.cols);
            for (auto& x : scores.v) {
                x *= inv;
            }
            break;
        }
        case Normalizer::kSoftmax: {
            for (int col = 0; col < scores.cols; ++col) {
                double best = -std::numeric_limits<double>::infinity();
                for (int r = 0; r < scores.rows; ++r) {
                    best = std::max(best, scores.at(r, col));
                }
                double denom = 0.0;
                for (int r = 0; r < scores.rows; ++r) {
                    denom += std::exp(scores.at(r, col) - best);
                }
                for (int r = 0; r < scores.rows; ++r) {
                    scores.at(r, col) = std::exp(scores.at(r, col) - best) / denom;
                }
            }
            break;
        }
    }
    return matmul(v, scores);  // C2 x N1
}

}  // namespace lrnn
