// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lrnn {

// Error taxonomy shared across the library. The C API maps these onto
// status codes; the CLI maps them onto exit codes.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Shape4 {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t numel() const {
        return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) *
               static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    }
    bool operator==(const Shape4&) const = default;
    std::string str() const;
};

/// Dense rank-4 array in row-major (n, c, h, w) order. Values are immutable
/// after construction; ops return fresh tensors. An instance may carry a tape
/// node id once it participates in a recorded forward pass.
class Tensor4 {
public:
    Tensor4() : data_(std::make_shared<std::vector<double>>()) {}

    explicit Tensor4(Shape4 s)
        : shape_(s), data_(std::make_shared<std::vector<double>>(s.numel(), 0.0)) {
        check_shape(s);
    }

    Tensor4(Shape4 s, std::vector<double> values)
        : shape_(s), data_(std::make_shared<std::vector<double>>(std::move(values))) {
        check_shape(s);
        if (data_->size() != shape_.numel()) {
            throw DimensionError("Tensor4: data length " + std::to_string(data_->size()) +
                                 " does not match shape " + s.str());
        }
    }

    static Tensor4 zeros(Shape4 s) { return Tensor4(s); }
    static Tensor4 full(Shape4 s, double value) {
        return Tensor4(s, std::vector<double>(s.numel(), value));
    }
    static Tensor4 ones(Shape4 s) { return full(s, 1.0); }

    const Shape4& shape() const { return shape_; }
    int n() const { return shape_.n; }
    int c() const { return shape_.c; }
    int h() const { return shape_.h; }
    int w() const { return shape_.w; }
    std::size_t numel() const { return shape_.numel(); }

    const double* data() const { return data_->data(); }
    const std::vector<double>& vec() const { return *data_; }

    double at(int n, int c, int y, int x) const {
        return (*data_)[index(n, c, y, x)];
    }
    std::size_t index(int n, int c, int y, int x) const {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }

    bool requires_grad() const { return requires_grad_; }
    int node() const { return node_; }
    /// Bound to the tape with the given identity?
    bool bound_to(std::uint64_t tape_id) const { return node_ >= 0 && tape_id_ == tape_id; }

    // Used by Tape::watch and by ops recording results; not for general code.
    void bind_node(int node, std::uint64_t tape_id, bool requires_grad) {
        node_ = node;
        tape_id_ = tape_id;
        requires_grad_ = requires_grad;
    }

    /// Same values, detached from any tape.
    Tensor4 detached() const {
        Tensor4 t;
        t.shape_ = shape_;
        t.data_ = data_;
        return t;
    }

private:
    static void check_shape(const Shape4& s) {
        if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
            throw DimensionError("Tensor4: negative dimension in " + s.str());
        }
    }

    Shape4 shape_{};
    std::shared_ptr<const std::vector<double>> data_;
    int node_ = -1;
    std::uint64_t tape_id_ = 0;
    bool requires_grad_ = false;
};

/// Deterministic RNG. Wraps a 64-bit Mersenne engine with explicit
/// bit-to-double conversion so streams do not depend on library
/// distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 1e-300);
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    int uniform_int(int lo, int hi_inclusive) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi_inclusive - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ULL + (stream << 1));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Tensor4 uniform_tensor(Shape4 s, Rng& rng, double lo, double hi);

}  // namespace lrnn
