// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace lrnn {

/// Binary PPM (P6, maxval 255). Tensor layout (1, 3, h, w), values in [0, 1].
void write_ppm(const std::string& path, const Tensor4& image);
Tensor4 read_ppm(const std::string& path);

/// Binary PGM (P5, maxval 255) carrying label values as gray levels.
void write_pgm(const std::string& path, const std::vector<std::uint8_t>& labels, int h, int w);
std::vector<std::uint8_t> read_pgm(const std::string& path, int* h, int* w);

}  // namespace lrnn
