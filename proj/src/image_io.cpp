// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#include "image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace lrnn {

namespace {

// Reads one whitespace-delimited token, skipping '#' comment lines.
std::string next_token(std::istream& in) {
    std::string tok;
    char c;
    while (in.get(c)) {
        if (c == '#') {
            while (in.get(c) && c != '\n') {
            }
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!tok.empty()) {
                return tok;
            }
            continue;
        }
        tok.push_back(c);
    }
    return tok;
}

void parse_header(std::istream& in, const std::string& path, const char* magic, int* h, int* w) {
    if (next_token(in) != magic) {
        throw IoError("image: '" + path + "' is not a binary " + std::string(magic) + " file");
    }
    const std::string ws = next_token(in);
    const std::string hs = next_token(in);
    const std::string maxval = next_token(in);
    try {
        *w = std::stoi(ws);
        *h = std::stoi(hs);
        if (std::stoi(maxval) != 255) {
            throw IoError("image: '" + path + "': only maxval 255 is supported");
        }
    } catch (const std::logic_error&) {
        throw IoError("image: '" + path + "': malformed header");
    }
    if (*w < 1 || *h < 1) {
        throw IoError("image: '" + path + "': bad dimensions");
    }
    // exactly one whitespace byte separates header from raster
}

}  // namespace

void write_ppm(const std::string& path, const Tensor4& image) {
    if (image.n() != 1 || image.c() != 3) {
        throw DimensionError("write_ppm: expected a (1,3,h,w) tensor, got " +
                             image.shape().str());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("write_ppm: cannot open '" + path + "'");
    }
    const int h = image.h();
    const int w = image.w();
    out << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < 3; ++ch) {
                const double v = std::clamp(image.at(0, ch, y, x), 0.0, 1.0);
                row[static_cast<std::size_t>(x) * 3 + ch] =
                    static_cast<unsigned char>(std::lround(v * 255.0));
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    if (!out) {
        throw IoError("write_ppm: write to '" + path + "' failed");
    }
}

Tensor4 read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("read_ppm: cannot open '" + path + "'");
    }
    int h = 0, w = 0;
    parse_header(in, path, "P6", &h, &w);
    std::vector<unsigned char> raw(static_cast<std::size_t>(h) * w * 3);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) {
        throw IoError("read_ppm: '" + path + "': truncated pixel data");
    }
    std::vector<double> img(3 * static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < 3; ++ch) {
                img[(static_cast<std::size_t>(ch) * h + y) * w + x] =
                    raw[(static_cast<std::size_t>(y) * w + x) * 3 + ch] / 255.0;
            }
        }
    }
    return Tensor4({1, 3, h, w}, std::move(img));
}

void write_pgm(const std::string& path, const std::vector<std::uint8_t>& labels, int h, int w) {
    if (labels.size() != static_cast<std::size_t>(h) * w) {
        throw DimensionError("write_pgm: label buffer does not match dimensions");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("write_pgm: cannot open '" + path + "'");
    }
    out << "P5\n" << w << " " << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
    if (!out) {
        throw IoError("write_pgm: write to '" + path + "' failed");
    }
}

std::vector<std::uint8_t> read_pgm(const std::string& path, int* h, int* w) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("read_pgm: cannot open '" + path + "'");
    }
    parse_header(in, path, "P5", h, w);
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(*h) * *w);
    in.read(reinterpret_cast<char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
    if (!in) {
        throw IoError("read_pgm: '" + path + "': truncated pixel data");
    }
    return labels;
}

}  // namespace lrnn
