// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#include "checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace lrnn {

namespace {

constexpr char kMagic[8] = {'L', 'R', 'N', 'N', 'C', 'K', 'P', 'T'};

std::string hash_hex(std::uint64_t h) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

struct Entry {
    std::string name;
    Shape4 shape;
    const std::vector<double>* values;
};

std::vector<Entry> collect_entries(Network& net, const TrainerState* state) {
    std::vector<Entry> entries;
    std::vector<std::pair<std::string, const std::vector<double>*>> learnable;
    visit_params(net, [&](const ParamEntry& e) {
        if (e.learnable()) {
            entries.push_back(Entry{e.name, e.shape, &e.tensor->vec()});
            learnable.emplace_back(e.name, nullptr);
        } else {
            entries.push_back(Entry{e.name, e.shape, e.buffer});
        }
    });
    if (state) {
        if (state->momentum.size() != learnable.size()) {
            throw CheckpointError("checkpoint: momentum buffer count " +
                                  std::to_string(state->momentum.size()) +
                                  " != learnable parameter count " +
                                  std::to_string(learnable.size()));
        }
        for (std::size_t i = 0; i < learnable.size(); ++i) {
            const auto n = static_cast<int>(state->momentum[i].size());
            entries.push_back(Entry{"opt.momentum." + learnable[i].first,
                                    Shape4{1, n, 1, 1}, &state->momentum[i]});
        }
    }
    return entries;
}

}  // namespace

void save_checkpoint(const std::string& path, Network& net, const TrainerState* state) {
    const std::vector<Entry> entries = collect_entries(net, state);

    nlohmann::json manifest;
    manifest["format"] = "lrnnet-checkpoint";
    manifest["version"] = 1;
    manifest["spec_hash"] = hash_hex(net.spec.hash());
    manifest["spec"] = net.spec.canonical();
    manifest["iteration"] = state ? state->iteration : 0;

    std::size_t offset = 0;
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& e : entries) {
        const std::size_t bytes = e.values->size() * sizeof(float);
        nlohmann::json t;
        t["name"] = e.name;
        t["shape"] = {e.shape.n, e.shape.c, e.shape.h, e.shape.w};
        t["dtype"] = "f32";
        t["offset"] = offset;
        t["length"] = bytes;
        tensors.push_back(std::move(t));
        offset = (offset + bytes + 15) / 16 * 16;
    }
    manifest["tensors"] = std::move(tensors);
    const std::string text = manifest.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("checkpoint: cannot open '" + path + "' for writing");
    }
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t mlen = text.size();
    out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    const std::size_t header = sizeof(kMagic) + sizeof(mlen) + text.size();
    const std::size_t pad = (16 - header % 16) % 16;
    const char zeros[16] = {};
    out.write(zeros, static_cast<std::streamsize>(pad));

    std::size_t written = 0;
    std::vector<float> f32;
    for (const auto& e : entries) {
        f32.resize(e.values->size());
        for (std::size_t i = 0; i < f32.size(); ++i) {
            f32[i] = static_cast<float>((*e.values)[i]);
        }
        out.write(reinterpret_cast<const char*>(f32.data()),
                  static_cast<std::streamsize>(f32.size() * sizeof(float)));
        written += f32.size() * sizeof(float);
        const std::size_t aligned = (written + 15) / 16 * 16;
        out.write(zeros, static_cast<std::streamsize>(aligned - written));
        written = aligned;
    }
    if (!out) {
        throw IoError("checkpoint: write to '" + path + "' failed");
    }
}

namespace {

struct LoadedFile {
    nlohmann::json manifest;
    std::vector<char> blob;
};

LoadedFile read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("checkpoint: cannot open '" + path + "'");
    }
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw CheckpointError("checkpoint: '" + path + "' is not a checkpoint file");
    }
    std::uint64_t mlen = 0;
    in.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
    if (!in || mlen == 0 || mlen > (1ULL << 31)) {
        throw CheckpointError("checkpoint: corrupt manifest length");
    }
    std::string text(mlen, '\0');
    in.read(text.data(), static_cast<std::streamsize>(mlen));
    if (!in) {
        throw CheckpointError("checkpoint: truncated manifest");
    }
    const std::size_t header = sizeof(kMagic) + sizeof(mlen) + mlen;
    const std::size_t pad = (16 - header % 16) % 16;
    in.ignore(static_cast<std::streamsize>(pad));

    LoadedFile f;
    try {
        f.manifest = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("checkpoint: manifest parse error: ") + e.what());
    }
    f.blob.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    return f;
}

}  // namespace

int load_checkpoint(const std::string& path, Network& net, TrainerState* state) {
    const LoadedFile f = read_file(path);
    const std::string want = [&] {
        std::ostringstream os;
        os << std::hex << std::setw(16) << std::setfill('0') << net.spec.hash();
        return os.str();
    }();
    std::string got;
    try {
        got = f.manifest.at("spec_hash").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw CheckpointError("checkpoint: manifest has no spec_hash");
    }
    if (got != want) {
        throw CheckpointError("checkpoint: spec hash " + got +
                              " does not match the requested network (" + want + ")");
    }

    std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> index;  // offset,len
    try {
        for (const auto& t : f.manifest.at("tensors")) {
            index[t.at("name").get<std::string>()] = {t.at("offset").get<std::size_t>(),
                                                      t.at("length").get<std::size_t>()};
        }
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("checkpoint: bad tensor table: ") + e.what());
    }

    auto read_into = [&](const std::string& name, std::vector<double>& dst) {
        auto it = index.find(name);
        if (it == index.end()) {
            throw CheckpointError("checkpoint: missing tensor '" + name + "'");
        }
        const auto [off, len] = it->second;
        if (len != dst.size() * sizeof(float) || off + len > f.blob.size()) {
            throw CheckpointError("checkpoint: tensor '" + name + "' has wrong size");
        }
        const float* src = reinterpret_cast<const float*>(f.blob.data() + off);
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] = static_cast<double>(src[i]);
        }
    };

    std::vector<std::string> learnable_names;
    visit_params(net, [&](const ParamEntry& e) {
        if (e.learnable()) {
            std::vector<double> values(e.tensor->numel());
            read_into(e.name, values);
            *e.tensor = Tensor4(e.shape, std::move(values));
            learnable_names.push_back(e.name);
        } else {
            read_into(e.name, *e.buffer);
        }
    });

    int iteration = 0;
    if (f.manifest.contains("iteration")) {
        iteration = f.manifest["iteration"].get<int>();
    }
    if (state) {
        state->iteration = iteration;
        state->momentum.clear();
        for (const auto& name : learnable_names) {
            auto it = index.find("opt.momentum." + name);
            if (it == index.end()) {
                throw CheckpointError("checkpoint: no optimizer state for '" + name +
                                      "' (trained checkpoint required to resume)");
            }
            std::vector<double> m(it->second.second / sizeof(float));
            read_into("opt.momentum." + name, m);
            state->momentum.push_back(std::move(m));
        }
    }
    return iteration;
}

void quantize_state_to_f32(Network& net, TrainerState* state) {
    visit_params(net, [&](const ParamEntry& e) {
        if (e.learnable()) {
            std::vector<double> v(e.tensor->vec());
            for (auto& x : v) {
                x = static_cast<double>(static_cast<float>(x));
            }
            *e.tensor = Tensor4(e.shape, std::move(v));
        } else {
            for (auto& x : *e.buffer) {
                x = static_cast<double>(static_cast<float>(x));
            }
        }
    });
    if (state) {
        for (auto& buf : state->momentum) {
            for (auto& x : buf) {
                x = static_cast<double>(static_cast<float>(x));
            }
        }
    }
}

}  // namespace lrnn
