// Copyright 2026 the lrnnet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <functional>
#include <unordered_map>
#include <vector>

#include "tensor.hpp"

namespace lrnn {

using NodeId = int;

class Tape;

/// Gradients keyed by tape node, produced by Tape::backward.
class GradMap {
public:
    const std::vector<double>* find(const Tensor4& t) const {
        if (!t.bound_to(tape_id_)) {
            return nullptr;
        }
        auto it = grads_.find(t.node());
        return it == grads_.end() ? nullptr : &it->second;
    }

    /// Gradient shaped like t; zeros if t never received one.
    Tensor4 grad(const Tensor4& t) const {
        const auto* g = find(t);
        if (!g) {
            return Tensor4::zeros(t.shape());
        }
        return Tensor4(t.shape(), *g);
    }

    bool contains(const Tensor4& t) const { return find(t) != nullptr; }

private:
    friend class Tape;
    std::uint64_t tape_id_ = 0;
    std::unordered_map<NodeId, std::vector<double>> grads_;
};

/// Reverse-mode tape over a fixed op vocabulary. Ops run eagerly and record
/// a backward closure; nodes are appended in topological order by
/// construction. Single-writer: one forward/backward pass owns the tape.
class Tape {
public:
    /// Sink the backward closures accumulate into.
    class Grads {
    public:
        /// Buffer for node id, allocated zeroed on first use.
        std::vector<double>& buf(NodeId id, std::size_t numel) {
            auto& v = slots_[id];
            if (v.empty()) {
                v.assign(numel, 0.0);
            }
            return v;
        }
        bool live(NodeId id) const { return id >= 0; }

    private:
        friend class Tape;
        explicit Grads(std::size_t n) : slots_(n) {}
        std::vector<std::vector<double>> slots_;
    };

    using BackwardFn = std::function<void(const std::vector<double>& grad_out, Grads& sink)>;

    Tape() : id_(next_id()) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::uint64_t id() const { return id_; }

    /// Registers t as a differentiable leaf of this tape (rebinding it if it
    /// was attached to an earlier tape). Returns its node id.
    NodeId watch(Tensor4& t) {
        if (t.bound_to(id_)) {
            return t.node();
        }
        const NodeId id = static_cast<NodeId>(nodes_.size());
        nodes_.push_back(Node{{}, t.numel(), nullptr, true});
        t.bind_node(id, id_, true);
        return id;
    }

    /// True when t participates in this tape's graph.
    bool tracks(const Tensor4& t) const { return t.bound_to(id_); }

    /// Records an op result. Parents must already live on this tape.
    NodeId record(std::vector<NodeId> parents, std::size_t out_numel, BackwardFn fn) {
        const NodeId id = static_cast<NodeId>(nodes_.size());
        for (NodeId p : parents) {
            if (p < 0 || p >= id) {
                throw TapeError("tape: parent node " + std::to_string(p) +
                                " not produced before node " + std::to_string(id));
            }
        }
        nodes_.push_back(Node{std::move(parents), out_numel, std::move(fn), false});
        return id;
    }

    std::size_t size() const { return nodes_.size(); }

    /// Reverse traversal from output. Seed must match the output element
    /// count. Accumulation order is the fixed reverse creation order.
    GradMap backward(const Tensor4& output, const Tensor4& seed) {
        if (!output.bound_to(id_) || output.node() >= static_cast<NodeId>(nodes_.size())) {
            throw TapeError("tape: backward output is not a node of this tape");
        }
        if (seed.numel() != output.numel()) {
            throw TapeError("tape: seed shape " + seed.shape().str() +
                            " does not match output " + output.shape().str());
        }
        return backward_from(output.node(), seed.vec());
    }

    GradMap backward_from(NodeId out, std::vector<double> seed) {
        if (out < 0 || out >= static_cast<NodeId>(nodes_.size())) {
            throw TapeError("tape: unknown output node " + std::to_string(out));
        }
        if (seed.size() != nodes_[out].numel) {
            throw TapeError("tape: seed element count mismatch");
        }
        Grads sink(nodes_.size());
        sink.slots_[out] = std::move(seed);
        for (NodeId id = out; id >= 0; --id) {
            auto& g = sink.slots_[id];
            if (g.empty()) {
                continue;
            }
            const Node& node = nodes_[id];
            if (node.backward) {
                node.backward(g, sink);
            }
            if (!node.leaf) {
                // Interior grads are no longer needed once propagated.
                std::vector<double>().swap(g);
            }
        }
        GradMap out_map;
        out_map.tape_id_ = id_;
        for (NodeId id = 0; id < static_cast<NodeId>(nodes_.size()); ++id) {
            if (nodes_[id].leaf && !sink.slots_[id].empty()) {
                out_map.grads_.emplace(id, std::move(sink.slots_[id]));
            }
        }
        return out_map;
    }

private:
    static std::uint64_t next_id() {
        static std::atomic<std::uint64_t> counter{1};
        return counter.fetch_add(1);
    }

    struct Node {
        std::vector<NodeId> parents;
        std::size_t numel = 0;
        BackwardFn backward;
        bool leaf = false;
    };
    std::uint64_t id_ = 0;
    std::vector<Node> nodes_;
};

}  // namespace lrnn
