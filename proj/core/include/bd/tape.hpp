#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "bd/tensor.hpp"

namespace bd {

/// Dynamically built reverse-mode tape. Nodes are appended in evaluation
/// order, so inputs always precede the node that consumes them; backward()
/// is a single reverse sweep over that order.
///
/// Single-owner: one thread of control per tape. clear() bumps the epoch,
/// which atomically invalidates every node identifier held by tensors.
class Tape {
public:
    /// Accumulates into the adjoint buffers of this node's inputs.
    /// Receives the node's own adjoint.
    using BackwardFn = std::function<void(Tape&, const std::vector<double>&)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    int32_t emit(BackwardFn backward, std::vector<int32_t> inputs, int64_t out_numel);
    int32_t leaf(const std::shared_ptr<GradState>& sink, int64_t numel);

    /// Reverse sweep from `loss` (scalar, recorded on this tape). Populates
    /// the grad buffers of every reachable leaf, accumulating additively.
    void backward(const Tensor& loss);

    void clear();
    uint64_t epoch() const { return epoch_; }
    size_t size() const { return nodes_.size(); }

    /// Adds g (length n) into the adjoint of `node`. No-op for node < 0.
    void accumulate(int32_t node, const double* g, int64_t n);
    /// Adjoint of a node during backward (empty if untouched).
    const std::vector<double>& adjoint(int32_t node) const { return nodes_[static_cast<size_t>(node)].adj; }

private:
    struct Node {
        BackwardFn backward;  // null for leaves
        std::vector<int32_t> inputs;
        std::shared_ptr<GradState> sink;  // leaves only
        std::vector<double> adj;
        int64_t numel = 0;
    };
    std::vector<Node> nodes_;
    uint64_t epoch_ = 1;
};

/// Installs a tape as the thread's recording target for its lifetime.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* prev_;
};

/// Disables recording for its lifetime (inference / data-only passes).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

Tape* current_tape();
bool grad_enabled();

/// Node id of `t` on tape `tape`, registering a leaf node on first use in
/// this tape generation. Returns -1 for constants (no gradient flow).
int32_t node_id_for(Tape& tape, const Tensor& t);

}  // namespace bd
