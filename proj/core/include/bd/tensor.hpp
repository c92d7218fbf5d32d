#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "bd/errors.hpp"

namespace bd {

class Tape;

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

/// Per-leaf gradient sink, shared between all value copies of a parameter.
/// `grad` stays empty until backward() first touches the leaf.
struct GradState {
    std::vector<double> grad;
    // Cached leaf-node registration; stale once the tape is cleared.
    Tape* tape = nullptr;
    int32_t node = -1;
    uint64_t epoch = 0;
};

/// N-dimensional row-major array of 64-bit floats with an optional gradient
/// slot (leaves) and an optional tape-node identity (op results).
///
/// Copies are shallow: they alias the same value buffer. Ops never mutate
/// their inputs; in-place mutation (optimizer updates, running stats) goes
/// through data_mut() on tensors the caller uniquely owns.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor ones(Shape shape) { return full(std::move(shape), 1.0); }
    static Tensor from_data(Shape shape, std::vector<double> data);
    /// Shares an existing buffer under a new shape (no copy, no grad flow).
    static Tensor share(Shape shape, std::shared_ptr<std::vector<double>> data);
    /// Leaf with requires_grad=true.
    static Tensor param(Shape shape, std::vector<double> data);
    static Tensor param_zeros(Shape shape);
    static Tensor param_full(Shape shape, double value);

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t numel() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }
    bool defined() const { return static_cast<bool>(data_); }

    const double* data() const { return data_->data(); }
    const std::vector<double>& vec() const { return *data_; }
    /// Mutable access for single-owner updates (optimizers, BN running stats).
    double* data_mut() { return data_->data(); }
    std::vector<double>& vec_mut() { return *data_; }

    double item() const;

    bool is_leaf() const { return static_cast<bool>(grad_state_); }
    /// True when a backward pass can reach this tensor: either a leaf or a
    /// live op result on the given tape generation.
    bool requires_grad() const { return is_leaf() || node_ >= 0; }

    bool has_grad() const { return grad_state_ && !grad_state_->grad.empty(); }
    const std::vector<double>& grad() const;
    std::vector<double>& grad_mut();
    void zero_grad();

    /// Same values, no gradient flow. Shares the value buffer.
    Tensor detach() const;
    /// Deep copy of the values, no gradient flow.
    Tensor clone() const;

    // --- tape plumbing (used by ops and Tape) ---
    const std::shared_ptr<GradState>& grad_state() const { return grad_state_; }
    int32_t node() const { return node_; }
    uint64_t node_epoch() const { return node_epoch_; }
    Tape* tape() const { return tape_; }
    void bind_node(Tape* tape, int32_t node, uint64_t epoch) {
        tape_ = tape;
        node_ = node;
        node_epoch_ = epoch;
    }
    const std::shared_ptr<std::vector<double>>& storage() const { return data_; }

private:
    Shape shape_;
    std::shared_ptr<std::vector<double>> data_;
    std::shared_ptr<GradState> grad_state_;
    Tape* tape_ = nullptr;
    int32_t node_ = -1;
    uint64_t node_epoch_ = 0;
};

}  // namespace bd
