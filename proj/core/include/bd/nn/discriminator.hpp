#pragma once

#include <vector>

#include "bd/nn/layers.hpp"

namespace bd::nn {

/// Wasserstein critic over (class probabilities | input image): a stack of
/// fully connected blocks (linear -> layer normalization -> leaky ReLU)
/// ending in a linear scalar head, no sigmoid. The condition image enters
/// the first linear layer either flattened or average-pooled.
struct DiscriminatorSpec {
    int64_t classes = 10;
    int64_t cond_channels = 3, cond_h = 32, cond_w = 32;
    enum class Cond { Flatten, AvgPool } cond_mode = Cond::Flatten;
    int64_t pool_to = 7;   // spatial target in AvgPool mode
    int64_t hidden = 256;  // width of each hidden block
    int64_t layers = 3;    // hidden block count; 0 degenerates to a linear critic
    double slope = 0.2;
    double ln_eps = 1e-5;

    int64_t cond_dim() const;
};

/// Plain-matrix export for independent reference evaluation.
struct DiscSnapshot {
    DiscriminatorSpec spec;
    std::vector<double> w1_p, w1_c, b1, ln1_g, ln1_b;
    struct HiddenW {
        std::vector<double> w, b, ln_g, ln_b;
    };
    std::vector<HiddenW> rest;
    std::vector<double> w_out, b_out;
};

struct DiscCounters {
    uint64_t cond_evals = 0;
    uint64_t score_evals = 0;
    uint64_t input_grad_evals = 0;
};

class Discriminator {
public:
    Discriminator() = default;
    static Discriminator build(const DiscriminatorSpec& spec, Rng& rng);

    /// Projects the condition image through its slice of the first linear
    /// layer. One projection per batch serves every score/input_grad call.
    Tensor make_cond(const Tensor& images);

    /// Critic score per sample, shape (B,).
    Tensor score(const Tensor& p, const Tensor& cond_proj);
    Tensor score_direct(const Tensor& p, const Tensor& images);

    /// Exact gradient of the score wrt the probability input, built as a
    /// differentiable expression: transposed linear maps and layer-norm
    /// Jacobians stay live on the tape; leaky-ReLU derivative masks are
    /// detached constants. Shape (B, classes).
    Tensor input_grad(const Tensor& p_hat, const Tensor& cond_proj);

    /// While frozen, every parameter enters expressions detached, so no
    /// gradient can reach the critic.
    void set_frozen(bool on) { frozen_ = on; }
    bool frozen() const { return frozen_; }

    const DiscriminatorSpec& spec() const { return spec_; }
    std::vector<Param> params();
    DiscSnapshot snapshot() const;
    const DiscCounters& counters() const { return counters_; }
    void reset_counters() { counters_ = {}; }

private:
    struct Trace;
    Tensor forward_impl(const Tensor& p, const Tensor& cond_proj, Trace* trace);
    Tensor maybe_frozen(const Tensor& t) const { return frozen_ ? t.detach() : t; }

    DiscriminatorSpec spec_;
    // First linear layer, split into the probability and condition slices of
    // the concatenated input (w = [w1_p | w1_c]).
    Tensor w1_p_, w1_c_, b1_, ln1_g_, ln1_b_;
    struct Hidden {
        Tensor w, b, ln_g, ln_b;
    };
    std::vector<Hidden> rest_;
    Tensor w_out_, b_out_;
    bool frozen_ = false;
    DiscCounters counters_;
};

/// RAII critic freeze for generator-side evaluations.
class FreezeGuard {
public:
    explicit FreezeGuard(Discriminator& d) : d_(d), prev_(d.frozen()) { d_.set_frozen(true); }
    ~FreezeGuard() { d_.set_frozen(prev_); }

private:
    Discriminator& d_;
    bool prev_;
};

}  // namespace bd::nn
