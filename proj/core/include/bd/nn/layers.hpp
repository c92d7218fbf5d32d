#pragma once

#include <string>
#include <vector>

#include "bd/ops.hpp"
#include "bd/rng.hpp"
#include "bd/tensor.hpp"

namespace bd::nn {

/// Named handle to a learnable leaf (or a persistent buffer).
struct Param {
    std::string name;
    Tensor* tensor;
};

Tensor he_normal(Shape shape, int64_t fan_in, Rng& rng);
/// Deep copy preserving leaf-ness.
Tensor clone_value(const Tensor& t);

struct Conv2d {
    Tensor w;  // (cout, cin, k, k)
    Tensor b;  // (cout,) when has_bias
    int64_t stride = 1, pad = 1;
    bool has_bias = false;

    static Conv2d make(int64_t cin, int64_t cout, int64_t kernel, int64_t stride, int64_t pad,
                       bool bias, Rng& rng);
    Tensor forward(const Tensor& x) const;
    void collect(const std::string& prefix, std::vector<Param>& params);
    Conv2d clone() const;
    int64_t flops(int64_t out_h, int64_t out_w) const;
};

struct BatchNorm2d {
    Tensor gamma, beta;
    Tensor running_mean, running_var;
    double momentum = 0.1, eps = 1e-5;

    static BatchNorm2d make(int64_t channels);
    Tensor forward(const Tensor& x, bool training);
    void collect(const std::string& prefix, std::vector<Param>& params, std::vector<Param>& buffers);
    BatchNorm2d clone() const;
};

struct Linear {
    Tensor w;  // (out, in)
    Tensor b;  // (1, out)

    static Linear make(int64_t in, int64_t out, Rng& rng);
    Tensor forward(const Tensor& x) const;
    void collect(const std::string& prefix, std::vector<Param>& params);
    Linear clone() const;
    int64_t flops() const { return 2 * w.dim(0) * w.dim(1); }
};

/// Standard two-conv residual block with an optional 1x1 projection shortcut.
struct BasicBlock {
    Conv2d conv1;
    BatchNorm2d bn1;
    Conv2d conv2;
    BatchNorm2d bn2;
    bool has_down = false;
    Conv2d down_conv;
    BatchNorm2d down_bn;

    static BasicBlock make(int64_t cin, int64_t cout, int64_t stride, Rng& rng);
    Tensor forward(const Tensor& x, bool training);
    void collect(const std::string& prefix, std::vector<Param>& params, std::vector<Param>& buffers);
    BasicBlock clone() const;
    int64_t flops(int64_t in_h, int64_t in_w, int64_t& out_h, int64_t& out_w) const;
};

}  // namespace bd::nn
