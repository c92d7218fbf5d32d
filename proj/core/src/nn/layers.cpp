#include "bd/nn/layers.hpp"

namespace bd::nn {

Tensor he_normal(Shape shape, int64_t fan_in, Rng& rng) {
    int64_t n = shape_numel(shape);
    std::vector<double> buf(static_cast<size_t>(n));
    double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : buf) v = rng.normal() * std;
    return Tensor::param(std::move(shape), std::move(buf));
}

Tensor clone_value(const Tensor& t) {
    if (t.is_leaf()) return Tensor::param(t.shape(), t.vec());
    return t.clone();
}

Conv2d Conv2d::make(int64_t cin, int64_t cout, int64_t kernel, int64_t stride, int64_t pad,
                    bool bias, Rng& rng) {
    Conv2d c;
    c.w = he_normal({cout, cin, kernel, kernel}, cin * kernel * kernel, rng);
    c.stride = stride;
    c.pad = pad;
    c.has_bias = bias;
    if (bias) c.b = Tensor::param_zeros({cout});
    return c;
}

Tensor Conv2d::forward(const Tensor& x) const {
    return conv2d(x, w, has_bias ? &b : nullptr, stride, pad);
}

void Conv2d::collect(const std::string& prefix, std::vector<Param>& params) {
    params.push_back({prefix + ".w", &w});
    if (has_bias) params.push_back({prefix + ".b", &b});
}

Conv2d Conv2d::clone() const {
    Conv2d c = *this;
    c.w = clone_value(w);
    if (has_bias) c.b = clone_value(b);
    return c;
}

int64_t Conv2d::flops(int64_t out_h, int64_t out_w) const {
    return 2 * w.dim(0) * w.dim(1) * w.dim(2) * w.dim(3) * out_h * out_w;
}

BatchNorm2d BatchNorm2d::make(int64_t channels) {
    BatchNorm2d bn;
    bn.gamma = Tensor::param_full({channels}, 1.0);
    bn.beta = Tensor::param_zeros({channels});
    bn.running_mean = Tensor::zeros({channels});
    bn.running_var = Tensor::full({channels}, 1.0);
    return bn;
}

Tensor BatchNorm2d::forward(const Tensor& x, bool training) {
    return batch_norm2d(x, gamma, beta, running_mean, running_var, training, momentum, eps);
}

void BatchNorm2d::collect(const std::string& prefix, std::vector<Param>& params,
                          std::vector<Param>& buffers) {
    params.push_back({prefix + ".gamma", &gamma});
    params.push_back({prefix + ".beta", &beta});
    buffers.push_back({prefix + ".running_mean", &running_mean});
    buffers.push_back({prefix + ".running_var", &running_var});
}

BatchNorm2d BatchNorm2d::clone() const {
    BatchNorm2d bn = *this;
    bn.gamma = clone_value(gamma);
    bn.beta = clone_value(beta);
    bn.running_mean = running_mean.clone();
    bn.running_var = running_var.clone();
    return bn;
}

Linear Linear::make(int64_t in, int64_t out, Rng& rng) {
    Linear l;
    l.w = he_normal({out, in}, in, rng);
    l.b = Tensor::param_zeros({1, out});
    return l;
}

Tensor Linear::forward(const Tensor& x) const {
    return add(matmul(x, transpose(w, 0, 1)), b);
}

void Linear::collect(const std::string& prefix, std::vector<Param>& params) {
    params.push_back({prefix + ".w", &w});
    params.push_back({prefix + ".b", &b});
}

Linear Linear::clone() const {
    Linear l = *this;
    l.w = clone_value(w);
    l.b = clone_value(b);
    return l;
}

BasicBlock BasicBlock::make(int64_t cin, int64_t cout, int64_t stride, Rng& rng) {
    BasicBlock blk;
    blk.conv1 = Conv2d::make(cin, cout, 3, stride, 1, false, rng);
    blk.bn1 = BatchNorm2d::make(cout);
    blk.conv2 = Conv2d::make(cout, cout, 3, 1, 1, false, rng);
    blk.bn2 = BatchNorm2d::make(cout);
    blk.has_down = stride != 1 || cin != cout;
    if (blk.has_down) {
        blk.down_conv = Conv2d::make(cin, cout, 1, stride, 0, false, rng);
        blk.down_bn = BatchNorm2d::make(cout);
    }
    return blk;
}

Tensor BasicBlock::forward(const Tensor& x, bool training) {
    Tensor h = relu(bn1.forward(conv1.forward(x), training));
    h = bn2.forward(conv2.forward(h), training);
    Tensor shortcut = has_down ? down_bn.forward(down_conv.forward(x), training) : x;
    return relu(add(h, shortcut));
}

void BasicBlock::collect(const std::string& prefix, std::vector<Param>& params,
                         std::vector<Param>& buffers) {
    conv1.collect(prefix + ".conv1", params);
    bn1.collect(prefix + ".bn1", params, buffers);
    conv2.collect(prefix + ".conv2", params);
    bn2.collect(prefix + ".bn2", params, buffers);
    if (has_down) {
        down_conv.collect(prefix + ".down_conv", params);
        down_bn.collect(prefix + ".down_bn", params, buffers);
    }
}

BasicBlock BasicBlock::clone() const {
    BasicBlock blk = *this;
    blk.conv1 = conv1.clone();
    blk.bn1 = bn1.clone();
    blk.conv2 = conv2.clone();
    blk.bn2 = bn2.clone();
    if (has_down) {
        blk.down_conv = down_conv.clone();
        blk.down_bn = down_bn.clone();
    }
    return blk;
}

int64_t BasicBlock::flops(int64_t in_h, int64_t in_w, int64_t& out_h, int64_t& out_w) const {
    out_h = (in_h + 2 * conv1.pad - conv1.w.dim(2)) / conv1.stride + 1;
    out_w = (in_w + 2 * conv1.pad - conv1.w.dim(3)) / conv1.stride + 1;
    int64_t f = conv1.flops(out_h, out_w) + conv2.flops(out_h, out_w);
    if (has_down) f += down_conv.flops(out_h, out_w);
    return f;
}

}  // namespace bd::nn
