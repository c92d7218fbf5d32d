#pragma once

#include <vector>

#include "bd/tape.hpp"
#include "bd/tensor.hpp"

namespace bd {

// Differentiable primitives. Each op computes eagerly and records a tape
// node when (a) a tape is installed, (b) grad mode is on, and (c) at least
// one input participates in gradient flow. Binary ops broadcast extents of
// one against larger extents, numpy-style, within equal rank.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor clamp_min(const Tensor& a, double c);
Tensor neg(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double negative_slope = 0.2);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
/// Batched matmul: (B,M,K) x (B,K,N) -> (B,M,N).
Tensor bmm(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& a, Shape shape);
/// Swaps two axes (copying).
Tensor transpose(const Tensor& a, int axis_a, int axis_b);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, int64_t start, int64_t len);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor sum_axis(const Tensor& a, int axis, bool keepdim = false);
Tensor mean_axis(const Tensor& a, int axis, bool keepdim = false);
/// L2 norm over one axis (axis removed from the result).
Tensor norm_axis(const Tensor& a, int axis);

/// x: (B,Cin,H,W), w: (Cout,Cin,kh,kw), optional bias (Cout).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, int64_t stride, int64_t pad);
/// Ties resolve to the first index in row-major order.
Tensor max_pool2d(const Tensor& x, int64_t kernel, int64_t stride);
Tensor avg_pool2d(const Tensor& x, int64_t kernel, int64_t stride);
/// (B,C,H,W) -> (B,C), mean over the spatial extent.
Tensor global_avg_pool(const Tensor& x);

/// Per-channel batch normalization over (B,H,W). In training mode the batch
/// statistics normalize and the running buffers are updated in place; in
/// eval mode the running buffers normalize and nothing is mutated.
Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    Tensor& running_mean, Tensor& running_var,
                    bool training, double momentum = 0.1, double eps = 1e-5);

/// Normalizes each row of (B,N) to zero mean / unit variance, then scales
/// and shifts by gamma/beta (each (N,) or (1,N)).
Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Row softmax of (B,C) with max subtraction.
Tensor softmax_rows(const Tensor& logits);
Tensor log_softmax_rows(const Tensor& logits);

/// Constant (B,classes) one-hot matrix.
Tensor onehot(const std::vector<int64_t>& labels, int64_t classes);

/// When on, every op scans its output and throws NumericError on NaN/Inf.
void set_strict_numerics(bool on);
bool strict_numerics();

// --- generic dispatch surface ---

enum class OpKind {
    Add, Sub, Mul, Div,
    AddScalar, MulScalar, ClampMin, Neg,
    Relu, LeakyRelu, Exp, Log, Sqrt, Square,
    Matmul, Bmm,
    Reshape, Transpose, Concat, Slice,
    SumAll, MeanAll, SumAxis, MeanAxis, NormAxis,
    Conv2d, MaxPool2d, AvgPool2d, GlobalAvgPool,
    BatchNorm, LayerNorm,
    Softmax, LogSoftmax,
    Detach,
};

struct OpAttrs {
    double scalar = 0.0;         // AddScalar/MulScalar/ClampMin
    double slope = 0.2;          // LeakyRelu
    double eps = 1e-5;           // BatchNorm/LayerNorm
    double momentum = 0.1;       // BatchNorm
    bool training = true;        // BatchNorm
    int axis = 0;                // axis-wise ops
    int axis_b = 1;              // Transpose
    bool keepdim = false;        // reductions
    int64_t start = 0, len = 0;  // Slice
    int64_t stride = 1, pad = 0; // Conv2d
    int64_t kernel = 2;          // pooling
    Shape shape;                 // Reshape
};

/// Uniform entry point over the primitive set. Typed wrappers above are the
/// ordinary API; this exists for generic drivers and tests.
Tensor apply(OpKind kind, std::vector<Tensor> inputs, const OpAttrs& attrs = {});

const char* op_name(OpKind kind);

}  // namespace bd
