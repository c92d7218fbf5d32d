#include <cmath>

#include "bd/errors.hpp"
#include "ops_internal.hpp"

namespace bd {

namespace {
bool g_strict = false;
}

void set_strict_numerics(bool on) { g_strict = on; }
bool strict_numerics() { return g_strict; }

namespace detail {

void check_out(const char* op, const Tensor& out) {
    if (!g_strict) return;
    const double* p = out.data();
    int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) {
        if (!std::isfinite(p[i]))
            throw NumericError(std::string(op) + " produced a non-finite value at flat index " +
                               std::to_string(i));
    }
}

void shape_fail(const char* op, const Shape& a, const Shape& b) {
    throw ContractError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                        shape_str(b));
}

void shape_fail(const char* op, const Shape& a, const std::string& expect) {
    throw ContractError(std::string(op) + ": got shape " + shape_str(a) + ", expected " + expect);
}

std::vector<int64_t> contiguous_strides(const Shape& s) {
    std::vector<int64_t> st(s.size(), 0);
    int64_t acc = 1;
    for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
        st[static_cast<size_t>(i)] = acc;
        acc *= s[static_cast<size_t>(i)];
    }
    return st;
}

Bcast make_bcast(const char* op, const Shape& a, const Shape& b) {
    if (a == b) {
        Bcast p;
        p.out = a;
        p.sa = contiguous_strides(a);
        p.sb = p.sa;
        p.same = true;
        p.pattern = Bcast::Pattern::Same;
        return p;
    }
    // numpy alignment: pad the shorter shape with leading 1s
    size_t r = std::max(a.size(), b.size());
    Shape pa(r, 1), pb(r, 1);
    std::copy(a.begin(), a.end(), pa.begin() + static_cast<int64_t>(r - a.size()));
    std::copy(b.begin(), b.end(), pb.begin() + static_cast<int64_t>(r - b.size()));
    Bcast p;
    p.out.resize(r);
    for (size_t d = 0; d < r; ++d) {
        int64_t ea = pa[d], eb = pb[d];
        if (ea != eb && ea != 1 && eb != 1) shape_fail(op, a, b);
        p.out[d] = std::max(ea, eb);
    }
    p.sa = contiguous_strides(pa);
    p.sb = contiguous_strides(pb);
    for (size_t d = 0; d < r; ++d) {
        if (pa[d] == 1 && p.out[d] != 1) p.sa[d] = 0;
        if (pb[d] == 1 && p.out[d] != 1) p.sb[d] = 0;
    }
    if (r == 2 && p.out[0] > 1 && p.out[1] > 1) {
        p.rows = p.out[0];
        p.cols = p.out[1];
        bool a_full = pa == p.out, b_full = pb == p.out;
        if (a_full && pb[0] == 1 && pb[1] == p.out[1]) p.pattern = Bcast::Pattern::RowB;
        else if (a_full && pb[1] == 1 && pb[0] == p.out[0]) p.pattern = Bcast::Pattern::ColB;
        else if (b_full && pa[0] == 1 && pa[1] == p.out[1]) p.pattern = Bcast::Pattern::RowA;
        else if (b_full && pa[1] == 1 && pa[0] == p.out[0]) p.pattern = Bcast::Pattern::ColA;
    }
    return p;
}

}  // namespace detail

using detail::Bcast;
using detail::bcast_loop;
using detail::check_out;
using detail::make_bcast;
using detail::recording_tape;

namespace {

enum class BinOp { Add, Sub, Mul, Div };

inline double bin_eval(BinOp op, double x, double y) {
    switch (op) {
        case BinOp::Add: return x + y;
        case BinOp::Sub: return x - y;
        case BinOp::Mul: return x * y;
        case BinOp::Div: return x / y;
    }
    return 0.0;
}

const char* bin_name(BinOp op) {
    switch (op) {
        case BinOp::Add: return "add";
        case BinOp::Sub: return "sub";
        case BinOp::Mul: return "mul";
        case BinOp::Div: return "div";
    }
    return "?";
}

/// Backward of the row/column layouts: the full-shaped side gets elementwise
/// products, the vector side gets the matching reduction.
template <typename DFa, typename DFb>
void pattern_backward(const Bcast& p, const double* g, const double* av, const double* bv,
                      double* da, double* db, DFa dfa, DFb dfb) {
    int64_t rows = p.rows, cols = p.cols;
    switch (p.pattern) {
        case Bcast::Pattern::RowB:
            for (int64_t i = 0; i < rows; ++i)
                for (int64_t j = 0; j < cols; ++j) {
                    int64_t o = i * cols + j;
                    if (da) da[o] = g[o] * dfa(av[o], bv[j]);
                    if (db) db[j] += g[o] * dfb(av[o], bv[j]);
                }
            break;
        case Bcast::Pattern::ColB:
            for (int64_t i = 0; i < rows; ++i) {
                double bi = bv[i];
                double acc = 0.0;
                for (int64_t j = 0; j < cols; ++j) {
                    int64_t o = i * cols + j;
                    if (da) da[o] = g[o] * dfa(av[o], bi);
                    acc += g[o] * dfb(av[o], bi);
                }
                if (db) db[i] += acc;
            }
            break;
        case Bcast::Pattern::RowA:
            for (int64_t i = 0; i < rows; ++i)
                for (int64_t j = 0; j < cols; ++j) {
                    int64_t o = i * cols + j;
                    if (da) da[j] += g[o] * dfa(av[j], bv[o]);
                    if (db) db[o] = g[o] * dfb(av[j], bv[o]);
                }
            break;
        case Bcast::Pattern::ColA:
            for (int64_t i = 0; i < rows; ++i) {
                double ai = av[i];
                double acc = 0.0;
                for (int64_t j = 0; j < cols; ++j) {
                    int64_t o = i * cols + j;
                    acc += g[o] * dfa(ai, bv[o]);
                    if (db) db[o] = g[o] * dfb(ai, bv[o]);
                }
                if (da) da[i] += acc;
            }
            break;
        default: break;
    }
}

/// Row/column-vector broadcast loops, one tight nest per layout.
template <typename F>
void pattern_forward(const Bcast& p, const double* a, const double* b, double* o, F f) {
    int64_t rows = p.rows, cols = p.cols;
    switch (p.pattern) {
        case Bcast::Pattern::RowB:
            for (int64_t i = 0; i < rows; ++i)
                for (int64_t j = 0; j < cols; ++j) o[i * cols + j] = f(a[i * cols + j], b[j]);
            break;
        case Bcast::Pattern::ColB:
            for (int64_t i = 0; i < rows; ++i) {
                double bv = b[i];
                for (int64_t j = 0; j < cols; ++j) o[i * cols + j] = f(a[i * cols + j], bv);
            }
            break;
        case Bcast::Pattern::RowA:
            for (int64_t i = 0; i < rows; ++i)
                for (int64_t j = 0; j < cols; ++j) o[i * cols + j] = f(a[j], b[i * cols + j]);
            break;
        case Bcast::Pattern::ColA:
            for (int64_t i = 0; i < rows; ++i) {
                double av = a[i];
                for (int64_t j = 0; j < cols; ++j) o[i * cols + j] = f(av, b[i * cols + j]);
            }
            break;
        default: break;
    }
}

Tensor binary_op(BinOp op, const Tensor& a, const Tensor& b) {
    Bcast plan = make_bcast(bin_name(op), a.shape(), b.shape());
    int64_t n = shape_numel(plan.out);
    std::vector<double> buf(static_cast<size_t>(n));
    const double* pa = a.data();
    const double* pb = b.data();
    if (plan.same) {
        switch (op) {
            case BinOp::Add: for (int64_t i = 0; i < n; ++i) buf[i] = pa[i] + pb[i]; break;
            case BinOp::Sub: for (int64_t i = 0; i < n; ++i) buf[i] = pa[i] - pb[i]; break;
            case BinOp::Mul: for (int64_t i = 0; i < n; ++i) buf[i] = pa[i] * pb[i]; break;
            case BinOp::Div: for (int64_t i = 0; i < n; ++i) buf[i] = pa[i] / pb[i]; break;
        }
    } else if (plan.pattern != Bcast::Pattern::Generic) {
        switch (op) {
            case BinOp::Add:
                pattern_forward(plan, pa, pb, buf.data(), [](double x, double y) { return x + y; });
                break;
            case BinOp::Sub:
                pattern_forward(plan, pa, pb, buf.data(), [](double x, double y) { return x - y; });
                break;
            case BinOp::Mul:
                pattern_forward(plan, pa, pb, buf.data(), [](double x, double y) { return x * y; });
                break;
            case BinOp::Div:
                pattern_forward(plan, pa, pb, buf.data(), [](double x, double y) { return x / y; });
                break;
        }
    } else {
        bcast_loop(plan, [&](int64_t o, int64_t ia, int64_t ib) {
            buf[o] = bin_eval(op, pa[ia], pb[ib]);
        });
    }
    Tensor out = Tensor::from_data(plan.out, std::move(buf));

    if (Tape* t = recording_tape()) {
        int32_t ia_node = node_id_for(*t, a);
        int32_t ib_node = node_id_for(*t, b);
        if (ia_node >= 0 || ib_node >= 0) {
            Tensor a_val = a.detach();
            Tensor b_val = b.detach();
            int64_t na = a.numel(), nb = b.numel();
            int32_t nid = t->emit(
                [op, ia_node, ib_node, plan, a_val, b_val, na, nb](Tape& tp,
                                                                   const std::vector<double>& g) {
                    const double* av = a_val.data();
                    const double* bv = b_val.data();
                    if (plan.same) {
                        // flat path: no index bookkeeping on the hot shapes
                        int64_t n = na;
                        std::vector<double> buf(static_cast<size_t>(n));
                        if (ia_node >= 0) {
                            switch (op) {
                                case BinOp::Add:
                                case BinOp::Sub:
                                    tp.accumulate(ia_node, g.data(), n);
                                    break;
                                case BinOp::Mul:
                                    for (int64_t i = 0; i < n; ++i) buf[i] = g[static_cast<size_t>(i)] * bv[i];
                                    tp.accumulate(ia_node, buf.data(), n);
                                    break;
                                case BinOp::Div:
                                    for (int64_t i = 0; i < n; ++i) buf[i] = g[static_cast<size_t>(i)] / bv[i];
                                    tp.accumulate(ia_node, buf.data(), n);
                                    break;
                            }
                        }
                        if (ib_node >= 0) {
                            switch (op) {
                                case BinOp::Add:
                                    tp.accumulate(ib_node, g.data(), n);
                                    break;
                                case BinOp::Sub:
                                    for (int64_t i = 0; i < n; ++i) buf[i] = -g[static_cast<size_t>(i)];
                                    tp.accumulate(ib_node, buf.data(), n);
                                    break;
                                case BinOp::Mul:
                                    for (int64_t i = 0; i < n; ++i) buf[i] = g[static_cast<size_t>(i)] * av[i];
                                    tp.accumulate(ib_node, buf.data(), n);
                                    break;
                                case BinOp::Div:
                                    for (int64_t i = 0; i < n; ++i)
                                        buf[i] = -g[static_cast<size_t>(i)] * av[i] / (bv[i] * bv[i]);
                                    tp.accumulate(ib_node, buf.data(), n);
                                    break;
                            }
                        }
                        return;
                    }
                    std::vector<double> da, db;
                    if (ia_node >= 0) da.assign(static_cast<size_t>(na), 0.0);
                    if (ib_node >= 0) db.assign(static_cast<size_t>(nb), 0.0);
                    if (plan.pattern != Bcast::Pattern::Generic) {
                        double* pda = ia_node >= 0 ? da.data() : nullptr;
                        double* pdb = ib_node >= 0 ? db.data() : nullptr;
                        switch (op) {
                            case BinOp::Add:
                                pattern_backward(plan, g.data(), av, bv, pda, pdb,
                                                 [](double, double) { return 1.0; },
                                                 [](double, double) { return 1.0; });
                                break;
                            case BinOp::Sub:
                                pattern_backward(plan, g.data(), av, bv, pda, pdb,
                                                 [](double, double) { return 1.0; },
                                                 [](double, double) { return -1.0; });
                                break;
                            case BinOp::Mul:
                                pattern_backward(plan, g.data(), av, bv, pda, pdb,
                                                 [](double, double y) { return y; },
                                                 [](double x, double) { return x; });
                                break;
                            case BinOp::Div:
                                pattern_backward(plan, g.data(), av, bv, pda, pdb,
                                                 [](double, double y) { return 1.0 / y; },
                                                 [](double x, double y) { return -x / (y * y); });
                                break;
                        }
                        if (ia_node >= 0) tp.accumulate(ia_node, da.data(), na);
                        if (ib_node >= 0) tp.accumulate(ib_node, db.data(), nb);
                        return;
                    }
                    bcast_loop(plan, [&](int64_t o, int64_t ia, int64_t ib) {
                        double go = g[static_cast<size_t>(o)];
                        switch (op) {
                            case BinOp::Add:
                                if (ia_node >= 0) da[static_cast<size_t>(ia)] += go;
                                if (ib_node >= 0) db[static_cast<size_t>(ib)] += go;
                                break;
                            case BinOp::Sub:
                                if (ia_node >= 0) da[static_cast<size_t>(ia)] += go;
                                if (ib_node >= 0) db[static_cast<size_t>(ib)] -= go;
                                break;
                            case BinOp::Mul:
                                if (ia_node >= 0) da[static_cast<size_t>(ia)] += go * bv[ib];
                                if (ib_node >= 0) db[static_cast<size_t>(ib)] += go * av[ia];
                                break;
                            case BinOp::Div: {
                                double inv = 1.0 / bv[ib];
                                if (ia_node >= 0) da[static_cast<size_t>(ia)] += go * inv;
                                if (ib_node >= 0)
                                    db[static_cast<size_t>(ib)] -= go * av[ia] * inv * inv;
                                break;
                            }
                        }
                    });
                    if (ia_node >= 0) tp.accumulate(ia_node, da.data(), na);
                    if (ib_node >= 0) tp.accumulate(ib_node, db.data(), nb);
                },
                {ia_node, ib_node}, n);
            out.bind_node(t, nid, t->epoch());
        }
    }
    check_out(bin_name(op), out);
    return out;
}

/// Unary elementwise op: f(value) and df(value, out_value) for the backward.
template <typename F, typename DF>
Tensor unary_op(const char* name, const Tensor& a, F&& f, DF&& df) {
    int64_t n = a.numel();
    std::vector<double> buf(static_cast<size_t>(n));
    const double* pa = a.data();
    for (int64_t i = 0; i < n; ++i) buf[i] = f(pa[i]);
    Tensor out = Tensor::from_data(a.shape(), std::move(buf));
    if (Tape* t = recording_tape()) {
        int32_t ia = node_id_for(*t, a);
        if (ia >= 0) {
            Tensor a_val = a.detach();
            Tensor o_val = out.detach();
            int32_t nid = t->emit(
                [ia, a_val, o_val, n, df](Tape& tp, const std::vector<double>& g) {
                    const double* av = a_val.data();
                    const double* ov = o_val.data();
                    std::vector<double> da(static_cast<size_t>(n));
                    for (int64_t i = 0; i < n; ++i) da[i] = g[static_cast<size_t>(i)] * df(av[i], ov[i]);
                    tp.accumulate(ia, da.data(), n);
                },
                {ia}, n);
            out.bind_node(t, nid, t->epoch());
        }
    }
    check_out(name, out);
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(BinOp::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(BinOp::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(BinOp::Mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op(BinOp::Div, a, b); }

Tensor add_scalar(const Tensor& a, double c) {
    return unary_op("add_scalar", a, [c](double x) { return x + c; },
                    [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double c) {
    return unary_op("mul_scalar", a, [c](double x) { return x * c; },
                    [c](double, double) { return c; });
}

Tensor clamp_min(const Tensor& a, double c) {
    return unary_op("clamp_min", a, [c](double x) { return x > c ? x : c; },
                    [c](double x, double) { return x > c ? 1.0 : 0.0; });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor relu(const Tensor& a) {
    return unary_op("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                    [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double negative_slope) {
    double s = negative_slope;
    return unary_op("leaky_relu", a, [s](double x) { return x > 0.0 ? x : s * x; },
                    [s](double x, double) { return x > 0.0 ? 1.0 : s; });
}

Tensor exp(const Tensor& a) {
    return unary_op("exp", a, [](double x) { return std::exp(x); },
                    [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary_op("log", a, [](double x) { return std::log(x); },
                    [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
    return unary_op("sqrt", a, [](double x) { return std::sqrt(x); },
                    [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& a) {
    return unary_op("square", a, [](double x) { return x * x; },
                    [](double x, double) { return 2.0 * x; });
}

const char* op_name(OpKind kind) {
    switch (kind) {
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::Div: return "div";
        case OpKind::AddScalar: return "add_scalar";
        case OpKind::MulScalar: return "mul_scalar";
        case OpKind::ClampMin: return "clamp_min";
        case OpKind::Neg: return "neg";
        case OpKind::Relu: return "relu";
        case OpKind::LeakyRelu: return "leaky_relu";
        case OpKind::Exp: return "exp";
        case OpKind::Log: return "log";
        case OpKind::Sqrt: return "sqrt";
        case OpKind::Square: return "square";
        case OpKind::Matmul: return "matmul";
        case OpKind::Bmm: return "bmm";
        case OpKind::Reshape: return "reshape";
        case OpKind::Transpose: return "transpose";
        case OpKind::Concat: return "concat";
        case OpKind::Slice: return "slice";
        case OpKind::SumAll: return "sum_all";
        case OpKind::MeanAll: return "mean_all";
        case OpKind::SumAxis: return "sum_axis";
        case OpKind::MeanAxis: return "mean_axis";
        case OpKind::NormAxis: return "norm_axis";
        case OpKind::Conv2d: return "conv2d";
        case OpKind::MaxPool2d: return "max_pool2d";
        case OpKind::AvgPool2d: return "avg_pool2d";
        case OpKind::GlobalAvgPool: return "global_avg_pool";
        case OpKind::BatchNorm: return "batch_norm";
        case OpKind::LayerNorm: return "layer_norm";
        case OpKind::Softmax: return "softmax";
        case OpKind::LogSoftmax: return "log_softmax";
        case OpKind::Detach: return "detach";
    }
    return "?";
}

namespace {
void want(OpKind kind, const std::vector<Tensor>& in, size_t n) {
    if (in.size() != n)
        throw ContractError(std::string(op_name(kind)) + ": expected " + std::to_string(n) +
                            " inputs, got " + std::to_string(in.size()));
}
}  // namespace

Tensor apply(OpKind kind, std::vector<Tensor> in, const OpAttrs& at) {
    switch (kind) {
        case OpKind::Add: want(kind, in, 2); return add(in[0], in[1]);
        case OpKind::Sub: want(kind, in, 2); return sub(in[0], in[1]);
        case OpKind::Mul: want(kind, in, 2); return mul(in[0], in[1]);
        case OpKind::Div: want(kind, in, 2); return div(in[0], in[1]);
        case OpKind::AddScalar: want(kind, in, 1); return add_scalar(in[0], at.scalar);
        case OpKind::MulScalar: want(kind, in, 1); return mul_scalar(in[0], at.scalar);
        case OpKind::ClampMin: want(kind, in, 1); return clamp_min(in[0], at.scalar);
        case OpKind::Neg: want(kind, in, 1); return neg(in[0]);
        case OpKind::Relu: want(kind, in, 1); return relu(in[0]);
        case OpKind::LeakyRelu: want(kind, in, 1); return leaky_relu(in[0], at.slope);
        case OpKind::Exp: want(kind, in, 1); return exp(in[0]);
        case OpKind::Log: want(kind, in, 1); return log(in[0]);
        case OpKind::Sqrt: want(kind, in, 1); return sqrt(in[0]);
        case OpKind::Square: want(kind, in, 1); return square(in[0]);
        case OpKind::Matmul: want(kind, in, 2); return matmul(in[0], in[1]);
        case OpKind::Bmm: want(kind, in, 2); return bmm(in[0], in[1]);
        case OpKind::Reshape: want(kind, in, 1); return reshape(in[0], at.shape);
        case OpKind::Transpose: want(kind, in, 1); return transpose(in[0], at.axis, at.axis_b);
        case OpKind::Concat: return concat(in, at.axis);
        case OpKind::Slice: want(kind, in, 1); return slice(in[0], at.axis, at.start, at.len);
        case OpKind::SumAll: want(kind, in, 1); return sum_all(in[0]);
        case OpKind::MeanAll: want(kind, in, 1); return mean_all(in[0]);
        case OpKind::SumAxis: want(kind, in, 1); return sum_axis(in[0], at.axis, at.keepdim);
        case OpKind::MeanAxis: want(kind, in, 1); return mean_axis(in[0], at.axis, at.keepdim);
        case OpKind::NormAxis: want(kind, in, 1); return norm_axis(in[0], at.axis);
        case OpKind::Conv2d:
            if (in.size() == 2) return conv2d(in[0], in[1], nullptr, at.stride, at.pad);
            want(kind, in, 3);
            return conv2d(in[0], in[1], &in[2], at.stride, at.pad);
        case OpKind::MaxPool2d: want(kind, in, 1); return max_pool2d(in[0], at.kernel, at.stride);
        case OpKind::AvgPool2d: want(kind, in, 1); return avg_pool2d(in[0], at.kernel, at.stride);
        case OpKind::GlobalAvgPool: want(kind, in, 1); return global_avg_pool(in[0]);
        case OpKind::BatchNorm:
            want(kind, in, 5);
            return batch_norm2d(in[0], in[1], in[2], in[3], in[4], at.training, at.momentum, at.eps);
        case OpKind::LayerNorm: want(kind, in, 3); return layer_norm_rows(in[0], in[1], in[2], at.eps);
        case OpKind::Softmax: want(kind, in, 1); return softmax_rows(in[0]);
        case OpKind::LogSoftmax: want(kind, in, 1); return log_softmax_rows(in[0]);
        case OpKind::Detach: want(kind, in, 1); return in[0].detach();
    }
    throw ContractError("apply: unknown op kind");
}

}  // namespace bd
