#include <cstring>
#include <memory>

#include "bd/gemm.hpp"
#include "ops_internal.hpp"

namespace bd {

using detail::check_out;
using detail::recording_tape;
using detail::shape_fail;

namespace {

struct ConvDims {
    int64_t b, cin, h, w, cout, kh, kw, oh, ow;
    int64_t stride, pad;
    int64_t ckk() const { return cin * kh * kw; }
    int64_t osp() const { return oh * ow; }
};

// col(ckk, B*oh*ow); column index = b*osp + oh*ow_index.
void im2col(const ConvDims& d, const double* x, double* col) {
    int64_t cols = d.b * d.osp();
    for (int64_t ci = 0; ci < d.cin; ++ci) {
        for (int64_t u = 0; u < d.kh; ++u) {
            for (int64_t v = 0; v < d.kw; ++v) {
                double* crow = col + ((ci * d.kh + u) * d.kw + v) * cols;
                for (int64_t bi = 0; bi < d.b; ++bi) {
                    const double* xc = x + (bi * d.cin + ci) * d.h * d.w;
                    double* cb = crow + bi * d.osp();
                    for (int64_t oy = 0; oy < d.oh; ++oy) {
                        int64_t iy = oy * d.stride + u - d.pad;
                        double* cr = cb + oy * d.ow;
                        if (iy < 0 || iy >= d.h) {
                            std::memset(cr, 0, static_cast<size_t>(d.ow) * sizeof(double));
                            continue;
                        }
                        const double* xr = xc + iy * d.w;
                        if (d.stride == 1) {
                            int64_t x0 = std::max<int64_t>(0, d.pad - v);
                            int64_t x1 = std::min(d.ow, d.w + d.pad - v);
                            if (x0 > 0) std::memset(cr, 0, static_cast<size_t>(x0) * sizeof(double));
                            if (x1 > x0)
                                std::memcpy(cr + x0, xr + x0 + v - d.pad,
                                            static_cast<size_t>(x1 - x0) * sizeof(double));
                            if (x1 < d.ow)
                                std::memset(cr + x1, 0,
                                            static_cast<size_t>(d.ow - x1) * sizeof(double));
                        } else {
                            for (int64_t ox = 0; ox < d.ow; ++ox) {
                                int64_t ix = ox * d.stride + v - d.pad;
                                cr[ox] = (ix >= 0 && ix < d.w) ? xr[ix] : 0.0;
                            }
                        }
                    }
                }
            }
        }
    }
}

void col2im(const ConvDims& d, const double* col, double* dx) {
    int64_t cols = d.b * d.osp();
    for (int64_t ci = 0; ci < d.cin; ++ci) {
        for (int64_t u = 0; u < d.kh; ++u) {
            for (int64_t v = 0; v < d.kw; ++v) {
                const double* crow = col + ((ci * d.kh + u) * d.kw + v) * cols;
                for (int64_t bi = 0; bi < d.b; ++bi) {
                    double* xc = dx + (bi * d.cin + ci) * d.h * d.w;
                    const double* cb = crow + bi * d.osp();
                    for (int64_t oy = 0; oy < d.oh; ++oy) {
                        int64_t iy = oy * d.stride + u - d.pad;
                        if (iy < 0 || iy >= d.h) continue;
                        double* xr = xc + iy * d.w;
                        const double* cr = cb + oy * d.ow;
                        if (d.stride == 1) {
                            int64_t x0 = std::max<int64_t>(0, d.pad - v);
                            int64_t x1 = std::min(d.ow, d.w + d.pad - v);
                            double* xs = xr + x0 + v - d.pad;
                            for (int64_t ox = x0; ox < x1; ++ox) xs[ox - x0] += cr[ox];
                        } else {
                            for (int64_t ox = 0; ox < d.ow; ++ox) {
                                int64_t ix = ox * d.stride + v - d.pad;
                                if (ix >= 0 && ix < d.w) xr[ix] += cr[ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, int64_t stride, int64_t pad) {
    if (x.rank() != 4 || w.rank() != 4) shape_fail("conv2d", x.shape(), w.shape());
    if (x.dim(1) != w.dim(1)) shape_fail("conv2d", x.shape(), w.shape());
    if (stride < 1 || pad < 0) throw ContractError("conv2d: bad stride/pad");
    ConvDims d;
    d.b = x.dim(0); d.cin = x.dim(1); d.h = x.dim(2); d.w = x.dim(3);
    d.cout = w.dim(0); d.kh = w.dim(2); d.kw = w.dim(3);
    d.stride = stride; d.pad = pad;
    d.oh = (d.h + 2 * pad - d.kh) / stride + 1;
    d.ow = (d.w + 2 * pad - d.kw) / stride + 1;
    if (d.oh < 1 || d.ow < 1) shape_fail("conv2d", x.shape(), "kernel larger than padded input");
    if (bias && (bias->rank() != 1 || bias->dim(0) != d.cout))
        shape_fail("conv2d", bias->shape(), "(cout,) bias");

    int64_t cols = d.b * d.osp();
    auto col = std::make_shared<std::vector<double>>(static_cast<size_t>(d.ckk() * cols));
    im2col(d, x.data(), col->data());

    // out_mat(cout, B*osp) = W(cout, ckk) * col
    std::vector<double> out_mat(static_cast<size_t>(d.cout * cols));
    gemm_nn(d.cout, cols, d.ckk(), w.data(), d.ckk(), col->data(), cols, out_mat.data(), cols);

    std::vector<double> buf(static_cast<size_t>(d.b * d.cout * d.osp()));
    const double* bv = bias ? bias->data() : nullptr;
    for (int64_t bi = 0; bi < d.b; ++bi)
        for (int64_t co = 0; co < d.cout; ++co) {
            const double* src = out_mat.data() + co * cols + bi * d.osp();
            double* dst = buf.data() + (bi * d.cout + co) * d.osp();
            if (bv) {
                double bb = bv[co];
                for (int64_t s = 0; s < d.osp(); ++s) dst[s] = src[s] + bb;
            } else {
                std::memcpy(dst, src, static_cast<size_t>(d.osp()) * sizeof(double));
            }
        }
    Tensor out = Tensor::from_data({d.b, d.cout, d.oh, d.ow}, std::move(buf));

    if (Tape* t = recording_tape()) {
        int32_t ix = node_id_for(*t, x);
        int32_t iw = node_id_for(*t, w);
        int32_t ib = bias ? node_id_for(*t, *bias) : -1;
        if (ix >= 0 || iw >= 0 || ib >= 0) {
            Tensor w_val = w.detach();
            int32_t nid = t->emit(
                [d, ix, iw, ib, col, w_val, cols](Tape& tp, const std::vector<double>& g) {
                    // gather g into (cout, B*osp)
                    std::vector<double> g_mat(static_cast<size_t>(d.cout * cols));
                    for (int64_t bi = 0; bi < d.b; ++bi)
                        for (int64_t co = 0; co < d.cout; ++co)
                            std::memcpy(g_mat.data() + co * cols + bi * d.osp(),
                                        g.data() + (bi * d.cout + co) * d.osp(),
                                        static_cast<size_t>(d.osp()) * sizeof(double));
                    if (ib >= 0) {
                        std::vector<double> db(static_cast<size_t>(d.cout), 0.0);
                        for (int64_t co = 0; co < d.cout; ++co) {
                            const double* row = g_mat.data() + co * cols;
                            double acc = 0.0;
                            for (int64_t s = 0; s < cols; ++s) acc += row[s];
                            db[static_cast<size_t>(co)] = acc;
                        }
                        tp.accumulate(ib, db.data(), d.cout);
                    }
                    if (iw >= 0) {
                        // dW^T = col * g_mat^T, transposing the small factor
                        // instead of the (ckk x B*osp) col buffer
                        std::vector<double> gT(static_cast<size_t>(cols * d.cout));
                        transpose_copy(d.cout, cols, g_mat.data(), cols, gT.data(), d.cout);
                        std::vector<double> dwT(static_cast<size_t>(d.ckk() * d.cout));
                        gemm_nn(d.ckk(), d.cout, cols, col->data(), cols, gT.data(), d.cout,
                                dwT.data(), d.cout);
                        std::vector<double> dw(static_cast<size_t>(d.cout * d.ckk()));
                        transpose_copy(d.ckk(), d.cout, dwT.data(), d.cout, dw.data(), d.ckk());
                        tp.accumulate(iw, dw.data(), d.cout * d.ckk());
                    }
                    if (ix >= 0) {
                        // dcol = W^T * g_mat, then scatter
                        std::vector<double> wT(static_cast<size_t>(d.ckk() * d.cout));
                        transpose_copy(d.cout, d.ckk(), w_val.data(), d.ckk(), wT.data(), d.cout);
                        std::vector<double> dcol(static_cast<size_t>(d.ckk() * cols));
                        gemm_nn(d.ckk(), cols, d.cout, wT.data(), d.cout, g_mat.data(), cols,
                                dcol.data(), cols);
                        std::vector<double> dx(static_cast<size_t>(d.b * d.cin * d.h * d.w), 0.0);
                        col2im(d, dcol.data(), dx.data());
                        tp.accumulate(ix, dx.data(), d.b * d.cin * d.h * d.w);
                    }
                },
                {ix, iw, ib}, out.numel());
            out.bind_node(t, nid, t->epoch());
        }
    }
    check_out("conv2d", out);
    return out;
}

}  // namespace bd
