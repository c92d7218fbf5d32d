#include <cstring>
#include <memory>

#include "ops_internal.hpp"

namespace bd {

using detail::check_out;
using detail::recording_tape;
using detail::shape_fail;

namespace {
struct PoolDims {
    int64_t b, c, h, w, k, stride, oh, ow;
};
PoolDims pool_dims(const char* op, const Tensor& x, int64_t k, int64_t stride) {
    if (x.rank() != 4) shape_fail(op, x.shape(), "(B,C,H,W)");
    if (k < 1 || stride < 1) throw ContractError(std::string(op) + ": bad kernel/stride");
    PoolDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), k, stride, 0, 0};
    d.oh = (d.h - k) / stride + 1;
    d.ow = (d.w - k) / stride + 1;
    if (d.oh < 1 || d.ow < 1) shape_fail(op, x.shape(), "kernel fits input");
    return d;
}
}  // namespace

Tensor max_pool2d(const Tensor& x, int64_t kernel, int64_t stride) {
    PoolDims d = pool_dims("max_pool2d", x, kernel, stride);
    int64_t planes = d.b * d.c;
    std::vector<double> buf(static_cast<size_t>(planes * d.oh * d.ow));
    auto argmax = std::make_shared<std::vector<int64_t>>(buf.size());
    const double* p = x.data();
    for (int64_t pl = 0; pl < planes; ++pl) {
        const double* xp = p + pl * d.h * d.w;
        for (int64_t oy = 0; oy < d.oh; ++oy)
            for (int64_t ox = 0; ox < d.ow; ++ox) {
                int64_t iy0 = oy * d.stride, ix0 = ox * d.stride;
                double best = xp[iy0 * d.w + ix0];
                int64_t best_at = iy0 * d.w + ix0;
                for (int64_t u = 0; u < d.k; ++u)
                    for (int64_t v = 0; v < d.k; ++v) {
                        int64_t at = (iy0 + u) * d.w + ix0 + v;
                        // strict > keeps the first row-major index on ties
                        if (xp[at] > best) {
                            best = xp[at];
                            best_at = at;
                        }
                    }
                int64_t o = pl * d.oh * d.ow + oy * d.ow + ox;
                buf[static_cast<size_t>(o)] = best;
                (*argmax)[static_cast<size_t>(o)] = pl * d.h * d.w + best_at;
            }
    }
    Tensor out = Tensor::from_data({d.b, d.c, d.oh, d.ow}, std::move(buf));
    if (Tape* t = recording_tape()) {
        int32_t ia = node_id_for(*t, x);
        if (ia >= 0) {
            int64_t nx = x.numel(), no = out.numel();
            int32_t nid = t->emit(
                [ia, argmax, nx, no](Tape& tp, const std::vector<double>& g) {
                    std::vector<double> dx(static_cast<size_t>(nx), 0.0);
                    for (int64_t o = 0; o < no; ++o)
                        dx[static_cast<size_t>((*argmax)[static_cast<size_t>(o)])] +=
                            g[static_cast<size_t>(o)];
                    tp.accumulate(ia, dx.data(), nx);
                },
                {ia}, no);
            out.bind_node(t, nid, t->epoch());
        }
    }
    check_out("max_pool2d", out);
    return out;
}

Tensor avg_pool2d(const Tensor& x, int64_t kernel, int64_t stride) {
    PoolDims d = pool_dims("avg_pool2d", x, kernel, stride);
    int64_t planes = d.b * d.c;
    double inv = 1.0 / static_cast<double>(d.k * d.k);
    std::vector<double> buf(static_cast<size_t>(planes * d.oh * d.ow));
    const double* p = x.data();
    for (int64_t pl = 0; pl < planes; ++pl) {
        const double* xp = p + pl * d.h * d.w;
        for (int64_t oy = 0; oy < d.oh; ++oy)
            for (int64_t ox = 0; ox < d.ow; ++ox) {
                double acc = 0.0;
                for (int64_t u = 0; u < d.k; ++u)
                    for (int64_t v = 0; v < d.k; ++v)
                        acc += xp[(oy * d.stride + u) * d.w + ox * d.stride + v];
                buf[static_cast<size_t>(pl * d.oh * d.ow + oy * d.ow + ox)] = acc * inv;
            }
    }
    Tensor out = Tensor::from_data({d.b, d.c, d.oh, d.ow}, std::move(buf));
    if (Tape* t = recording_tape()) {
        int32_t ia = node_id_for(*t, x);
        if (ia >= 0) {
            int64_t nx = x.numel();
            int32_t nid = t->emit(
                [ia, d, inv, nx](Tape& tp, const std::vector<double>& g) {
                    std::vector<double> dx(static_cast<size_t>(nx), 0.0);
                    int64_t planes = d.b * d.c;
                    for (int64_t pl = 0; pl < planes; ++pl) {
                        double* xp = dx.data() + pl * d.h * d.w;
                        const double* gp = g.data() + pl * d.oh * d.ow;
                        for (int64_t oy = 0; oy < d.oh; ++oy)
                            for (int64_t ox = 0; ox < d.ow; ++ox) {
                                double gv = gp[oy * d.ow + ox] * inv;
                                for (int64_t u = 0; u < d.k; ++u)
                                    for (int64_t v = 0; v < d.k; ++v)
                                        xp[(oy * d.stride + u) * d.w + ox * d.stride + v] += gv;
                            }
                    }
                    tp.accumulate(ia, dx.data(), nx);
                },
                {ia}, out.numel());
            out.bind_node(t, nid, t->epoch());
        }
    }
    check_out("avg_pool2d", out);
    return out;
}

Tensor global_avg_pool(const Tensor& x) {
    if (x.rank() != 4) shape_fail("global_avg_pool", x.shape(), "(B,C,H,W)");
    int64_t b = x.dim(0), c = x.dim(1), sp = x.dim(2) * x.dim(3);
    double inv = 1.0 / static_cast<double>(sp);
    std::vector<double> buf(static_cast<size_t>(b * c));
    const double* p = x.data();
    for (int64_t pl = 0; pl < b * c; ++pl) {
        const double* xp = p + pl * sp;
        double acc = 0.0;
        for (int64_t s = 0; s < sp; ++s) acc += xp[s];
        buf[static_cast<size_t>(pl)] = acc * inv;
    }
    Tensor out = Tensor::from_data({b, c}, std::move(buf));
    if (Tape* t = recording_tape()) {
        int32_t ia = node_id_for(*t, x);
        if (ia >= 0) {
            int64_t nx = x.numel();
            int32_t nid = t->emit(
                [ia, b, c, sp, inv, nx](Tape& tp, const std::vector<double>& g) {
                    std::vector<double> dx(static_cast<size_t>(nx));
                    for (int64_t pl = 0; pl < b * c; ++pl) {
                        double gv = g[static_cast<size_t>(pl)] * inv;
                        double* xp = dx.data() + pl * sp;
                        for (int64_t s = 0; s < sp; ++s) xp[s] = gv;
                    }
                    tp.accumulate(ia, dx.data(), nx);
                },
                {ia}, out.numel());
            out.bind_node(t, nid, t->epoch());
        }
    }
    check_out("global_avg_pool", out);
    return out;
}

}  // namespace bd
