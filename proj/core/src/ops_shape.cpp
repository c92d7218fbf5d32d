#include <cstring>

#include "ops_internal.hpp"

namespace bd {

using detail::check_out;
using detail::contiguous_strides;
using detail::recording_tape;
using detail::shape_fail;

Tensor reshape(const Tensor& a, Shape shape) {
    // One extent may be -1 (inferred).
    int64_t known = 1;
    int infer = -1;
    for (int i = 0; i < static_cast<int>(shape.size()); ++i) {
        if (shape[static_cast<size_t>(i)] == -1) {
            if (infer >= 0) shape_fail("reshape", a.shape(), "at most one -1 extent");
            infer = i;
        } else {
            known *= shape[static_cast<size_t>(i)];
        }
    }
    if (infer >= 0) {
        if (known == 0 || a.numel() % known != 0) shape_fail("reshape", a.shape(), shape_str(shape));
        shape[static_cast<size_t>(infer)] = a.numel() / known;
    }
    if (shape_numel(shape) != a.numel()) shape_fail("reshape", a.shape(), shape_str(shape));

    // Row-major contiguous: the buffer is shared, only the shape changes.
    Tensor out = Tensor::share(std::move(shape), a.storage());
    if (Tape* t = recording_tape()) {
        int32_t ia = node_id_for(*t, a);
        if (ia >= 0) {
            int64_t n = a.numel();
            int32_t nid = t->emit(
                [ia, n](Tape& tp, const std::vector<double>& g) { tp.accumulate(ia, g.data(), n); },
                {ia}, n);
            out.bind_node(t, nid, t->epoch());
        }
    }
    return out;
}

Tensor transpose(const Tensor& a, int axis_a, int axis_b) {
    int r = a.rank();
    if (axis_a < 0) axis_a += r;
    if (axis_b < 0) axis_b += r;
    if (axis_a < 0 || axis_a >= r || axis_b < 0 || axis_b >= r)
        shape_fail("transpose", a.shape(), "axes in range");
    if (axis_a == axis_b) return reshape(a, a.shape());

    Shape oshape = a.shape();
    std::swap(oshape[static_cast<size_t>(axis_a)], oshape[static_cast<size_t>(axis_b)]);

    auto in_strides = contiguous_strides(a.shape());
    std::swap(in_strides[static_cast<size_t>(axis_a)], in_strides[static_cast<size_t>(axis_b)]);

    int64_t n = a.numel();
    std::vector<double> buf(static_cast<size_t>(n));
    const double* p = a.data();
    std::vector<int64_t> idx(static_cast<size_t>(r), 0);
    int64_t src = 0;
    for (int64_t o = 0; o < n; ++o) {
        buf[static_cast<size_t>(o)] = p[src];
        for (int d = r - 1; d >= 0; --d) {
            idx[static_cast<size_t>(d)]++;
            src += in_strides[static_cast<size_t>(d)];
            if (idx[static_cast<size_t>(d)] < oshape[static_cast<size_t>(d)]) break;
            src -= in_strides[static_cast<size_t>(d)] * oshape[static_cast<size_t>(d)];
            idx[static_cast<size_t>(d)] = 0;
        }
    }
    Tensor out = Tensor::from_data(oshape, std::move(buf));
    if (Tape* t = recording_tape()) {
        int32_t ia = node_id_for(*t, a);
        if (ia >= 0) {
            Shape ashape = a.shape();
            int aa = axis_a, ab = axis_b;
            int32_t nid = t->emit(
                [ia, ashape, aa, ab, n, r](Tape& tp, const std::vector<double>& g) {
                    // scatter back: da = transpose(g) with the same axis swap
                    Shape gshape = ashape;
                    std::swap(gshape[static_cast<size_t>(aa)], gshape[static_cast<size_t>(ab)]);
                    auto g_strides = contiguous_strides(gshape);
                    std::swap(g_strides[static_cast<size_t>(aa)], g_strides[static_cast<size_t>(ab)]);
                    std::vector<double> da(static_cast<size_t>(n));
                    std::vector<int64_t> idx(static_cast<size_t>(r), 0);
                    int64_t src = 0;
                    for (int64_t o = 0; o < n; ++o) {
                        da[static_cast<size_t>(o)] = g[static_cast<size_t>(src)];
                        for (int d = r - 1; d >= 0; --d) {
                            idx[static_cast<size_t>(d)]++;
                            src += g_strides[static_cast<size_t>(d)];
                            if (idx[static_cast<size_t>(d)] < ashape[static_cast<size_t>(d)]) break;
                            src -= g_strides[static_cast<size_t>(d)] * ashape[static_cast<size_t>(d)];
                            idx[static_cast<size_t>(d)] = 0;
                        }
                    }
                    tp.accumulate(ia, da.data(), n);
                },
                {ia}, n);
            out.bind_node(t, nid, t->epoch());
        }
    }
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    int r = parts[0].rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) shape_fail("concat", parts[0].shape(), "axis in range");
    Shape oshape = parts[0].shape();
    int64_t total = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != r) shape_fail("concat", parts[0].shape(), p.shape());
        for (int d = 0; d < r; ++d)
            if (d != axis && p.dim(d) != oshape[static_cast<size_t>(d)])
                shape_fail("concat", oshape, p.shape());
        total += p.dim(axis);
    }
    oshape[static_cast<size_t>(axis)] = total;

    int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= oshape[static_cast<size_t>(d)];
    for (int d = axis + 1; d < r; ++d) inner *= oshape[static_cast<size_t>(d)];

    std::vector<double> buf(static_cast<size_t>(shape_numel(oshape)));
    int64_t off = 0;
    for (const Tensor& p : parts) {
        int64_t ext = p.dim(axis);
        const double* pd = p.data();
        for (int64_t o = 0; o < outer; ++o)
            std::memcpy(buf.data() + (o * total + off) * inner, pd + o * ext * inner,
                        static_cast<size_t>(ext * inner) * sizeof(double));
        off += ext;
    }
    Tensor out = Tensor::from_data(oshape, std::move(buf));

    if (Tape* t = recording_tape()) {
        std::vector<int32_t> ids;
        bool any = false;
        for (const Tensor& p : parts) {
            ids.push_back(node_id_for(*t, p));
            any |= ids.back() >= 0;
        }
        if (any) {
            std::vector<int64_t> exts;
            for (const Tensor& p : parts) exts.push_back(p.dim(axis));
            int32_t nid = t->emit(
                [ids, exts, outer, inner, total](Tape& tp, const std::vector<double>& g) {
                    int64_t off = 0;
                    for (size_t k = 0; k < ids.size(); ++k) {
                        int64_t ext = exts[k];
                        if (ids[k] >= 0) {
                            std::vector<double> da(static_cast<size_t>(outer * ext * inner));
                            for (int64_t o = 0; o < outer; ++o)
                                std::memcpy(da.data() + o * ext * inner,
                                            g.data() + (o * total + off) * inner,
                                            static_cast<size_t>(ext * inner) * sizeof(double));
                            tp.accumulate(ids[k], da.data(), outer * ext * inner);
                        }
                        off += ext;
                    }
                },
                ids, out.numel());
            out.bind_node(t, nid, t->epoch());
        }
    }
    check_out("concat", out);
    return out;
}

Tensor slice(const Tensor& a, int axis, int64_t start, int64_t len) {
    int r = a.rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) shape_fail("slice", a.shape(), "axis in range");
    int64_t ext = a.dim(axis);
    if (start < 0 || len <= 0 || start + len > ext)
        throw ContractError("slice: range [" + std::to_string(start) + "," +
                            std::to_string(start + len) + ") out of extent " + std::to_string(ext));
    Shape oshape = a.shape();
    oshape[static_cast<size_t>(axis)] = len;
    int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= a.dim(d);
    for (int d = axis + 1; d < r; ++d) inner *= a.dim(d);

    std::vector<double> buf(static_cast<size_t>(outer * len * inner));
    const double* p = a.data();
    for (int64_t o = 0; o < outer; ++o)
        std::memcpy(buf.data() + o * len * inner, p + (o * ext + start) * inner,
                    static_cast<size_t>(len * inner) * sizeof(double));
    Tensor out = Tensor::from_data(oshape, std::move(buf));

    if (Tape* t = recording_tape()) {
        int32_t ia = node_id_for(*t, a);
        if (ia >= 0) {
            int64_t na = a.numel();
            int32_t nid = t->emit(
                [ia, na, outer, inner, ext, start, len](Tape& tp, const std::vector<double>& g) {
                    std::vector<double> da(static_cast<size_t>(na), 0.0);
                    for (int64_t o = 0; o < outer; ++o)
                        std::memcpy(da.data() + (o * ext + start) * inner, g.data() + o * len * inner,
                                    static_cast<size_t>(len * inner) * sizeof(double));
                    tp.accumulate(ia, da.data(), na);
                },
                {ia}, out.numel());
            out.bind_node(t, nid, t->epoch());
        }
    }
    return out;
}

Tensor onehot(const std::vector<int64_t>& labels, int64_t classes) {
    int64_t b = static_cast<int64_t>(labels.size());
    std::vector<double> buf(static_cast<size_t>(b * classes), 0.0);
    for (int64_t i = 0; i < b; ++i) {
        int64_t y = labels[static_cast<size_t>(i)];
        if (y < 0 || y >= classes)
            throw ContractError("onehot: label " + std::to_string(y) + " out of range [0," +
                                std::to_string(classes) + ")");
        buf[static_cast<size_t>(i * classes + y)] = 1.0;
    }
    return Tensor::from_data({b, classes}, std::move(buf));
}

}  // namespace bd
