#include <cmath>

#include "ops_internal.hpp"

namespace bd {

using detail::check_out;
using detail::recording_tape;
using detail::shape_fail;

namespace {

int norm_axis_index(const char* op, const Shape& s, int axis) {
    int r = static_cast<int>(s.size());
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) shape_fail(op, s, "axis in range");
    return axis;
}

/// Splits a shape around `axis` into (outer, n, inner) extents.
struct AxisSplit {
    int64_t outer = 1, n = 1, inner = 1;
};
AxisSplit split_axis(const Shape& s, int axis) {
    AxisSplit sp;
    for (int i = 0; i < axis; ++i) sp.outer *= s[static_cast<size_t>(i)];
    sp.n = s[static_cast<size_t>(axis)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) sp.inner *= s[i];
    return sp;
}

Shape reduced_shape(const Shape& s, int axis, bool keepdim) {
    Shape out;
    for (int i = 0; i < static_cast<int>(s.size()); ++i) {
        if (i == axis) {
            if (keepdim) out.push_back(1);
        } else {
            out.push_back(s[static_cast<size_t>(i)]);
        }
    }
    if (out.empty()) out.push_back(1);
    return out;
}

}  // namespace

Tensor sum_all(const Tensor& a) {
    const double* p = a.data();
    int64_t n = a.numel();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) acc += p[i];
    Tensor out = Tensor::from_data({1}, {acc});
    if (Tape* t = recording_tape()) {
        int32_t ia = node_id_for(*t, a);
        if (ia >= 0) {
            int32_t nid = t->emit(
                [ia, n](Tape& tp, const std::vector<double>& g) {
                    std::vector<double> da(static_cast<size_t>(n), g[0]);
                    tp.accumulate(ia, da.data(), n);
                },
                {ia}, 1);
            out.bind_node(t, nid, t->epoch());
        }
    }
    check_out("sum_all", out);
    return out;
}

Tensor mean_all(const Tensor& a) {
    const double* p = a.data();
    int64_t n = a.numel();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) acc += p[i];
    Tensor out = Tensor::from_data({1}, {acc / static_cast<double>(n)});
    if (Tape* t = recording_tape()) {
        int32_t ia = node_id_for(*t, a);
        if (ia >= 0) {
            int32_t nid = t->emit(
                [ia, n](Tape& tp, const std::vector<double>& g) {
                    std::vector<double> da(static_cast<size_t>(n), g[0] / static_cast<double>(n));
                    tp.accumulate(ia, da.data(), n);
                },
                {ia}, 1);
            out.bind_node(t, nid, t->epoch());
        }
    }
    check_out("mean_all", out);
    return out;
}

namespace {

Tensor reduce_axis(const char* name, const Tensor& a, int axis, bool keepdim, bool mean) {
    axis = norm_axis_index(name, a.shape(), axis);
    AxisSplit sp = split_axis(a.shape(), axis);
    Shape oshape = reduced_shape(a.shape(), axis, keepdim);
    std::vector<double> buf(static_cast<size_t>(sp.outer * sp.inner), 0.0);
    const double* p = a.data();
    for (int64_t o = 0; o < sp.outer; ++o) {
        const double* base = p + o * sp.n * sp.inner;
        double* ob = buf.data() + o * sp.inner;
        for (int64_t j = 0; j < sp.n; ++j) {
            const double* row = base + j * sp.inner;
            for (int64_t i = 0; i < sp.inner; ++i) ob[i] += row[i];
        }
    }
    if (mean) {
        // true division: x/n, not x*(1/n), so naive mirrors match bitwise
        double n = static_cast<double>(sp.n);
        for (double& v : buf) v /= n;
    }
    Tensor out = Tensor::from_data(oshape, std::move(buf));
    if (Tape* t = recording_tape()) {
        int32_t ia = node_id_for(*t, a);
        if (ia >= 0) {
            int64_t na = a.numel();
            bool is_mean = mean;
            int32_t nid = t->emit(
                [ia, sp, is_mean, na](Tape& tp, const std::vector<double>& g) {
                    double n = static_cast<double>(sp.n);
                    std::vector<double> da(static_cast<size_t>(na));
                    for (int64_t o = 0; o < sp.outer; ++o) {
                        const double* gb = g.data() + o * sp.inner;
                        double* db = da.data() + o * sp.n * sp.inner;
                        for (int64_t j = 0; j < sp.n; ++j)
                            for (int64_t i = 0; i < sp.inner; ++i)
                                db[j * sp.inner + i] = is_mean ? gb[i] / n : gb[i];
                    }
                    tp.accumulate(ia, da.data(), na);
                },
                {ia}, out.numel());
            out.bind_node(t, nid, t->epoch());
        }
    }
    check_out(name, out);
    return out;
}

}  // namespace

Tensor sum_axis(const Tensor& a, int axis, bool keepdim) {
    return reduce_axis("sum_axis", a, axis, keepdim, false);
}

Tensor mean_axis(const Tensor& a, int axis, bool keepdim) {
    return reduce_axis("mean_axis", a, axis, keepdim, true);
}

Tensor norm_axis(const Tensor& a, int axis) {
    axis = norm_axis_index("norm_axis", a.shape(), axis);
    AxisSplit sp = split_axis(a.shape(), axis);
    Shape oshape = reduced_shape(a.shape(), axis, false);
    std::vector<double> buf(static_cast<size_t>(sp.outer * sp.inner), 0.0);
    const double* p = a.data();
    for (int64_t o = 0; o < sp.outer; ++o) {
        const double* base = p + o * sp.n * sp.inner;
        double* ob = buf.data() + o * sp.inner;
        for (int64_t j = 0; j < sp.n; ++j) {
            const double* row = base + j * sp.inner;
            for (int64_t i = 0; i < sp.inner; ++i) ob[i] += row[i] * row[i];
        }
    }
    for (double& v : buf) v = std::sqrt(v);
    Tensor out = Tensor::from_data(oshape, std::move(buf));
    if (Tape* t = recording_tape()) {
        int32_t ia = node_id_for(*t, a);
        if (ia >= 0) {
            Tensor a_val = a.detach();
            Tensor o_val = out.detach();
            int64_t na = a.numel();
            int32_t nid = t->emit(
                [ia, sp, a_val, o_val, na](Tape& tp, const std::vector<double>& g) {
                    // d||x|| / dx_j = x_j / ||x||, guarded against zero norms
                    const double* av = a_val.data();
                    const double* nv = o_val.data();
                    std::vector<double> da(static_cast<size_t>(na));
                    for (int64_t o = 0; o < sp.outer; ++o) {
                        const double* gb = g.data() + o * sp.inner;
                        const double* nb = nv + o * sp.inner;
                        for (int64_t j = 0; j < sp.n; ++j)
                            for (int64_t i = 0; i < sp.inner; ++i) {
                                int64_t ai = (o * sp.n + j) * sp.inner + i;
                                double denom = nb[i] > 1e-300 ? nb[i] : 1e-300;
                                da[static_cast<size_t>(ai)] = gb[i] * av[ai] / denom;
                            }
                    }
                    tp.accumulate(ia, da.data(), na);
                },
                {ia}, out.numel());
            out.bind_node(t, nid, t->epoch());
        }
    }
    check_out("norm_axis", out);
    return out;
}

}  // namespace bd
