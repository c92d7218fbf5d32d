#include "bd/gemm.hpp"
#include "ops_internal.hpp"

namespace bd {

using detail::check_out;
using detail::recording_tape;
using detail::shape_fail;

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) shape_fail("matmul", a.shape(), b.shape());
    int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) shape_fail("matmul", a.shape(), b.shape());
    std::vector<double> buf(static_cast<size_t>(m * n));
    gemm_nn(m, n, k, a.data(), k, b.data(), n, buf.data(), n);
    Tensor out = Tensor::from_data({m, n}, std::move(buf));

    if (Tape* t = recording_tape()) {
        int32_t ia = node_id_for(*t, a);
        int32_t ib = node_id_for(*t, b);
        if (ia >= 0 || ib >= 0) {
            Tensor a_val = a.detach();
            Tensor b_val = b.detach();
            int32_t nid = t->emit(
                [ia, ib, a_val, b_val, m, n, k](Tape& tp, const std::vector<double>& g) {
                    if (ia >= 0) {
                        // dA = g * B^T
                        std::vector<double> bt(static_cast<size_t>(k * n));
                        transpose_copy(k, n, b_val.data(), n, bt.data(), k);
                        std::vector<double> da(static_cast<size_t>(m * k));
                        gemm_nn(m, k, n, g.data(), n, bt.data(), k, da.data(), k);
                        tp.accumulate(ia, da.data(), m * k);
                    }
                    if (ib >= 0) {
                        // dB = A^T * g
                        std::vector<double> at(static_cast<size_t>(m * k));
                        transpose_copy(m, k, a_val.data(), k, at.data(), m);
                        std::vector<double> db(static_cast<size_t>(k * n));
                        gemm_nn(k, n, m, at.data(), m, g.data(), n, db.data(), n);
                        tp.accumulate(ib, db.data(), k * n);
                    }
                },
                {ia, ib}, m * n);
            out.bind_node(t, nid, t->epoch());
        }
    }
    check_out("matmul", out);
    return out;
}

Tensor bmm(const Tensor& a, const Tensor& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1))
        shape_fail("bmm", a.shape(), b.shape());
    int64_t bs = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
    std::vector<double> buf(static_cast<size_t>(bs * m * n));
    for (int64_t i = 0; i < bs; ++i)
        gemm_nn(m, n, k, a.data() + i * m * k, k, b.data() + i * k * n, n, buf.data() + i * m * n, n);
    Tensor out = Tensor::from_data({bs, m, n}, std::move(buf));

    if (Tape* t = recording_tape()) {
        int32_t ia = node_id_for(*t, a);
        int32_t ib = node_id_for(*t, b);
        if (ia >= 0 || ib >= 0) {
            Tensor a_val = a.detach();
            Tensor b_val = b.detach();
            int32_t nid = t->emit(
                [ia, ib, a_val, b_val, bs, m, n, k](Tape& tp, const std::vector<double>& g) {
                    if (ia >= 0) {
                        std::vector<double> da(static_cast<size_t>(bs * m * k));
                        std::vector<double> bt(static_cast<size_t>(k * n));
                        for (int64_t i = 0; i < bs; ++i) {
                            transpose_copy(k, n, b_val.data() + i * k * n, n, bt.data(), k);
                            gemm_nn(m, k, n, g.data() + i * m * n, n, bt.data(), k,
                                    da.data() + i * m * k, k);
                        }
                        tp.accumulate(ia, da.data(), bs * m * k);
                    }
                    if (ib >= 0) {
                        std::vector<double> db(static_cast<size_t>(bs * k * n));
                        std::vector<double> at(static_cast<size_t>(m * k));
                        for (int64_t i = 0; i < bs; ++i) {
                            transpose_copy(m, k, a_val.data() + i * m * k, k, at.data(), m);
                            gemm_nn(k, n, m, at.data(), m, g.data() + i * m * n, n,
                                    db.data() + i * k * n, n);
                        }
                        tp.accumulate(ib, db.data(), bs * k * n);
                    }
                },
                {ia, ib}, bs * m * n);
            out.bind_node(t, nid, t->epoch());
        }
    }
    check_out("bmm", out);
    return out;
}

}  // namespace bd
