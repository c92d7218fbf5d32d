#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bd/ops.hpp"
#include "bd/tape.hpp"
#include "bd/tensor.hpp"

namespace bd::detail {

/// Tape to record on for an op over the given inputs, or nullptr.
inline Tape* recording_tape() {
    if (!grad_enabled()) return nullptr;
    return current_tape();
}

void check_out(const char* op, const Tensor& out);

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b);
[[noreturn]] void shape_fail(const char* op, const Shape& a, const std::string& expect);

/// Broadcast plan for binary ops: per-axis strides with 0 on broadcast axes
/// after numpy-style rank alignment. Throws when extents are incompatible.
/// The pattern tags the handful of layouts worth dedicated loops: matrix
/// against a row vector (1,N) or a column vector (B,1), on either side.
struct Bcast {
    enum class Pattern { Same, RowB, ColB, RowA, ColA, Generic };
    Shape out;
    std::vector<int64_t> sa, sb;  // element strides into a and b
    bool same = false;            // fast path: identical contiguous shapes
    Pattern pattern = Pattern::Generic;
    int64_t rows = 0, cols = 0;  // for Row*/Col* patterns
};
Bcast make_bcast(const char* op, const Shape& a, const Shape& b);

/// Walks the broadcast output space, invoking f(out_index, a_index, b_index).
template <typename F>
void bcast_loop(const Bcast& p, F&& f) {
    const int r = static_cast<int>(p.out.size());
    int64_t n = 1;
    for (int64_t e : p.out) n *= e;
    if (r == 0) {
        f(0, 0, 0);
        return;
    }
    std::vector<int64_t> idx(static_cast<size_t>(r), 0);
    int64_t ia = 0, ib = 0;
    for (int64_t o = 0; o < n; ++o) {
        f(o, ia, ib);
        for (int d = r - 1; d >= 0; --d) {
            idx[static_cast<size_t>(d)]++;
            ia += p.sa[static_cast<size_t>(d)];
            ib += p.sb[static_cast<size_t>(d)];
            if (idx[static_cast<size_t>(d)] < p.out[static_cast<size_t>(d)]) break;
            ia -= p.sa[static_cast<size_t>(d)] * p.out[static_cast<size_t>(d)];
            ib -= p.sb[static_cast<size_t>(d)] * p.out[static_cast<size_t>(d)];
            idx[static_cast<size_t>(d)] = 0;
        }
    }
}

/// Contiguous element strides of a shape.
std::vector<int64_t> contiguous_strides(const Shape& s);

}  // namespace bd::detail
