#include <cmath>
#include <memory>

#include "ops_internal.hpp"

namespace bd {

using detail::check_out;
using detail::recording_tape;
using detail::shape_fail;

Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    Tensor& running_mean, Tensor& running_var,
                    bool training, double momentum, double eps) {
    if (x.rank() != 4) shape_fail("batch_norm", x.shape(), "(B,C,H,W)");
    int64_t b = x.dim(0), c = x.dim(1), sp = x.dim(2) * x.dim(3);
    if (gamma.numel() != c || beta.numel() != c || running_mean.numel() != c ||
        running_var.numel() != c)
        shape_fail("batch_norm", gamma.shape(), "(C,) parameters");
    int64_t n = b * sp;

    std::vector<double> mean(static_cast<size_t>(c)), var(static_cast<size_t>(c));
    const double* px = x.data();
    if (training) {
        for (int64_t ch = 0; ch < c; ++ch) {
            double acc = 0.0;
            for (int64_t bi = 0; bi < b; ++bi) {
                const double* xp = px + (bi * c + ch) * sp;
                for (int64_t s = 0; s < sp; ++s) acc += xp[s];
            }
            mean[static_cast<size_t>(ch)] = acc / static_cast<double>(n);
        }
        for (int64_t ch = 0; ch < c; ++ch) {
            double m = mean[static_cast<size_t>(ch)];
            double acc = 0.0;
            for (int64_t bi = 0; bi < b; ++bi) {
                const double* xp = px + (bi * c + ch) * sp;
                for (int64_t s = 0; s < sp; ++s) {
                    double d = xp[s] - m;
                    acc += d * d;
                }
            }
            var[static_cast<size_t>(ch)] = acc / static_cast<double>(n);
        }
        // Update running stats in place (unbiased variance, torch convention).
        double* rm = running_mean.data_mut();
        double* rv = running_var.data_mut();
        double unbias = n > 1 ? static_cast<double>(n) / static_cast<double>(n - 1) : 1.0;
        for (int64_t ch = 0; ch < c; ++ch) {
            rm[ch] = (1.0 - momentum) * rm[ch] + momentum * mean[static_cast<size_t>(ch)];
            rv[ch] = (1.0 - momentum) * rv[ch] + momentum * var[static_cast<size_t>(ch)] * unbias;
        }
    } else {
        for (int64_t ch = 0; ch < c; ++ch) {
            mean[static_cast<size_t>(ch)] = running_mean.data()[ch];
            var[static_cast<size_t>(ch)] = running_var.data()[ch];
        }
    }

    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(c));
    for (int64_t ch = 0; ch < c; ++ch)
        (*inv_std)[static_cast<size_t>(ch)] = 1.0 / std::sqrt(var[static_cast<size_t>(ch)] + eps);

    auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(x.numel()));
    std::vector<double> buf(static_cast<size_t>(x.numel()));
    const double* pg = gamma.data();
    const double* pb = beta.data();
    for (int64_t bi = 0; bi < b; ++bi)
        for (int64_t ch = 0; ch < c; ++ch) {
            double m = mean[static_cast<size_t>(ch)];
            double is = (*inv_std)[static_cast<size_t>(ch)];
            double gm = pg[ch], bt = pb[ch];
            const double* xp = px + (bi * c + ch) * sp;
            double* hp = xhat->data() + (bi * c + ch) * sp;
            double* op = buf.data() + (bi * c + ch) * sp;
            for (int64_t s = 0; s < sp; ++s) {
                double h = (xp[s] - m) * is;
                hp[s] = h;
                op[s] = gm * h + bt;
            }
        }
    Tensor out = Tensor::from_data(x.shape(), std::move(buf));

    if (Tape* t = recording_tape()) {
        int32_t ix = node_id_for(*t, x);
        int32_t ig = node_id_for(*t, gamma);
        int32_t ib = node_id_for(*t, beta);
        if (ix >= 0 || ig >= 0 || ib >= 0) {
            Tensor gamma_val = gamma.detach();
            int32_t nid = t->emit(
                [ix, ig, ib, b, c, sp, n, training, xhat, inv_std, gamma_val](
                    Tape& tp, const std::vector<double>& g) {
                    std::vector<double> sg(static_cast<size_t>(c), 0.0);  // sum g*xhat
                    std::vector<double> sb(static_cast<size_t>(c), 0.0);  // sum g
                    for (int64_t bi = 0; bi < b; ++bi)
                        for (int64_t ch = 0; ch < c; ++ch) {
                            const double* gp = g.data() + (bi * c + ch) * sp;
                            const double* hp = xhat->data() + (bi * c + ch) * sp;
                            double a0 = 0.0, a1 = 0.0;
                            for (int64_t s = 0; s < sp; ++s) {
                                a0 += gp[s] * hp[s];
                                a1 += gp[s];
                            }
                            sg[static_cast<size_t>(ch)] += a0;
                            sb[static_cast<size_t>(ch)] += a1;
                        }
                    if (ix >= 0) {
                        std::vector<double> dx(static_cast<size_t>(b * c * sp));
                        const double* pg = gamma_val.data();
                        for (int64_t bi = 0; bi < b; ++bi)
                            for (int64_t ch = 0; ch < c; ++ch) {
                                double is = (*inv_std)[static_cast<size_t>(ch)];
                                double k = pg[ch] * is;
                                const double* gp = g.data() + (bi * c + ch) * sp;
                                const double* hp = xhat->data() + (bi * c + ch) * sp;
                                double* dp = dx.data() + (bi * c + ch) * sp;
                                if (training) {
                                    double mb = sb[static_cast<size_t>(ch)] / static_cast<double>(n);
                                    double mg = sg[static_cast<size_t>(ch)] / static_cast<double>(n);
                                    for (int64_t s = 0; s < sp; ++s)
                                        dp[s] = k * (gp[s] - mb - hp[s] * mg);
                                } else {
                                    for (int64_t s = 0; s < sp; ++s) dp[s] = k * gp[s];
                                }
                            }
                        tp.accumulate(ix, dx.data(), b * c * sp);
                    }
                    if (ig >= 0) tp.accumulate(ig, sg.data(), c);
                    if (ib >= 0) tp.accumulate(ib, sb.data(), c);
                },
                {ix, ig, ib}, out.numel());
            out.bind_node(t, nid, t->epoch());
        }
    }
    check_out("batch_norm", out);
    return out;
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (x.rank() != 2) shape_fail("layer_norm", x.shape(), "(B,N)");
    int64_t b = x.dim(0), n = x.dim(1);
    if (gamma.numel() != n || beta.numel() != n) shape_fail("layer_norm", gamma.shape(), "(N,)");

    auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(b * n));
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(b));
    std::vector<double> buf(static_cast<size_t>(b * n));
    const double* px = x.data();
    const double* pg = gamma.data();
    const double* pb = beta.data();
    for (int64_t r = 0; r < b; ++r) {
        const double* xp = px + r * n;
        double acc = 0.0;
        for (int64_t j = 0; j < n; ++j) acc += xp[j];
        double m = acc / static_cast<double>(n);
        double vacc = 0.0;
        for (int64_t j = 0; j < n; ++j) {
            double d = xp[j] - m;
            vacc += d * d;
        }
        double is = 1.0 / std::sqrt(vacc / static_cast<double>(n) + eps);
        (*inv_std)[static_cast<size_t>(r)] = is;
        double* hp = xhat->data() + r * n;
        double* op = buf.data() + r * n;
        for (int64_t j = 0; j < n; ++j) {
            double h = (xp[j] - m) * is;
            hp[j] = h;
            op[j] = pg[j] * h + pb[j];
        }
    }
    Tensor out = Tensor::from_data(x.shape(), std::move(buf));

    if (Tape* t = recording_tape()) {
        int32_t ix = node_id_for(*t, x);
        int32_t ig = node_id_for(*t, gamma);
        int32_t ib = node_id_for(*t, beta);
        if (ix >= 0 || ig >= 0 || ib >= 0) {
            Tensor gamma_val = gamma.detach();
            int32_t nid = t->emit(
                [ix, ig, ib, b, n, xhat, inv_std, gamma_val](Tape& tp,
                                                             const std::vector<double>& g) {
                    const double* pg = gamma_val.data();
                    if (ix >= 0) {
                        std::vector<double> dx(static_cast<size_t>(b * n));
                        for (int64_t r = 0; r < b; ++r) {
                            const double* gp = g.data() + r * n;
                            const double* hp = xhat->data() + r * n;
                            double is = (*inv_std)[static_cast<size_t>(r)];
                            double mt = 0.0, mth = 0.0;
                            for (int64_t j = 0; j < n; ++j) {
                                double tj = gp[j] * pg[j];
                                mt += tj;
                                mth += tj * hp[j];
                            }
                            mt /= static_cast<double>(n);
                            mth /= static_cast<double>(n);
                            double* dp = dx.data() + r * n;
                            for (int64_t j = 0; j < n; ++j)
                                dp[j] = is * (gp[j] * pg[j] - mt - hp[j] * mth);
                        }
                        tp.accumulate(ix, dx.data(), b * n);
                    }
                    if (ig >= 0 || ib >= 0) {
                        std::vector<double> dg(static_cast<size_t>(n), 0.0);
                        std::vector<double> db(static_cast<size_t>(n), 0.0);
                        for (int64_t r = 0; r < b; ++r) {
                            const double* gp = g.data() + r * n;
                            const double* hp = xhat->data() + r * n;
                            for (int64_t j = 0; j < n; ++j) {
                                dg[static_cast<size_t>(j)] += gp[j] * hp[j];
                                db[static_cast<size_t>(j)] += gp[j];
                            }
                        }
                        if (ig >= 0) tp.accumulate(ig, dg.data(), n);
                        if (ib >= 0) tp.accumulate(ib, db.data(), n);
                    }
                },
                {ix, ig, ib}, out.numel());
            out.bind_node(t, nid, t->epoch());
        }
    }
    check_out("layer_norm", out);
    return out;
}

namespace {
void require_finite_rows(const char* op, const Tensor& x) {
    const double* p = x.data();
    int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i]))
            throw NumericError(std::string(op) + ": non-finite input at flat index " +
                               std::to_string(i));
}
}  // namespace

Tensor softmax_rows(const Tensor& logits) {
    if (logits.rank() != 2) shape_fail("softmax", logits.shape(), "(B,C)");
    require_finite_rows("softmax", logits);
    int64_t b = logits.dim(0), c = logits.dim(1);
    std::vector<double> buf(static_cast<size_t>(b * c));
    const double* p = logits.data();
    for (int64_t r = 0; r < b; ++r) {
        const double* xp = p + r * c;
        double m = xp[0];
        for (int64_t j = 1; j < c; ++j)
            if (xp[j] > m) m = xp[j];
        double* op = buf.data() + r * c;
        double s = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            op[j] = std::exp(xp[j] - m);
            s += op[j];
        }
        for (int64_t j = 0; j < c; ++j) op[j] /= s;
    }
    Tensor out = Tensor::from_data(logits.shape(), std::move(buf));

    if (Tape* t = recording_tape()) {
        int32_t ia = node_id_for(*t, logits);
        if (ia >= 0) {
            Tensor p_val = out.detach();
            int32_t nid = t->emit(
                [ia, p_val, b, c](Tape& tp, const std::vector<double>& g) {
                    const double* pv = p_val.data();
                    std::vector<double> da(static_cast<size_t>(b * c));
                    for (int64_t r = 0; r < b; ++r) {
                        const double* gp = g.data() + r * c;
                        const double* pp = pv + r * c;
                        double dot = 0.0;
                        for (int64_t j = 0; j < c; ++j) dot += gp[j] * pp[j];
                        double* dp = da.data() + r * c;
                        for (int64_t j = 0; j < c; ++j) dp[j] = pp[j] * (gp[j] - dot);
                    }
                    tp.accumulate(ia, da.data(), b * c);
                },
                {ia}, out.numel());
            out.bind_node(t, nid, t->epoch());
        }
    }
    return out;
}

Tensor log_softmax_rows(const Tensor& logits) {
    if (logits.rank() != 2) shape_fail("log_softmax", logits.shape(), "(B,C)");
    require_finite_rows("log_softmax", logits);
    int64_t b = logits.dim(0), c = logits.dim(1);
    std::vector<double> buf(static_cast<size_t>(b * c));
    const double* p = logits.data();
    for (int64_t r = 0; r < b; ++r) {
        const double* xp = p + r * c;
        double m = xp[0];
        for (int64_t j = 1; j < c; ++j)
            if (xp[j] > m) m = xp[j];
        double s = 0.0;
        for (int64_t j = 0; j < c; ++j) s += std::exp(xp[j] - m);
        double lse = m + std::log(s);
        double* op = buf.data() + r * c;
        for (int64_t j = 0; j < c; ++j) op[j] = xp[j] - lse;
    }
    Tensor out = Tensor::from_data(logits.shape(), std::move(buf));

    if (Tape* t = recording_tape()) {
        int32_t ia = node_id_for(*t, logits);
        if (ia >= 0) {
            Tensor ls_val = out.detach();
            int32_t nid = t->emit(
                [ia, ls_val, b, c](Tape& tp, const std::vector<double>& g) {
                    const double* lv = ls_val.data();
                    std::vector<double> da(static_cast<size_t>(b * c));
                    for (int64_t r = 0; r < b; ++r) {
                        const double* gp = g.data() + r * c;
                        const double* lp = lv + r * c;
                        double gs = 0.0;
                        for (int64_t j = 0; j < c; ++j) gs += gp[j];
                        double* dp = da.data() + r * c;
                        for (int64_t j = 0; j < c; ++j) dp[j] = gp[j] - std::exp(lp[j]) * gs;
                    }
                    tp.accumulate(ia, da.data(), b * c);
                },
                {ia}, out.numel());
            out.bind_node(t, nid, t->epoch());
        }
    }
    return out;
}

}  // namespace bd
