#include "bd/oracle/oracle.hpp"

#include <cmath>

#include "bd/errors.hpp"

namespace bd::oracle {

double relative_error(double a, double b) {
    return std::fabs(a - b) / std::max({1e-12, std::fabs(a), std::fabs(b)});
}

double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, relative_error(a[i], b[i]));
    return m;
}

std::vector<double> fd_grad(const std::function<double(const std::vector<double>&)>& f,
                            std::vector<double> x, const FiniteDiffSpec& spec) {
    if (!(spec.h > 0.0)) throw ContractError("fd_grad: step must be positive");
    std::vector<double> g(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        double keep = x[i];
        x[i] = keep + spec.h;
        double fp = f(x);
        x[i] = keep - spec.h;
        double fm = f(x);
        x[i] = keep;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("fd_grad: non-finite function value");
        g[i] = (fp - fm) / (2.0 * spec.h);
    }
    return g;
}

std::vector<double> fd_grad_tensor(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                   const FiniteDiffSpec& spec) {
    Shape shape = x.shape();
    return fd_grad(
        [&](const std::vector<double>& v) { return f(Tensor::from_data(shape, v)); }, x.vec(),
        spec);
}

std::vector<double> softmax(const std::vector<double>& logits, int64_t b, int64_t c) {
    std::vector<double> out(static_cast<size_t>(b * c));
    for (int64_t r = 0; r < b; ++r) {
        const double* a = logits.data() + r * c;
        double m = a[0];
        for (int64_t j = 1; j < c; ++j)
            if (a[j] > m) m = a[j];
        double z = 0.0;
        for (int64_t j = 0; j < c; ++j) z += std::exp(a[j] - m);
        for (int64_t j = 0; j < c; ++j) out[static_cast<size_t>(r * c + j)] = std::exp(a[j] - m) / z;
    }
    return out;
}

std::vector<double> softened(const std::vector<double>& logits, int64_t b, int64_t c, double t) {
    std::vector<double> scaled(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) scaled[i] = logits[i] / t;
    return softmax(scaled, b, c);
}

double ce_sum(const std::vector<std::vector<double>>& logits, int64_t b, int64_t c,
              const std::vector<int64_t>& labels) {
    double total = 0.0;
    for (const auto& a : logits) {
        double acc = 0.0;
        for (int64_t r = 0; r < b; ++r) {
            const double* row = a.data() + r * c;
            double m = row[0];
            for (int64_t j = 1; j < c; ++j)
                if (row[j] > m) m = row[j];
            double z = 0.0;
            for (int64_t j = 0; j < c; ++j) z += std::exp(row[j] - m);
            double log_p = row[labels[static_cast<size_t>(r)]] - m - std::log(z);
            acc += -log_p;
        }
        total += acc / static_cast<double>(b);
    }
    return total;
}

double kl_pairwise(const std::vector<std::vector<double>>& logits, int64_t b, int64_t c,
                   double t) {
    int64_t k1 = static_cast<int64_t>(logits.size());
    if (k1 <= 1) return 0.0;
    std::vector<std::vector<double>> q;
    for (const auto& a : logits) q.push_back(softened(a, b, c, t));
    double total = 0.0;
    for (int64_t i = 0; i < k1; ++i)
        for (int64_t j = 0; j < k1; ++j) {
            if (i == j) continue;
            double acc = 0.0;
            for (int64_t r = 0; r < b; ++r)
                for (int64_t ci = 0; ci < c; ++ci) {
                    double qi = q[static_cast<size_t>(i)][static_cast<size_t>(r * c + ci)];
                    double qj = q[static_cast<size_t>(j)][static_cast<size_t>(r * c + ci)];
                    if (qi > 0.0) acc += qi * (std::log(qi) - std::log(qj));
                }
            total += acc / static_cast<double>(b);
        }
    return total / static_cast<double>(k1 - 1);
}

std::vector<double> similarity(const std::vector<double>& f, int64_t b, int64_t c, int64_t h,
                               int64_t w) {
    int64_t n = h * w;
    std::vector<double> out(static_cast<size_t>(b * n * n));
    for (int64_t bi = 0; bi < b; ++bi) {
        const double* fb = f.data() + bi * c * n;
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < n; ++j) {
                double ip = 0.0, ni = 0.0, nj = 0.0;
                for (int64_t ci = 0; ci < c; ++ci) {
                    double vi = fb[ci * n + i], vj = fb[ci * n + j];
                    ip += vi * vj;
                    ni += vi * vi;
                    nj += vj * vj;
                }
                double den = std::sqrt(ni) * std::sqrt(nj);
                if (den < 1e-12) den = 1e-12;
                out[static_cast<size_t>((bi * n + i) * n + j)] = ip / den;
            }
    }
    return out;
}

double l2_simmaps(const std::vector<std::vector<double>>& features,
                  const std::vector<FeatureDims>& dims) {
    int64_t k1 = static_cast<int64_t>(features.size());
    if (k1 < 2) return 0.0;
    int64_t b = dims[0].b, n = dims[0].h * dims[0].w;
    std::vector<std::vector<double>> maps;
    for (int64_t k = 0; k < k1; ++k)
        maps.push_back(similarity(features[static_cast<size_t>(k)], dims[static_cast<size_t>(k)].b,
                                  dims[static_cast<size_t>(k)].c, dims[static_cast<size_t>(k)].h,
                                  dims[static_cast<size_t>(k)].w));
    double total = 0.0;
    for (int64_t i = 0; i < k1 - 1; ++i) {
        double inner = 0.0;
        for (int64_t j = i + 1; j < k1; ++j) {
            double batch = 0.0;
            for (int64_t bi = 0; bi < b; ++bi) {
                double acc = 0.0;
                for (int64_t e = 0; e < n * n; ++e) {
                    double d = maps[static_cast<size_t>(i)][static_cast<size_t>(bi * n * n + e)] -
                               maps[static_cast<size_t>(j)][static_cast<size_t>(bi * n * n + e)];
                    acc += d * d;
                }
                batch += acc;
            }
            inner += batch / static_cast<double>(b);
        }
        total += inner / static_cast<double>(k1 - 1 - i);
    }
    return total / static_cast<double>(n * n);
}

std::vector<double> real_mix(const std::vector<std::vector<double>>& probs,
                             const std::vector<double>& y_onehot, double mu_r, int64_t b,
                             int64_t c) {
    int64_t k1 = static_cast<int64_t>(probs.size());
    std::vector<double> out(static_cast<size_t>(b * c));
    for (int64_t e = 0; e < b * c; ++e) {
        double acc = 0.0;
        for (const auto& p : probs) acc += p[static_cast<size_t>(e)];
        out[static_cast<size_t>(e)] =
            mu_r * acc / static_cast<double>(k1) + (1.0 - mu_r) * y_onehot[static_cast<size_t>(e)];
    }
    return out;
}

namespace {

struct LayerTrace {
    std::vector<double> xhat, mask;
    double den = 0.0;
};

/// One sample through the critic, mirroring the library's block structure:
/// split first linear layer, composed layer norm, leaky ReLU.
double disc_sample(const nn::DiscSnapshot& d, const double* p, const double* cond,
                   std::vector<LayerTrace>* traces) {
    const auto& sp = d.spec;
    int64_t hdim = sp.layers == 0 ? 1 : sp.hidden;
    std::vector<double> a(static_cast<size_t>(hdim)), z;
    for (int64_t o = 0; o < hdim; ++o) {
        double ap = 0.0;
        for (int64_t ci = 0; ci < sp.classes; ++ci)
            ap = std::fma(d.w1_p[static_cast<size_t>(o * sp.classes + ci)], p[ci], ap);
        double ac = 0.0;
        for (int64_t k = 0; k < sp.cond_dim(); ++k)
            ac = std::fma(d.w1_c[static_cast<size_t>(o * sp.cond_dim() + k)], cond[k], ac);
        a[static_cast<size_t>(o)] = (ap + ac) + d.b1[static_cast<size_t>(o)];
    }
    if (sp.layers == 0) return a[0];

    for (int64_t l = 0; l < sp.layers; ++l) {
        if (l > 0) {
            const auto& hw = d.rest[static_cast<size_t>(l - 1)];
            std::vector<double> an(static_cast<size_t>(sp.hidden));
            for (int64_t o = 0; o < sp.hidden; ++o) {
                double acc = 0.0;
                for (int64_t k = 0; k < sp.hidden; ++k)
                    acc = std::fma(hw.w[static_cast<size_t>(o * sp.hidden + k)],
                                   z[static_cast<size_t>(k)], acc);
                an[static_cast<size_t>(o)] = acc + hw.b[static_cast<size_t>(o)];
            }
            a = std::move(an);
        }
        const auto& g = l == 0 ? d.ln1_g : d.rest[static_cast<size_t>(l - 1)].ln_g;
        const auto& bb = l == 0 ? d.ln1_b : d.rest[static_cast<size_t>(l - 1)].ln_b;
        int64_t n = static_cast<int64_t>(a.size());
        double mu = 0.0;
        for (double v : a) mu += v;
        mu /= static_cast<double>(n);
        std::vector<double> dv(a.size()), sq(a.size());
        for (size_t i = 0; i < a.size(); ++i) dv[i] = a[i] - mu;
        for (size_t i = 0; i < a.size(); ++i) sq[i] = dv[i] * dv[i];
        double var = 0.0;
        for (double v : sq) var += v;
        var /= static_cast<double>(n);
        double den = std::sqrt(var + sp.ln_eps);
        LayerTrace tr;
        tr.den = den;
        tr.xhat.resize(a.size());
        tr.mask.resize(a.size());
        z.assign(a.size(), 0.0);
        for (size_t i = 0; i < a.size(); ++i) {
            double xh = dv[i] / den;
            double hv = xh * g[i] + bb[i];
            tr.xhat[i] = xh;
            tr.mask[i] = hv > 0.0 ? 1.0 : sp.slope;
            z[i] = hv > 0.0 ? hv : sp.slope * hv;
        }
        if (traces) traces->push_back(std::move(tr));
    }
    double s = 0.0;
    for (int64_t k = 0; k < sp.hidden; ++k)
        s = std::fma(d.w_out[static_cast<size_t>(k)], z[static_cast<size_t>(k)], s);
    return s + d.b_out[0];
}

std::vector<double> disc_grad_sample(const nn::DiscSnapshot& d, const double* p,
                                     const double* cond) {
    const auto& sp = d.spec;
    if (sp.layers == 0) {
        return std::vector<double>(d.w1_p.begin(), d.w1_p.end());
    }
    std::vector<LayerTrace> traces;
    disc_sample(d, p, cond, &traces);
    std::vector<double> u(d.w_out.begin(), d.w_out.end());
    for (int64_t l = sp.layers - 1; l >= 0; --l) {
        const auto& tr = traces[static_cast<size_t>(l)];
        const auto& g = l == 0 ? d.ln1_g : d.rest[static_cast<size_t>(l - 1)].ln_g;
        int64_t n = static_cast<int64_t>(u.size());
        std::vector<double> t(u.size());
        for (size_t i = 0; i < u.size(); ++i) t[i] = u[i] * tr.mask[i] * g[i];
        double mt = 0.0, mth = 0.0;
        for (size_t i = 0; i < t.size(); ++i) {
            mt += t[i];
            mth += t[i] * tr.xhat[i];
        }
        mt /= static_cast<double>(n);
        mth /= static_cast<double>(n);
        std::vector<double> da(u.size());
        for (size_t i = 0; i < u.size(); ++i) da[i] = (t[i] - mt - tr.xhat[i] * mth) / tr.den;
        if (l == 0) {
            std::vector<double> gp(static_cast<size_t>(sp.classes), 0.0);
            for (int64_t j = 0; j < sp.classes; ++j) {
                double acc = 0.0;
                for (int64_t o = 0; o < static_cast<int64_t>(da.size()); ++o)
                    acc = std::fma(da[static_cast<size_t>(o)],
                                   d.w1_p[static_cast<size_t>(o * sp.classes + j)], acc);
                gp[static_cast<size_t>(j)] = acc;
            }
            return gp;
        }
        const auto& hw = d.rest[static_cast<size_t>(l - 1)];
        std::vector<double> un(static_cast<size_t>(sp.hidden), 0.0);
        for (int64_t j = 0; j < sp.hidden; ++j) {
            double acc = 0.0;
            for (int64_t o = 0; o < sp.hidden; ++o)
                acc = std::fma(da[static_cast<size_t>(o)],
                               hw.w[static_cast<size_t>(o * sp.hidden + j)], acc);
            un[static_cast<size_t>(j)] = acc;
        }
        u = std::move(un);
    }
    return u;  // unreachable
}

}  // namespace

std::vector<double> disc_cond_features(const nn::DiscSnapshot& d,
                                       const std::vector<double>& images, int64_t b) {
    const auto& sp = d.spec;
    if (sp.cond_mode == nn::DiscriminatorSpec::Cond::Flatten) return images;
    int64_t k = sp.cond_h / sp.pool_to;
    int64_t ph = sp.pool_to, pw = sp.pool_to;
    std::vector<double> out(static_cast<size_t>(b * sp.cond_channels * ph * pw));
    double inv = 1.0 / static_cast<double>(k * k);
    for (int64_t pl = 0; pl < b * sp.cond_channels; ++pl) {
        const double* xp = images.data() + pl * sp.cond_h * sp.cond_w;
        for (int64_t oy = 0; oy < ph; ++oy)
            for (int64_t ox = 0; ox < pw; ++ox) {
                double acc = 0.0;
                for (int64_t u = 0; u < k; ++u)
                    for (int64_t v = 0; v < k; ++v) acc += xp[(oy * k + u) * sp.cond_w + ox * k + v];
                out[static_cast<size_t>(pl * ph * pw + oy * pw + ox)] = acc * inv;
            }
    }
    return out;
}

std::vector<double> disc_forward(const nn::DiscSnapshot& d, const std::vector<double>& p,
                                 const std::vector<double>& cond_feats, int64_t b) {
    std::vector<double> out(static_cast<size_t>(b));
    int64_t cd = d.spec.cond_dim();
    for (int64_t bi = 0; bi < b; ++bi)
        out[static_cast<size_t>(bi)] =
            disc_sample(d, p.data() + bi * d.spec.classes, cond_feats.data() + bi * cd, nullptr);
    return out;
}

std::vector<double> disc_input_grad(const nn::DiscSnapshot& d, const std::vector<double>& p_hat,
                                    const std::vector<double>& cond_feats, int64_t b) {
    std::vector<double> out(static_cast<size_t>(b * d.spec.classes));
    int64_t cd = d.spec.cond_dim();
    for (int64_t bi = 0; bi < b; ++bi) {
        auto g = disc_grad_sample(d, p_hat.data() + bi * d.spec.classes, cond_feats.data() + bi * cd);
        for (int64_t j = 0; j < d.spec.classes; ++j)
            out[static_cast<size_t>(bi * d.spec.classes + j)] = g[static_cast<size_t>(j)];
    }
    return out;
}

double disc_loss_wgangp(const nn::DiscSnapshot& d, const std::vector<std::vector<double>>& probs,
                        const std::vector<double>& r, const std::vector<double>& images,
                        double lambda_gp, const std::vector<double>& epsilons, int64_t b) {
    int64_t k1 = static_cast<int64_t>(probs.size());
    int64_t c = d.spec.classes;
    std::vector<double> cond = disc_cond_features(d, images, b);
    auto batch_mean = [b](const std::vector<double>& v) {
        double acc = 0.0;
        for (double x : v) acc += x;
        return acc / static_cast<double>(b);
    };
    double real_mean = batch_mean(disc_forward(d, r, cond, b));
    double base = 0.0;
    for (const auto& p : probs) base += batch_mean(disc_forward(d, p, cond, b)) - real_mean;
    double total = base / static_cast<double>(k1);
    if (lambda_gp != 0.0) {
        double gp = 0.0;
        for (const auto& p : probs) {
            std::vector<double> hat(static_cast<size_t>(b * c));
            for (int64_t bi = 0; bi < b; ++bi)
                for (int64_t ci = 0; ci < c; ++ci) {
                    int64_t e = bi * c + ci;
                    hat[static_cast<size_t>(e)] =
                        epsilons[static_cast<size_t>(bi)] * r[static_cast<size_t>(e)] +
                        (1.0 - epsilons[static_cast<size_t>(bi)]) * p[static_cast<size_t>(e)];
                }
            auto grads = disc_input_grad(d, hat, cond, b);
            double acc = 0.0;
            for (int64_t bi = 0; bi < b; ++bi) {
                double nrm = 0.0;
                for (int64_t ci = 0; ci < c; ++ci) {
                    double v = grads[static_cast<size_t>(bi * c + ci)];
                    nrm += v * v;
                }
                double dn = std::sqrt(nrm) - 1.0;
                acc += dn * dn;
            }
            gp += acc / static_cast<double>(b);
        }
        total += lambda_gp * (gp / static_cast<double>(k1));
    }
    return total;
}

double gen_loss_w(const nn::DiscSnapshot& d, const std::vector<std::vector<double>>& probs,
                  const std::vector<double>& images, int64_t b) {
    std::vector<double> cond = disc_cond_features(d, images, b);
    double acc = 0.0;
    for (const auto& p : probs) {
        auto s = disc_forward(d, p, cond, b);
        double m = 0.0;
        for (double v : s) m += v;
        acc += m / static_cast<double>(b);
    }
    return -(acc / static_cast<double>(probs.size()));
}

double sd_total(double ce, double kl, double l2, double w, const LossWeights& weights) {
    return (1.0 - weights.alpha) * ce + weights.alpha * kl + weights.beta * l2 + weights.gamma * w;
}

double kd_total(const std::vector<std::vector<double>>& teacher_logits,
                const std::vector<std::vector<double>>& student_logits, int64_t b, int64_t c,
                const std::vector<std::vector<double>>& teacher_features,
                const std::vector<std::vector<double>>& student_features,
                const std::vector<FeatureDims>& dims, const LossWeights& weights,
                const nn::DiscSnapshot* d, const std::vector<double>& images, bool matched) {
    int64_t k1 = static_cast<int64_t>(teacher_logits.size());
    double total = 0.0;
    if (weights.lambda1 != 0.0) {
        double acc = 0.0;
        int64_t pairs = 0;
        for (int64_t i = 0; i < k1; ++i)
            for (int64_t j = 0; j < k1; ++j) {
                if (matched && i != j) continue;
                auto qt = softened(teacher_logits[static_cast<size_t>(j)], b, c, weights.temperature);
                auto qs = softened(student_logits[static_cast<size_t>(i)], b, c, weights.temperature);
                double kl = 0.0;
                for (int64_t e = 0; e < b * c; ++e)
                    if (qt[static_cast<size_t>(e)] > 0.0)
                        kl += qt[static_cast<size_t>(e)] * (std::log(qt[static_cast<size_t>(e)]) -
                                                            std::log(qs[static_cast<size_t>(e)]));
                acc += kl / static_cast<double>(b);
                ++pairs;
            }
        total += weights.lambda1 * (acc / static_cast<double>(pairs));
    }
    if (weights.lambda2 != 0.0) {
        int64_t n = dims[0].h * dims[0].w;
        std::vector<std::vector<double>> ms, mt;
        for (int64_t k = 0; k < k1; ++k) {
            const auto& dd = dims[static_cast<size_t>(k)];
            ms.push_back(similarity(student_features[static_cast<size_t>(k)], dd.b, dd.c, dd.h, dd.w));
            mt.push_back(similarity(teacher_features[static_cast<size_t>(k)], dd.b, dd.c, dd.h, dd.w));
        }
        auto pair_term = [&](int64_t i, int64_t j) {
            double batch = 0.0;
            for (int64_t bi = 0; bi < dims[0].b; ++bi) {
                double acc = 0.0;
                for (int64_t e = 0; e < n * n; ++e) {
                    double dv = ms[static_cast<size_t>(i)][static_cast<size_t>(bi * n * n + e)] -
                                mt[static_cast<size_t>(j)][static_cast<size_t>(bi * n * n + e)];
                    acc += dv * dv;
                }
                batch += acc;
            }
            return batch / static_cast<double>(dims[0].b) / static_cast<double>(n * n);
        };
        double acc = 0.0;
        if (matched) {
            for (int64_t i = 0; i < k1; ++i) acc += pair_term(i, i);
            acc /= static_cast<double>(k1);
        } else {
            for (int64_t i = 0; i < k1; ++i) {
                double inner = 0.0;
                for (int64_t j = i; j < k1; ++j) inner += pair_term(i, j);
                acc += inner / static_cast<double>(k1 - i);
            }
        }
        total += weights.lambda2 * acc;
    }
    if (weights.lambda3 != 0.0 && d) {
        std::vector<std::vector<double>> sp;
        for (const auto& a : student_logits) sp.push_back(softmax(a, b, c));
        total += weights.lambda3 * gen_loss_w(*d, sp, images, b);
    }
    return total;
}

NearestMean NearestMean::fit(const std::vector<double>& images, const std::vector<int64_t>& labels,
                             int64_t n, int64_t dim, int64_t classes) {
    NearestMean nm;
    nm.means.assign(static_cast<size_t>(classes), std::vector<double>(static_cast<size_t>(dim), 0.0));
    std::vector<int64_t> counts(static_cast<size_t>(classes), 0);
    for (int64_t i = 0; i < n; ++i) {
        int64_t y = labels[static_cast<size_t>(i)];
        counts[static_cast<size_t>(y)]++;
        for (int64_t j = 0; j < dim; ++j)
            nm.means[static_cast<size_t>(y)][static_cast<size_t>(j)] +=
                images[static_cast<size_t>(i * dim + j)];
    }
    for (int64_t cl = 0; cl < classes; ++cl)
        if (counts[static_cast<size_t>(cl)] > 0)
            for (double& v : nm.means[static_cast<size_t>(cl)])
                v /= static_cast<double>(counts[static_cast<size_t>(cl)]);
    return nm;
}

int64_t NearestMean::predict(const double* image, int64_t dim) const {
    int64_t best = 0;
    double best_d = 0.0;
    for (size_t cl = 0; cl < means.size(); ++cl) {
        double acc = 0.0;
        for (int64_t j = 0; j < dim; ++j) {
            double d = image[j] - means[cl][static_cast<size_t>(j)];
            acc += d * d;
        }
        if (cl == 0 || acc < best_d) {
            best_d = acc;
            best = static_cast<int64_t>(cl);
        }
    }
    return best;
}

}  // namespace bd::oracle
