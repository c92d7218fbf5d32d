#include "bd/losses.hpp"

#include <cmath>
#include <cstdio>

#include "bd/errors.hpp"

namespace bd {

namespace {

Tensor scalar_const(double v) { return Tensor::from_data({1}, {v}); }

/// x / c via true division (x * (1/c) would round the reciprocal).
Tensor div_by(const Tensor& x, double c) { return div(x, scalar_const(c)); }

void check_finite_component(const char* name, const Tensor& t) {
    if (!std::isfinite(t.item()))
        throw NumericError(std::string("loss component '") + name + "' is non-finite");
}

/// Pools every map to the smallest common spatial extent so the N x N grids align.
std::vector<Tensor> align_features(const std::vector<Tensor>& features) {
    int64_t min_h = features[0].dim(2), min_w = features[0].dim(3);
    for (const Tensor& f : features) {
        min_h = std::min(min_h, f.dim(2));
        min_w = std::min(min_w, f.dim(3));
    }
    std::vector<Tensor> out;
    for (const Tensor& f : features) {
        if (f.dim(2) == min_h && f.dim(3) == min_w) {
            out.push_back(f);
            continue;
        }
        if (f.dim(2) % min_h != 0 || f.dim(3) % min_w != 0 || f.dim(2) / min_h != f.dim(3) / min_w)
            throw ConfigError("similarity maps cannot be aligned: " + shape_str(f.shape()) +
                              " vs " + std::to_string(min_h) + "x" + std::to_string(min_w));
        int64_t k = f.dim(2) / min_h;
        out.push_back(avg_pool2d(f, k, k));
    }
    return out;
}

}  // namespace

void LossWeights::validate() const {
    auto in01 = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    auto nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!in01(alpha)) throw ConfigError("alpha must lie in [0,1]");
    if (!in01(mu_r)) throw ConfigError("mu_r must lie in [0,1]");
    if (!(std::isfinite(temperature) && temperature > 0.0))
        throw ConfigError("temperature must be positive");
    if (!nonneg(beta)) throw ConfigError("beta must be >= 0");
    if (!nonneg(gamma)) throw ConfigError("gamma must be >= 0");
    if (!nonneg(lambda_gp)) throw ConfigError("lambda_gp must be >= 0");
    if (!nonneg(lambda1) || !nonneg(lambda2) || !nonneg(lambda3))
        throw ConfigError("lambda1..3 must be >= 0");
}

Tensor softmax_probs(const Tensor& logits) { return softmax_rows(logits); }

Tensor softened_probs(const Tensor& logits, double temperature) {
    if (!(temperature > 0.0)) throw ContractError("softened_probs: temperature must be > 0");
    return softmax_rows(mul_scalar(logits, 1.0 / temperature));
}

Tensor loss_ce(const std::vector<Tensor>& logits, const std::vector<int64_t>& labels) {
    if (logits.empty()) throw ContractError("loss_ce: no classifiers");
    int64_t b = logits[0].dim(0);
    if (static_cast<int64_t>(labels.size()) != b)
        throw ContractError("loss_ce: batch/labels size mismatch");
    Tensor oh = onehot(labels, logits[0].dim(1));  // validates label range
    Tensor total;
    for (const Tensor& a : logits) {
        Tensor picked = sum_all(mul(log_softmax_rows(a), oh));
        Tensor ce_k = neg(div_by(picked, static_cast<double>(b)));
        total = total.defined() ? add(total, ce_k) : ce_k;
    }
    return total;
}

Tensor loss_kl_pairwise(const std::vector<Tensor>& logits, double temperature,
                        bool detach_target) {
    int64_t k1 = static_cast<int64_t>(logits.size());
    if (k1 <= 1) {
        std::fprintf(stderr, "warning: loss_kl_pairwise with %lld classifier(s): no pairs\n",
                     static_cast<long long>(k1));
        return scalar_const(0.0);
    }
    if (!(temperature > 0.0)) throw ContractError("loss_kl_pairwise: temperature must be > 0");
    int64_t b = logits[0].dim(0);

    std::vector<Tensor> q, ls;
    for (const Tensor& a : logits) {
        Tensor s = mul_scalar(a, 1.0 / temperature);
        q.push_back(softmax_rows(s));
        ls.push_back(log_softmax_rows(s));
    }
    Tensor acc;
    for (int64_t i = 0; i < k1; ++i)
        for (int64_t j = 0; j < k1; ++j) {
            if (i == j) continue;
            Tensor target = detach_target ? ls[static_cast<size_t>(j)].detach()
                                          : ls[static_cast<size_t>(j)];
            Tensor term = sum_all(mul(q[static_cast<size_t>(i)],
                                      sub(ls[static_cast<size_t>(i)], target)));
            acc = acc.defined() ? add(acc, term) : term;
        }
    // each pair's KL is a batch mean; the pair sum is scaled by 1/K
    return div_by(acc, static_cast<double>((k1 - 1) * b));
}

Tensor similarity_map(const Tensor& features) {
    if (features.rank() != 4) throw ContractError("similarity_map: features must be (B,C,H,W)");
    int64_t b = features.dim(0), c = features.dim(1), n = features.dim(2) * features.dim(3);
    Tensor g = reshape(features, {b, c, n});
    Tensor ips = bmm(transpose(g, 1, 2), g);
    Tensor norms = norm_axis(g, 1);  // (B, N)
    Tensor outer = bmm(reshape(norms, {b, n, 1}), reshape(norms, {b, 1, n}));
    return div(ips, clamp_min(outer, 1e-12));
}

Tensor loss_l2_simmaps(const std::vector<Tensor>& features) {
    int64_t k1 = static_cast<int64_t>(features.size());
    if (k1 < 2) return scalar_const(0.0);
    std::vector<Tensor> aligned = align_features(features);
    std::vector<Tensor> maps;
    for (const Tensor& f : aligned) maps.push_back(similarity_map(f));

    // mean_all folds both the batch mean and the loss's 1/N^2 factor
    Tensor total;
    for (int64_t i = 0; i < k1 - 1; ++i) {
        Tensor inner;
        for (int64_t j = i + 1; j < k1; ++j) {
            Tensor term = mean_all(square(sub(maps[static_cast<size_t>(i)],
                                              maps[static_cast<size_t>(j)].detach())));
            inner = inner.defined() ? add(inner, term) : term;
        }
        Tensor weighted = div_by(inner, static_cast<double>(k1 - 1 - i));
        total = total.defined() ? add(total, weighted) : weighted;
    }
    return total;
}

Tensor real_mix(const std::vector<Tensor>& probs, const Tensor& y_onehot, double mu_r) {
    if (!(mu_r >= 0.0 && mu_r <= 1.0)) throw ContractError("real_mix: mu_r must lie in [0,1]");
    if (probs.empty()) throw ContractError("real_mix: no classifiers");
    int64_t k1 = static_cast<int64_t>(probs.size());
    Tensor acc = probs[0].detach();
    for (int64_t i = 1; i < k1; ++i) acc = add(acc, probs[static_cast<size_t>(i)].detach());
    Tensor ens = mul_scalar(div_by(acc, static_cast<double>(k1)), mu_r);
    return add(ens, mul_scalar(y_onehot.detach(), 1.0 - mu_r));
}

Tensor loss_discriminator_wgangp(nn::Discriminator& d, const std::vector<Tensor>& probs,
                                 const Tensor& r, const Tensor& images, double lambda_gp,
                                 const std::vector<double>& epsilons) {
    if (probs.empty()) throw ContractError("loss_discriminator_wgangp: no generators");
    for (const Tensor& p : probs)
        if (p.requires_grad())
            throw ContractError(
                "loss_discriminator_wgangp: generator probabilities must be detached");
    if (r.requires_grad())
        throw ContractError("loss_discriminator_wgangp: real mixture must be detached");
    int64_t k1 = static_cast<int64_t>(probs.size());
    int64_t b = probs[0].dim(0);
    if (static_cast<int64_t>(epsilons.size()) != b)
        throw ContractError("loss_discriminator_wgangp: need one epsilon per sample");

    // One stacked critic pass scores every generator and the real mixture:
    // rows are independent, so the values match per-generator evaluation
    // bitwise while the graph stays K+1 times smaller.
    Tensor cond = d.make_cond(images);
    std::vector<Tensor> stack = probs;
    stack.push_back(r);
    std::vector<Tensor> cond_tile(static_cast<size_t>(k1 + 1), cond);
    Tensor scores = d.score(concat(stack, 0), concat(cond_tile, 0));
    Tensor real_mean = mean_all(slice(scores, 0, k1 * b, b));
    Tensor base;
    for (int64_t i = 0; i < k1; ++i) {
        Tensor term = sub(mean_all(slice(scores, 0, i * b, b)), real_mean);
        base = base.defined() ? add(base, term) : term;
    }
    Tensor total = div_by(base, static_cast<double>(k1));

    if (lambda_gp != 0.0) {
        int64_t classes = probs[0].dim(1);
        std::vector<double> hat(static_cast<size_t>(k1 * b * classes));
        const double* pr = r.data();
        for (int64_t i = 0; i < k1; ++i) {
            const double* pp = probs[static_cast<size_t>(i)].data();
            for (int64_t bi = 0; bi < b; ++bi) {
                double e = epsilons[static_cast<size_t>(bi)];
                for (int64_t ci = 0; ci < classes; ++ci) {
                    int64_t at = bi * classes + ci;
                    hat[static_cast<size_t>(i * b * classes + at)] =
                        e * pr[at] + (1.0 - e) * pp[at];
                }
            }
        }
        Tensor p_hat = Tensor::from_data({k1 * b, classes}, std::move(hat));
        std::vector<Tensor> cond_gp(static_cast<size_t>(k1), cond);
        Tensor gnorm = norm_axis(d.input_grad(p_hat, concat(cond_gp, 0)), 1);
        Tensor sq = square(add_scalar(gnorm, -1.0));
        Tensor gp_acc;
        for (int64_t i = 0; i < k1; ++i) {
            Tensor term = mean_all(slice(sq, 0, i * b, b));
            gp_acc = gp_acc.defined() ? add(gp_acc, term) : term;
        }
        total = add(total, mul_scalar(div_by(gp_acc, static_cast<double>(k1)), lambda_gp));
    }
    return total;
}

Tensor loss_generator_w(nn::Discriminator& d, const std::vector<Tensor>& probs,
                        const Tensor& images) {
    if (probs.empty()) throw ContractError("loss_generator_w: no generators");
    int64_t k1 = static_cast<int64_t>(probs.size());
    int64_t b = probs[0].dim(0);
    nn::FreezeGuard freeze(d);
    Tensor cond = d.make_cond(images);
    std::vector<Tensor> cond_tile(static_cast<size_t>(k1), cond);
    Tensor scores = d.score(concat(probs, 0), concat(cond_tile, 0));
    Tensor acc;
    for (int64_t i = 0; i < k1; ++i) {
        Tensor term = mean_all(slice(scores, 0, i * b, b));
        acc = acc.defined() ? add(acc, term) : term;
    }
    return neg(div_by(acc, static_cast<double>(k1)));
}

Tensor loss_sd_total(const Tensor& ce, const Tensor& kl, const Tensor& l2, const Tensor& w,
                     const LossWeights& weights) {
    weights.validate();
    check_finite_component("ce", ce);
    check_finite_component("kl", kl);
    check_finite_component("l2", l2);
    check_finite_component("w", w);
    Tensor total;
    auto add_term = [&total](const Tensor& t, double wgt) {
        if (wgt == 0.0) return;
        Tensor term = wgt == 1.0 ? t : mul_scalar(t, wgt);
        total = total.defined() ? add(total, term) : term;
    };
    add_term(ce, 1.0 - weights.alpha);
    add_term(kl, weights.alpha);
    add_term(l2, weights.beta);
    add_term(w, weights.gamma);
    return total.defined() ? total : scalar_const(0.0);
}

Tensor loss_kd_total(const BranchOutputs& teacher, const BranchOutputs& student,
                     const LossWeights& weights, nn::Discriminator* d, const Tensor& images,
                     KdPairing pairing) {
    if (teacher.classifiers() != student.classifiers())
        throw ConfigError("teacher/student branch counts differ: " +
                          std::to_string(teacher.classifiers()) + " vs " +
                          std::to_string(student.classifiers()));
    for (const Tensor& t : teacher.logits)
        if (t.requires_grad()) throw ContractError("loss_kd_total: teacher outputs must be detached");
    int64_t k1 = teacher.classifiers();
    int64_t b = student.logits[0].dim(0);
    double t_inv = 1.0 / weights.temperature;

    Tensor total;
    auto add_term = [&total](const Tensor& t, double wgt) {
        if (wgt == 0.0) return;
        Tensor term = wgt == 1.0 ? t : mul_scalar(t, wgt);
        total = total.defined() ? add(total, term) : term;
    };

    if (weights.lambda1 != 0.0) {
        // KL(teacher || student): the student chases each teacher target.
        std::vector<Tensor> qt, lst, lss;
        for (int64_t i = 0; i < k1; ++i) {
            Tensor ts = mul_scalar(teacher.logits[static_cast<size_t>(i)], t_inv);
            qt.push_back(softmax_rows(ts));
            lst.push_back(log_softmax_rows(ts));
            lss.push_back(log_softmax_rows(mul_scalar(student.logits[static_cast<size_t>(i)], t_inv)));
        }
        Tensor acc;
        int64_t pair_count = 0;
        for (int64_t i = 0; i < k1; ++i) {
            for (int64_t j = 0; j < k1; ++j) {
                if (pairing == KdPairing::Matched && i != j) continue;
                Tensor term = sum_all(mul(qt[static_cast<size_t>(j)],
                                          sub(lst[static_cast<size_t>(j)], lss[static_cast<size_t>(i)])));
                acc = acc.defined() ? add(acc, term) : term;
                ++pair_count;
            }
        }
        add_term(div_by(acc, static_cast<double>(pair_count * b)), weights.lambda1);
    }

    if (weights.lambda2 != 0.0) {
        std::vector<Tensor> ms, mt;
        std::vector<Tensor> sa = align_features(student.features);
        std::vector<Tensor> ta = align_features(teacher.features);
        for (int64_t i = 0; i < k1; ++i) {
            ms.push_back(similarity_map(sa[static_cast<size_t>(i)]));
            mt.push_back(similarity_map(ta[static_cast<size_t>(i)]));
        }
        Tensor acc;
        if (pairing == KdPairing::Matched) {
            for (int64_t i = 0; i < k1; ++i) {
                Tensor term = mean_all(square(sub(ms[static_cast<size_t>(i)],
                                                  mt[static_cast<size_t>(i)].detach())));
                acc = acc.defined() ? add(acc, term) : term;
            }
            acc = div_by(acc, static_cast<double>(k1));
        } else {
            // student map i against every deeper-or-equal teacher map
            for (int64_t i = 0; i < k1; ++i) {
                Tensor inner;
                for (int64_t j = i; j < k1; ++j) {
                    Tensor term = mean_all(square(sub(ms[static_cast<size_t>(i)],
                                                      mt[static_cast<size_t>(j)].detach())));
                    inner = inner.defined() ? add(inner, term) : term;
                }
                Tensor weighted = div_by(inner, static_cast<double>(k1 - i));
                acc = acc.defined() ? add(acc, weighted) : weighted;
            }
        }
        add_term(acc, weights.lambda2);
    }

    if (weights.lambda3 != 0.0) {
        if (!d) throw ConfigError("loss_kd_total: lambda3 > 0 needs a discriminator");
        std::vector<Tensor> sp;
        for (const Tensor& a : student.logits) sp.push_back(softmax_rows(a));
        add_term(loss_generator_w(*d, sp, images), weights.lambda3);
    }

    return total.defined() ? total : scalar_const(0.0);
}

}  // namespace bd
