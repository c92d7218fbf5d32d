#include "bd/nn/discriminator.hpp"

#include "bd/errors.hpp"

namespace bd::nn {

int64_t DiscriminatorSpec::cond_dim() const {
    if (cond_mode == Cond::Flatten) return cond_channels * cond_h * cond_w;
    return cond_channels * pool_to * pool_to;
}

Discriminator Discriminator::build(const DiscriminatorSpec& spec, Rng& rng) {
    if (spec.classes < 2) throw ConfigError("discriminator: classes must be >= 2");
    if (spec.layers < 0 || spec.hidden < 1) throw ConfigError("discriminator: bad layers/hidden");
    if (spec.cond_mode == DiscriminatorSpec::Cond::AvgPool &&
        (spec.cond_h % spec.pool_to != 0 || spec.cond_w % spec.pool_to != 0))
        throw ConfigError("discriminator: pooled conditioning needs spatial extents divisible by " +
                          std::to_string(spec.pool_to));

    Discriminator d;
    d.spec_ = spec;
    int64_t in_dim = spec.classes + spec.cond_dim();
    int64_t h = spec.layers == 0 ? 1 : spec.hidden;
    d.w1_p_ = he_normal({h, spec.classes}, in_dim, rng);
    d.w1_c_ = he_normal({h, spec.cond_dim()}, in_dim, rng);
    d.b1_ = Tensor::param_zeros({1, h});
    if (spec.layers > 0) {
        d.ln1_g_ = Tensor::param_full({1, h}, 1.0);
        d.ln1_b_ = Tensor::param_zeros({1, h});
        for (int64_t l = 1; l < spec.layers; ++l) {
            Hidden hl;
            hl.w = he_normal({spec.hidden, spec.hidden}, spec.hidden, rng);
            hl.b = Tensor::param_zeros({1, spec.hidden});
            hl.ln_g = Tensor::param_full({1, spec.hidden}, 1.0);
            hl.ln_b = Tensor::param_zeros({1, spec.hidden});
            d.rest_.push_back(std::move(hl));
        }
        d.w_out_ = he_normal({1, spec.hidden}, spec.hidden, rng);
        d.b_out_ = Tensor::param_zeros({1, 1});
    }
    return d;
}

Tensor Discriminator::make_cond(const Tensor& images) {
    if (images.rank() != 4) throw ContractError("make_cond: images must be (B,C,H,W)");
    if (images.dim(1) != spec_.cond_channels || images.dim(2) != spec_.cond_h ||
        images.dim(3) != spec_.cond_w)
        throw ContractError("make_cond: image geometry " + shape_str(images.shape()) +
                            " does not match discriminator condition");
    ++counters_.cond_evals;
    Tensor feats;
    if (spec_.cond_mode == DiscriminatorSpec::Cond::Flatten) {
        feats = reshape(images, {images.dim(0), spec_.cond_dim()});
    } else {
        int64_t k = spec_.cond_h / spec_.pool_to;
        Tensor pooled = avg_pool2d(images, k, k);
        feats = reshape(pooled, {images.dim(0), spec_.cond_dim()});
    }
    return matmul(feats, transpose(maybe_frozen(w1_c_), 0, 1));
}

struct Discriminator::Trace {
    // per layer, index 0 is the first block
    std::vector<Tensor> mask;     // leaky-ReLU derivative, detached constant
    std::vector<Tensor> xhat;     // layer-norm normalized input, live
    std::vector<Tensor> inv_den;  // (B,1) the sqrt(var+eps) denominator, live
};

Tensor Discriminator::forward_impl(const Tensor& p, const Tensor& cond_proj, Trace* trace) {
    if (p.rank() != 2 || p.dim(1) != spec_.classes)
        throw ContractError("discriminator: probabilities must be (B," +
                            std::to_string(spec_.classes) + "), got " + shape_str(p.shape()));
    if (cond_proj.rank() != 2 || cond_proj.dim(0) != p.dim(0))
        throw ContractError("discriminator: condition batch mismatch");

    Tensor a = add(add(matmul(p, transpose(maybe_frozen(w1_p_), 0, 1)), cond_proj),
                   maybe_frozen(b1_));
    if (spec_.layers == 0) return reshape(a, {p.dim(0)});

    Tensor z;
    for (int64_t l = 0; l < spec_.layers; ++l) {
        if (l > 0) {
            const Hidden& hl = rest_[static_cast<size_t>(l - 1)];
            a = add(matmul(z, transpose(maybe_frozen(hl.w), 0, 1)), maybe_frozen(hl.b));
        }
        // layer normalization from primitives so the normalized input and
        // denominator stay addressable for the input-gradient chain
        Tensor mu = mean_axis(a, 1, true);
        Tensor d = sub(a, mu);
        Tensor var = mean_axis(square(d), 1, true);
        Tensor den = sqrt(add_scalar(var, spec_.ln_eps));
        Tensor xhat = div(d, den);
        const Tensor& g = l == 0 ? ln1_g_ : rest_[static_cast<size_t>(l - 1)].ln_g;
        const Tensor& b = l == 0 ? ln1_b_ : rest_[static_cast<size_t>(l - 1)].ln_b;
        Tensor h = add(mul(xhat, maybe_frozen(g)), maybe_frozen(b));
        z = leaky_relu(h, spec_.slope);
        if (trace) {
            const double* hv = h.data();
            std::vector<double> m(static_cast<size_t>(h.numel()));
            for (size_t i = 0; i < m.size(); ++i) m[i] = hv[i] > 0.0 ? 1.0 : spec_.slope;
            trace->mask.push_back(Tensor::from_data(h.shape(), std::move(m)));
            trace->xhat.push_back(xhat);
            trace->inv_den.push_back(den);
        }
    }
    Tensor s = add(matmul(z, transpose(maybe_frozen(w_out_), 0, 1)), maybe_frozen(b_out_));
    return reshape(s, {p.dim(0)});
}

Tensor Discriminator::score(const Tensor& p, const Tensor& cond_proj) {
    ++counters_.score_evals;
    return forward_impl(p, cond_proj, nullptr);
}

Tensor Discriminator::score_direct(const Tensor& p, const Tensor& images) {
    return score(p, make_cond(images));
}

Tensor Discriminator::input_grad(const Tensor& p_hat, const Tensor& cond_proj) {
    ++counters_.input_grad_evals;
    int64_t b = p_hat.dim(0);
    if (spec_.layers == 0) {
        // linear critic: the gradient row is the probability slice of W
        return mul(Tensor::ones({b, 1}), maybe_frozen(w1_p_));
    }
    Trace trace;
    forward_impl(p_hat, cond_proj, &trace);

    // Backward chain d(score)/d(p_hat), built forward on the tape:
    // start at dD/dz_L = w_out, then per block apply the leaky mask, the
    // exact layer-norm Jacobian transpose, and the transposed linear map.
    Tensor u = mul(Tensor::ones({b, 1}), maybe_frozen(w_out_));
    for (int64_t l = spec_.layers - 1; l >= 0; --l) {
        u = mul(u, trace.mask[static_cast<size_t>(l)]);
        const Tensor& g = l == 0 ? ln1_g_ : rest_[static_cast<size_t>(l - 1)].ln_g;
        Tensor t = mul(u, maybe_frozen(g));
        const Tensor& xhat = trace.xhat[static_cast<size_t>(l)];
        Tensor mt = mean_axis(t, 1, true);
        Tensor mth = mean_axis(mul(t, xhat), 1, true);
        u = div(sub(sub(t, mt), mul(xhat, mth)), trace.inv_den[static_cast<size_t>(l)]);
        u = matmul(u, maybe_frozen(l == 0 ? w1_p_ : rest_[static_cast<size_t>(l - 1)].w));
    }
    return u;
}

std::vector<Param> Discriminator::params() {
    std::vector<Param> p;
    p.push_back({"d.w1_p", &w1_p_});
    p.push_back({"d.w1_c", &w1_c_});
    p.push_back({"d.b1", &b1_});
    if (spec_.layers > 0) {
        p.push_back({"d.ln1_g", &ln1_g_});
        p.push_back({"d.ln1_b", &ln1_b_});
        for (size_t l = 0; l < rest_.size(); ++l) {
            std::string pre = "d.h" + std::to_string(l + 2);
            p.push_back({pre + ".w", &rest_[l].w});
            p.push_back({pre + ".b", &rest_[l].b});
            p.push_back({pre + ".ln_g", &rest_[l].ln_g});
            p.push_back({pre + ".ln_b", &rest_[l].ln_b});
        }
        p.push_back({"d.w_out", &w_out_});
        p.push_back({"d.b_out", &b_out_});
    }
    return p;
}

DiscSnapshot Discriminator::snapshot() const {
    DiscSnapshot s;
    s.spec = spec_;
    s.w1_p = w1_p_.vec();
    s.w1_c = w1_c_.vec();
    s.b1 = b1_.vec();
    if (spec_.layers > 0) {
        s.ln1_g = ln1_g_.vec();
        s.ln1_b = ln1_b_.vec();
        for (const Hidden& h : rest_) s.rest.push_back({h.w.vec(), h.b.vec(), h.ln_g.vec(), h.ln_b.vec()});
        s.w_out = w_out_.vec();
        s.b_out = b_out_.vec();
    }
    return s;
}

}  // namespace bd::nn
