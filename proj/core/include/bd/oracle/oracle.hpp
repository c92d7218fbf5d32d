#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "bd/losses.hpp"
#include "bd/nn/discriminator.hpp"

// Brute-force reference evaluators: explicit loops, no shared arithmetic
// kernels with the library under test. Everything here trades speed for
// being obviously the formula.
namespace bd::oracle {

struct FiniteDiffSpec {
    double h = 1e-5;        // central step
    double tolerance = 1e-6;  // relative
};

/// |a-b| / max(1e-12, |a|, |b|).
double relative_error(double a, double b);
double max_relative_error(const std::vector<double>& a, const std::vector<double>& b);

/// Central differences per element: (f(x+h e_i) - f(x-h e_i)) / 2h.
std::vector<double> fd_grad(const std::function<double(const std::vector<double>&)>& f,
                            std::vector<double> x, const FiniteDiffSpec& spec = {});
/// Tensor-shaped convenience wrapper.
std::vector<double> fd_grad_tensor(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                   const FiniteDiffSpec& spec = {});

// --- naive loss evaluators (row-major buffers) ---

std::vector<double> softmax(const std::vector<double>& logits, int64_t b, int64_t c);
std::vector<double> softened(const std::vector<double>& logits, int64_t b, int64_t c, double t);

double ce_sum(const std::vector<std::vector<double>>& logits, int64_t b, int64_t c,
              const std::vector<int64_t>& labels);

double kl_pairwise(const std::vector<std::vector<double>>& logits, int64_t b, int64_t c, double t);

/// (B,N,N) cosine similarities of one (B,C,H,W) map, denominator clamped at 1e-12.
std::vector<double> similarity(const std::vector<double>& f, int64_t b, int64_t c, int64_t h,
                               int64_t w);

struct FeatureDims {
    int64_t b, c, h, w;
};
double l2_simmaps(const std::vector<std::vector<double>>& features,
                  const std::vector<FeatureDims>& dims);

std::vector<double> real_mix(const std::vector<std::vector<double>>& probs,
                             const std::vector<double>& y_onehot, double mu_r, int64_t b,
                             int64_t c);

/// Condition features exactly as the discriminator derives them.
std::vector<double> disc_cond_features(const nn::DiscSnapshot& d,
                                       const std::vector<double>& images, int64_t b);
/// Critic scores (B,) by per-sample loops.
std::vector<double> disc_forward(const nn::DiscSnapshot& d, const std::vector<double>& p,
                                 const std::vector<double>& cond_feats, int64_t b);
/// d(score)/d(p) rows (B, classes) by the per-sample transposed chain.
std::vector<double> disc_input_grad(const nn::DiscSnapshot& d, const std::vector<double>& p_hat,
                                    const std::vector<double>& cond_feats, int64_t b);

double disc_loss_wgangp(const nn::DiscSnapshot& d, const std::vector<std::vector<double>>& probs,
                        const std::vector<double>& r, const std::vector<double>& images,
                        double lambda_gp, const std::vector<double>& epsilons, int64_t b);

double gen_loss_w(const nn::DiscSnapshot& d, const std::vector<std::vector<double>>& probs,
                  const std::vector<double>& images, int64_t b);

double sd_total(double ce, double kl, double l2, double w, const LossWeights& weights);

double kd_total(const std::vector<std::vector<double>>& teacher_logits,
                const std::vector<std::vector<double>>& student_logits, int64_t b, int64_t c,
                const std::vector<std::vector<double>>& teacher_features,
                const std::vector<std::vector<double>>& student_features,
                const std::vector<FeatureDims>& dims, const LossWeights& weights,
                const nn::DiscSnapshot* d, const std::vector<double>& images, bool matched);

/// Nearest-class-mean classifier on flat images; means from the train split.
struct NearestMean {
    std::vector<std::vector<double>> means;  // class -> flat image
    static NearestMean fit(const std::vector<double>& images, const std::vector<int64_t>& labels,
                           int64_t n, int64_t dim, int64_t classes);
    int64_t predict(const double* image, int64_t dim) const;
};

}  // namespace bd::oracle
