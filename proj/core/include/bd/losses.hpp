#pragma once

#include <vector>

#include "bd/nn/branched.hpp"
#include "bd/nn/discriminator.hpp"

namespace bd {

using nn::BranchOutputs;

/// Full hyperparameter record of the training objective.
struct LossWeights {
    double alpha = 0.3;        // KL vs CE mix
    double beta = 0.03;        // similarity-map L2 weight
    double gamma = 0.1;        // adversarial weight
    double temperature = 3.0;  // distillation temperature
    double mu_r = 0.5;         // ensemble vs label mix in the critic's real sample
    double lambda_gp = 10.0;   // gradient-penalty weight
    double lambda1 = 0.3;      // teacher-student KL weight
    double lambda2 = 0.03;     // teacher-student similarity-map weight
    double lambda3 = 0.1;      // teacher-student adversarial weight
    bool kl_detach_target = false;

    void validate() const;  // throws ConfigError
};

/// Row softmax of logits (B, classes).
Tensor softmax_probs(const Tensor& logits);

/// Temperature-softened softmax: softmax(logits / T). T must be positive.
Tensor softened_probs(const Tensor& logits, double temperature);

/// Sum over classifiers of the batch-mean cross entropy, log-sum-exp form.
Tensor loss_ce(const std::vector<Tensor>& logits, const std::vector<int64_t>& labels);

/// (1/K) * sum over ordered pairs (i, j != i) of batch-mean KL(q_i^T || q_j^T).
/// With detach_target the second argument of each pair is held constant.
Tensor loss_kl_pairwise(const std::vector<Tensor>& logits, double temperature,
                        bool detach_target = false);

/// Per-sample cosine similarities between all spatial feature vectors:
/// (B, C', H', W') -> (B, N, N) with N = H'*W'. Denominators are clamped
/// at 1e-12 so zero vectors stay defined.
Tensor similarity_map(const Tensor& features);

/// Similarity-map distillation across classifiers: shallower maps chase
/// deeper ones, the deeper side of every pair is detached so gradients only
/// reach the shallower path. Maps of unequal spatial size are average-pooled
/// to the smallest common extent first.
Tensor loss_l2_simmaps(const std::vector<Tensor>& features);

/// Critic's real sample: mu_r-weighted ensemble average of the classifier
/// probabilities mixed with the one-hot labels. Fully detached.
Tensor real_mix(const std::vector<Tensor>& probs, const Tensor& y_onehot, double mu_r);

/// WGAN-GP critic loss over the K+1 generators. `probs` must be detached;
/// `epsilons` holds one interpolation draw per sample.
Tensor loss_discriminator_wgangp(nn::Discriminator& d, const std::vector<Tensor>& probs,
                                 const Tensor& r, const Tensor& images, double lambda_gp,
                                 const std::vector<double>& epsilons);

/// Generator-side Wasserstein loss. The critic is frozen for the evaluation,
/// so gradients reach only the classifier paths.
Tensor loss_generator_w(nn::Discriminator& d, const std::vector<Tensor>& probs,
                        const Tensor& images);

/// Weighted total (1-alpha)*ce + alpha*kl + beta*l2 + gamma*w. Zero-weight
/// components are skipped, not multiplied.
Tensor loss_sd_total(const Tensor& ce, const Tensor& kl, const Tensor& l2, const Tensor& w,
                     const LossWeights& weights);

/// Which (student branch, teacher branch) pairs the teacher-student losses
/// compare. Matched keeps i==i pairs only; All crosses every student branch
/// with every teacher branch (KL) / every deeper-or-equal one (L2).
enum class KdPairing { Matched, All };

/// Teacher-student objective: lambda1 * KL + lambda2 * L2 + lambda3 * W,
/// teacher outputs frozen. `d` may be null when lambda3 is zero.
Tensor loss_kd_total(const BranchOutputs& teacher, const BranchOutputs& student,
                     const LossWeights& weights, nn::Discriminator* d, const Tensor& images,
                     KdPairing pairing = KdPairing::Matched);

}  // namespace bd
