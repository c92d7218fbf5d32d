#include "bd/optim.hpp"

#include <cmath>

#include "bd/errors.hpp"
#include "bd/ops.hpp"

namespace bd {

double cosine_lr(int64_t epoch, int64_t total_epochs, double lr0) {
    if (total_epochs < 1) throw ContractError("cosine_lr: total_epochs must be >= 1");
    if (epoch < 0 || epoch > total_epochs)
        throw ContractError("cosine_lr: epoch " + std::to_string(epoch) + " outside [0," +
                            std::to_string(total_epochs) + "]");
    return lr0 * 0.5 * (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(epoch) /
                                       static_cast<double>(total_epochs)));
}

void SgdOptimizer::step(const std::vector<nn::Param>& params) {
    if (velocity_.size() != params.size()) {
        velocity_.clear();
        for (const nn::Param& p : params)
            velocity_.emplace_back(static_cast<size_t>(p.tensor->numel()), 0.0);
    }
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& t = *params[i].tensor;
        std::vector<double>& v = velocity_[i];
        double* pd = t.data_mut();
        int64_t n = t.numel();
        bool has = t.has_grad();
        if (!has && strict_numerics())
            throw ContractError("sgd_step: parameter '" + params[i].name + "' has no gradient");
        const double* g = has ? t.grad().data() : nullptr;
        for (int64_t j = 0; j < n; ++j) {
            double grad = (g ? g[j] : 0.0) + weight_decay_ * pd[j];
            v[static_cast<size_t>(j)] = momentum_ * v[static_cast<size_t>(j)] + grad;
            pd[j] -= lr_ * v[static_cast<size_t>(j)];
        }
        t.zero_grad();
    }
}

}  // namespace bd
