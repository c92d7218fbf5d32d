#pragma once

#include <vector>

#include "bd/nn/layers.hpp"

namespace bd {

/// lr0 * (1 + cos(pi * t / t_max)) / 2, the annealing schedule that starts
/// at lr0 and reaches exactly 0 at t == t_max.
double cosine_lr(int64_t epoch, int64_t total_epochs, double lr0);

/// SGD with momentum and decoupled-from-nothing weight decay folded into the
/// gradient: v <- momentum*v + (g + wd*p); p <- p - lr*v. Grads are zeroed
/// after each step.
class SgdOptimizer {
public:
    SgdOptimizer() = default;
    SgdOptimizer(double lr, double momentum, double weight_decay)
        : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {}

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    double momentum() const { return momentum_; }
    double weight_decay() const { return weight_decay_; }

    void step(const std::vector<nn::Param>& params);

    /// Per-parameter velocity buffers, index-parallel to the param list.
    std::vector<std::vector<double>>& velocities() { return velocity_; }

private:
    double lr_ = 0.1;
    double momentum_ = 0.9;
    double weight_decay_ = 5e-4;
    std::vector<std::vector<double>> velocity_;
};

}  // namespace bd
