#pragma once

#include <string>
#include <vector>

#include "bd/nn/layers.hpp"

namespace bd::nn {

/// Resnet-style family descriptor: an initial conv, then `blocks[g]` residual
/// blocks of `widths[g]` channels per group. Group 0 keeps the input stride,
/// every later group halves the spatial extent.
struct ArchSpec {
    std::string id;
    std::vector<int64_t> blocks;
    std::vector<int64_t> widths;
    int64_t stem_width = 16;
    int64_t in_channels = 3;
    int64_t in_h = 32, in_w = 32;
    int64_t classes = 10;

    int64_t groups() const { return static_cast<int64_t>(blocks.size()); }
    std::string describe() const;
};

/// Resolves a named architecture ("tiny-resnet", "resnet20/32/44/56",
/// "resnet18") against the dataset geometry. Throws ConfigError on an
/// unknown id.
ArchSpec make_arch(const std::string& id, int64_t classes, int64_t in_channels, int64_t in_h,
                   int64_t in_w);
/// Inverse of ArchSpec::describe().
ArchSpec parse_arch_descriptor(const std::string& desc);

/// Per-batch bundle of the K+1 classifiers' outputs, ordered shallow->deep.
/// features[k] is the last convolutional output before classifier k's pooling.
struct BranchOutputs {
    std::vector<Tensor> logits;    // each (B, classes)
    std::vector<Tensor> features;  // each (B, C'_k, H'_k, W'_k)
    int64_t classifiers() const { return static_cast<int64_t>(logits.size()); }
};

/// One primary stream of G groups plus K auxiliary heads; branch k taps the
/// stream after group k and runs one residual block per remaining group.
/// Classifiers are indexed 1..K+1 with K+1 the primary stream's own head.
class BranchedModel {
public:
    BranchedModel() = default;

    static BranchedModel build(const ArchSpec& arch, int64_t k_branches, Rng& rng);

    BranchOutputs forward_all(const Tensor& images);

    void set_training(bool on) { training_ = on; }
    bool is_training() const { return training_; }

    int64_t classifier_count() const { return k_branches_ + 1; }
    int64_t k_branches() const { return k_branches_; }
    const ArchSpec& arch() const { return arch_; }

    /// Standalone network holding exactly the parameters on classifier k's
    /// path (k in 1..K+1). Its forward_all yields one classifier whose output
    /// is bitwise equal to component k of this model's forward_all.
    BranchedModel extract_single(int64_t k) const;

    std::vector<Param> params();
    std::vector<Param> buffers();
    int64_t param_count();

    /// Multiply-add pairs x2 over conv/linear layers for one input.
    int64_t flop_count() const;

private:
    ArchSpec arch_;
    int64_t k_branches_ = 0;
    Conv2d stem_;
    BatchNorm2d stem_bn_;
    std::vector<std::vector<BasicBlock>> groups_;
    struct Head {
        std::vector<BasicBlock> blocks;
        Linear fc;
    };
    std::vector<Head> branch_heads_;
    Linear primary_fc_;
    bool training_ = true;
};

/// (params, flops) of a model, Table-X style: params are total scalars,
/// flops count one forward pass at the arch's input geometry.
struct CountReport {
    int64_t params = 0;
    int64_t flops = 0;
};
CountReport count_params_flops(BranchedModel& m);

}  // namespace bd::nn
