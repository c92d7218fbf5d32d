#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bd/losses.hpp"

namespace bd {

/// Resolved run configuration. Flat key=value files plus CLI overrides map
/// 1:1 onto these fields; unknown keys are rejected with the offending name.
struct TrainConfig {
    std::string arch = "tiny-resnet";
    int64_t branches = 2;
    int64_t classes = 10;
    std::string dataset = "synth";
    std::string data_root;
    int64_t epochs = 200;
    int64_t batch_size = 128;
    double lr0 = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    LossWeights weights;
    int64_t critic_steps = 1;
    uint64_t seed = 0;
    bool seed_set = false;
    int64_t eval_every = 1;
    std::string checkpoint_dir;
    std::string precision = "f64";
    // discriminator surface (ledgered extension keys)
    int64_t disc_hidden = 256;
    int64_t disc_layers = 3;
    std::string disc_cond = "flatten";  // flatten | pool
    // critic lr = disc_lr_scale * lr; the shared-schedule critic diverges at
    // desk scale, see the README notes on stability
    double disc_lr_scale = 0.1;

    void validate() const;  // throws ConfigError, including on a missing seed
    std::string resolved_checkpoint_dir() const;
};

/// Applies one key=value, with named range diagnostics.
void apply_config_kv(TrainConfig& cfg, const std::string& key, const std::string& value);

/// Parses `path` (empty string: defaults only) then applies `overrides` in
/// order. Lines starting with '#' and blank lines are ignored, so a run
/// manifest parses back as its own config. Does not validate; callers
/// validate after all overrides land.
TrainConfig parse_config(const std::string& path,
                         const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// key=value body used for manifests; parse_config(serialize) round-trips.
std::string serialize_config(const TrainConfig& cfg);

}  // namespace bd
