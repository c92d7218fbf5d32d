#pragma once

#include <string>

#include "bd/nn/branched.hpp"
#include "bd/nn/discriminator.hpp"
#include "bd/optim.hpp"
#include "bd/rng.hpp"

namespace bd {

/// Everything a resumed run needs: model, critic, optimizer state, position.
struct TrainState {
    nn::BranchedModel model;
    nn::Discriminator disc;
    SgdOptimizer opt_model, opt_disc;
    int64_t epoch = 0;
    Rng rng{0};
    int64_t k_branches = 0;
};

/// BDKD container: magic "BDKD", u32 LE version, length-prefixed arch
/// descriptor, then (length-prefixed name, u8 dtype, u32 rank, u32 extents...,
/// raw little-endian values) records. Identical state serializes to identical
/// bytes. `precision` picks the on-disk float width for parameter records
/// ("f64" or "f32"); metadata always stays f64.
void save_checkpoint(const std::string& path, TrainState& state,
                     const std::string& precision = "f64");

TrainState load_checkpoint(const std::string& path);

}  // namespace bd
