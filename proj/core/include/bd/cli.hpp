#pragma once

#include <string>
#include <vector>

#include "bd/config.hpp"

namespace bd::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
/// fault, 1 anything else.
int cmd_train(const TrainConfig& cfg);
int cmd_distill(const TrainConfig& cfg, const std::string& teacher_checkpoint);
int cmd_eval(const TrainConfig& cfg, const std::string& checkpoint);
/// Runs the CE / CE+KL / CE+KL+L2 / CE+KL+L2+W ladder over `seeds` seeds and
/// writes one CSV row per rung per seed to `out_csv`.
int cmd_ablate(const TrainConfig& cfg, int64_t seeds, const std::string& out_csv);

/// Full argv entry point (subcommand dispatch, config file + flag overrides).
int run(int argc, const char* const* argv);

}  // namespace bd::cli
