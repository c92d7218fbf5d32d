#pragma once

#include <string>
#include <vector>

#include "bd/checkpoint.hpp"
#include "bd/config.hpp"
#include "bd/data.hpp"
#include "bd/losses.hpp"

namespace bd {

struct StepMetrics {
    double ce = 0, kl = 0, l2 = 0, w = 0, d = 0, kd = 0;
};

struct EvalResult {
    std::vector<double> classifier_acc;  // shallow -> deep, size K+1
    double ensemble_acc = 0.0;
};

struct RunReport {
    std::vector<double> best_acc;     // per classifier
    std::vector<int64_t> best_epoch;  // 1-based
    double best_ensemble = 0.0;
    EvalResult final_eval;
    std::vector<StepMetrics> epoch_losses;           // per-epoch means
    std::vector<double> epoch_max_abs_w, epoch_max_abs_d;  // stability trackers
    std::string run_dir, metrics_csv_path, manifest_path, final_checkpoint_path;
    std::vector<std::string> best_checkpoint_paths;
};

/// One alternating optimization step: `critic_steps` discriminator updates
/// on detached generator outputs, then one generator update on the full
/// self-distillation objective (plus the teacher-student terms when a frozen
/// teacher is supplied). The tape is cleared before returning.
StepMetrics train_step(nn::BranchedModel& model, nn::Discriminator& disc, SgdOptimizer& opt_model,
                       SgdOptimizer& opt_disc, Tape& tape, const Tensor& images,
                       const std::vector<int64_t>& labels, const LossWeights& weights,
                       int64_t critic_steps, Rng& rng, nn::BranchedModel* teacher = nullptr,
                       KdPairing pairing = KdPairing::Matched);

/// Deterministic eval-mode pass: per-classifier top-1 accuracy plus the
/// accuracy of the mean-softmax ensemble.
EvalResult evaluate(nn::BranchedModel& model, const data::Dataset& ds,
                    const std::vector<double>& mean, const std::vector<double>& stddev,
                    int64_t batch_size);

/// Full training loop on an already-resolved dataset: cosine schedule,
/// per-epoch evaluation, metrics CSV, best-per-classifier checkpoints, run
/// manifest. `teacher` (optional) turns the run into the distillation mode.
RunReport train_run_on(const TrainConfig& cfg, const data::SplitDataset& data,
                       TrainState* teacher = nullptr);

/// Loads the dataset named by the config, then runs train_run_on.
RunReport train_run(const TrainConfig& cfg);

/// Loads the teacher checkpoint, freezes it in eval mode, and trains a fresh
/// student with the combined objective.
RunReport train_teacher_student(const std::string& teacher_checkpoint, const TrainConfig& cfg);

/// Shared helper: the manifest text written alongside every run.
void write_manifest(const std::string& path, const TrainConfig& cfg, uint64_t dataset_checksum,
                    const RunReport& report, const std::string& started, const std::string& ended);

}  // namespace bd
