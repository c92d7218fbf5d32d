#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bd/rng.hpp"
#include "bd/tensor.hpp"

namespace bd::data {

/// Immutable-after-load image dataset. Pixels live either as raw bytes
/// (file-backed sets, scaled to [0,1] on access) or as doubles (synthetic).
struct Dataset {
    int64_t count = 0, channels = 0, height = 0, width = 0;
    int64_t class_count = 0;
    std::vector<uint8_t> pixels_u8;
    std::vector<double> pixels_f64;
    std::vector<int64_t> labels;
    // per-channel normalization statistics (filled by compute_norm_stats)
    std::vector<double> mean, stddev;

    bool byte_backed() const { return !pixels_u8.empty(); }
    int64_t sample_dim() const { return channels * height * width; }
    /// Writes sample i as doubles in [0,1] (byte-backed) or raw values.
    void copy_sample(int64_t i, double* out) const;
    void compute_norm_stats();
    /// FNV-1a over pixel and label bytes, for run manifests.
    uint64_t checksum() const;
};

/// IDX (MNIST family) reader: big-endian u32 magic and extents, raw bytes.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
/// IDX writer, the byte-exact inverse of load_idx. Requires byte-backed data.
void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path);

/// CIFAR binary reader. CIFAR-10 records are [label, 3072 pixels]; CIFAR-100
/// records are [coarse, fine, 3072 pixels] and `coarse` picks which label to
/// keep. The record layout is inferred from the file length.
Dataset load_cifar_binary(const std::vector<std::string>& paths, bool coarse);

/// Class-conditional Gaussian blobs around deterministic per-class patterns.
/// The patterns derive from `seed` alone; `noise_salt` varies the sampled
/// instances, so train/test splits share classes but not samples.
Dataset synth_blobs(int64_t classes, int64_t per_class, int64_t channels, int64_t h, int64_t w,
                    uint64_t seed, double sigma = 0.1, uint64_t noise_salt = 0);

/// Procedural seven-segment digit images, MNIST geometry (1x28x28, byte
/// pixels, 10 classes) with per-sample shift, intensity and noise jitter.
Dataset synth_digits(int64_t count, uint64_t seed);

struct AugmentPolicy {
    bool pad_crop = false;
    int64_t pad = 4;
    bool hflip = false;
    double hflip_p = 0.5;
    bool normalize = true;

    /// Train-time policy for a dataset family; eval keeps only normalize.
    static AugmentPolicy train_for(const std::string& dataset_id);
    static AugmentPolicy eval();
};

/// Applies crop -> flip -> normalize in place on one (C,H,W) sample.
void augment_sample(double* img, int64_t c, int64_t h, int64_t w, const AugmentPolicy& policy,
                    const std::vector<double>& mean, const std::vector<double>& stddev, Rng& rng);

/// Materializes a batch. The augmentation stream of sample `indices[i]` is
/// seeded by (run_seed, epoch, dataset index), so batch order and prefetch
/// cannot change results.
std::pair<Tensor, std::vector<int64_t>> make_batch(const Dataset& ds,
                                                   const std::vector<int64_t>& indices,
                                                   const AugmentPolicy& policy,
                                                   const std::vector<double>& mean,
                                                   const std::vector<double>& stddev,
                                                   uint64_t run_seed, int64_t epoch);

/// Resolved train/test pair.
struct SplitDataset {
    Dataset train, test;
    std::string id;
};

/// Loads a dataset by id: mnist | fashion-mnist | cifar10 | cifar100 |
/// cifar100-coarse | synth | synth-digits. File-backed ids resolve their
/// files under `root` (falling back to $BRANCH_DISTILL_DATA). Normalization
/// stats are computed from the train split.
SplitDataset load_dataset(const std::string& id, const std::string& root, int64_t classes_hint);

}  // namespace bd::data
