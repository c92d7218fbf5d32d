#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "bd/data.hpp"
#include "bd/errors.hpp"

namespace bd::data {

void Dataset::copy_sample(int64_t i, double* out) const {
    int64_t dim = sample_dim();
    if (byte_backed()) {
        const uint8_t* p = pixels_u8.data() + i * dim;
        for (int64_t e = 0; e < dim; ++e) out[e] = static_cast<double>(p[e]) / 255.0;
    } else {
        const double* p = pixels_f64.data() + i * dim;
        for (int64_t e = 0; e < dim; ++e) out[e] = p[e];
    }
}

void Dataset::compute_norm_stats() {
    mean.assign(static_cast<size_t>(channels), 0.0);
    stddev.assign(static_cast<size_t>(channels), 1.0);
    if (count == 0) return;
    int64_t plane = height * width;
    int64_t per_channel = count * plane;
    std::vector<double> sum(static_cast<size_t>(channels), 0.0);
    std::vector<double> sum2(static_cast<size_t>(channels), 0.0);
    std::vector<double> tmp(static_cast<size_t>(sample_dim()));
    for (int64_t i = 0; i < count; ++i) {
        copy_sample(i, tmp.data());
        for (int64_t ch = 0; ch < channels; ++ch) {
            const double* p = tmp.data() + ch * plane;
            for (int64_t e = 0; e < plane; ++e) {
                sum[static_cast<size_t>(ch)] += p[e];
                sum2[static_cast<size_t>(ch)] += p[e] * p[e];
            }
        }
    }
    for (int64_t ch = 0; ch < channels; ++ch) {
        double m = sum[static_cast<size_t>(ch)] / static_cast<double>(per_channel);
        double v = sum2[static_cast<size_t>(ch)] / static_cast<double>(per_channel) - m * m;
        mean[static_cast<size_t>(ch)] = m;
        stddev[static_cast<size_t>(ch)] = std::sqrt(std::max(v, 1e-12));
    }
}

uint64_t Dataset::checksum() const {
    uint64_t h = 1469598103934665603ULL;
    auto mixin = [&h](const uint8_t* p, size_t n) {
        for (size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    };
    if (byte_backed()) {
        mixin(pixels_u8.data(), pixels_u8.size());
    } else {
        mixin(reinterpret_cast<const uint8_t*>(pixels_f64.data()),
              pixels_f64.size() * sizeof(double));
    }
    mixin(reinterpret_cast<const uint8_t*>(labels.data()), labels.size() * sizeof(int64_t));
    return h;
}

namespace {

std::string resolve_root(const std::string& root) {
    if (!root.empty()) return root;
    const char* env = std::getenv("BRANCH_DISTILL_DATA");
    if (env && *env) return env;
    return ".";
}

std::string find_file(const std::string& root, const std::vector<std::string>& names) {
    namespace fs = std::filesystem;
    for (const std::string& n : names) {
        fs::path p = fs::path(root) / n;
        if (fs::exists(p)) return p.string();
    }
    throw DataError("none of the dataset files found under '" + root + "' (looked for '" +
                    names.front() + "')");
}

}  // namespace

SplitDataset load_dataset(const std::string& id, const std::string& root, int64_t classes_hint) {
    SplitDataset out;
    out.id = id;
    std::string r = resolve_root(root);
    if (id == "mnist" || id == "fashion-mnist") {
        std::string sub = id == "mnist" ? "mnist" : "fashion-mnist";
        std::string base = std::filesystem::exists(std::filesystem::path(r) / sub)
                               ? (std::filesystem::path(r) / sub).string()
                               : r;
        out.train = load_idx(find_file(base, {"train-images-idx3-ubyte", "train-images.idx3-ubyte"}),
                             find_file(base, {"train-labels-idx1-ubyte", "train-labels.idx1-ubyte"}));
        out.test = load_idx(find_file(base, {"t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"}),
                            find_file(base, {"t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"}));
    } else if (id == "cifar10") {
        std::string base = std::filesystem::exists(std::filesystem::path(r) / "cifar-10-batches-bin")
                               ? (std::filesystem::path(r) / "cifar-10-batches-bin").string()
                               : r;
        std::vector<std::string> train_files;
        for (int i = 1; i <= 5; ++i)
            train_files.push_back(find_file(base, {"data_batch_" + std::to_string(i) + ".bin"}));
        out.train = load_cifar_binary(train_files, false);
        out.test = load_cifar_binary({find_file(base, {"test_batch.bin"})}, false);
    } else if (id == "cifar100" || id == "cifar100-coarse") {
        bool coarse = id == "cifar100-coarse";
        std::string base = std::filesystem::exists(std::filesystem::path(r) / "cifar-100-binary")
                               ? (std::filesystem::path(r) / "cifar-100-binary").string()
                               : r;
        out.train = load_cifar_binary({find_file(base, {"train.bin"})}, coarse);
        out.test = load_cifar_binary({find_file(base, {"test.bin"})}, coarse);
    } else if (id == "synth") {
        int64_t classes = classes_hint > 0 ? classes_hint : 10;
        // fixed data seed: every run and every seed trains on the same bytes;
        // the splits share class patterns and differ only in sampled noise
        out.train = synth_blobs(classes, 512 / classes + 1, 1, 16, 16, 0xDA7AULL, 0.1, 0);
        out.test = synth_blobs(classes, 256 / classes + 1, 1, 16, 16, 0xDA7AULL, 0.1, 1);
    } else if (id == "synth-digits") {
        out.train = synth_digits(10000, 0xD16175ULL);
        out.test = synth_digits(10000, 0xD16173E57ULL);
    } else {
        throw ConfigError("unknown dataset '" + id + "'");
    }
    out.train.compute_norm_stats();
    out.test.mean = out.train.mean;
    out.test.stddev = out.train.stddev;
    return out;
}

}  // namespace bd::data
