#include <cstring>

#include "bd/data.hpp"
#include "bd/errors.hpp"

namespace bd::data {

AugmentPolicy AugmentPolicy::train_for(const std::string& dataset_id) {
    AugmentPolicy p;
    p.normalize = true;
    if (dataset_id == "cifar10" || dataset_id == "cifar100" || dataset_id == "cifar100-coarse") {
        p.pad_crop = true;
        p.hflip = true;
    } else if (dataset_id == "mnist" || dataset_id == "fashion-mnist" ||
               dataset_id == "synth-digits") {
        p.pad_crop = true;  // digits keep their chirality, no flip
    }
    return p;
}

AugmentPolicy AugmentPolicy::eval() {
    AugmentPolicy p;
    p.normalize = true;
    return p;
}

void augment_sample(double* img, int64_t c, int64_t h, int64_t w, const AugmentPolicy& policy,
                    const std::vector<double>& mean, const std::vector<double>& stddev, Rng& rng) {
    if (policy.pad_crop) {
        // zero-pad by `pad` then crop back at a uniform offset
        int64_t oy = rng.uniform_int(2 * policy.pad + 1) - policy.pad;
        int64_t ox = rng.uniform_int(2 * policy.pad + 1) - policy.pad;
        if (oy != 0 || ox != 0) {
            std::vector<double> src(static_cast<size_t>(h * w));
            for (int64_t ch = 0; ch < c; ++ch) {
                double* plane = img + ch * h * w;
                std::memcpy(src.data(), plane, static_cast<size_t>(h * w) * sizeof(double));
                for (int64_t y = 0; y < h; ++y)
                    for (int64_t x = 0; x < w; ++x) {
                        int64_t sy = y + oy, sx = x + ox;
                        plane[y * w + x] = (sy >= 0 && sy < h && sx >= 0 && sx < w)
                                               ? src[static_cast<size_t>(sy * w + sx)]
                                               : 0.0;
                    }
            }
        }
    }
    if (policy.hflip) {
        double u = rng.uniform();
        if (u < policy.hflip_p) {
            for (int64_t ch = 0; ch < c; ++ch) {
                double* plane = img + ch * h * w;
                for (int64_t y = 0; y < h; ++y)
                    for (int64_t x = 0; x < w / 2; ++x)
                        std::swap(plane[y * w + x], plane[y * w + (w - 1 - x)]);
            }
        }
    }
    if (policy.normalize) {
        for (int64_t ch = 0; ch < c; ++ch) {
            double m = mean[static_cast<size_t>(ch)];
            double s = stddev[static_cast<size_t>(ch)];
            double* plane = img + ch * h * w;
            for (int64_t e = 0; e < h * w; ++e) plane[e] = (plane[e] - m) / s;
        }
    }
}

std::pair<Tensor, std::vector<int64_t>> make_batch(const Dataset& ds,
                                                   const std::vector<int64_t>& indices,
                                                   const AugmentPolicy& policy,
                                                   const std::vector<double>& mean,
                                                   const std::vector<double>& stddev,
                                                   uint64_t run_seed, int64_t epoch) {
    int64_t b = static_cast<int64_t>(indices.size());
    int64_t dim = ds.sample_dim();
    std::vector<double> buf(static_cast<size_t>(b * dim));
    std::vector<int64_t> labels(static_cast<size_t>(b));
    for (int64_t i = 0; i < b; ++i) {
        int64_t idx = indices[static_cast<size_t>(i)];
        ds.copy_sample(idx, buf.data() + i * dim);
        labels[static_cast<size_t>(i)] = ds.labels[static_cast<size_t>(idx)];
        Rng rng(mix_seed(run_seed, static_cast<uint64_t>(epoch), static_cast<uint64_t>(idx)));
        augment_sample(buf.data() + i * dim, ds.channels, ds.height, ds.width, policy, mean,
                       stddev, rng);
    }
    return {Tensor::from_data({b, ds.channels, ds.height, ds.width}, std::move(buf)),
            std::move(labels)};
}

}  // namespace bd::data
