#include <cmath>

#include "bd/data.hpp"
#include "bd/errors.hpp"

namespace bd::data {

Dataset synth_blobs(int64_t classes, int64_t per_class, int64_t channels, int64_t h, int64_t w,
                    uint64_t seed, double sigma, uint64_t noise_salt) {
    if (classes < 2) throw ContractError("synth_blobs: need at least 2 classes");
    if (per_class < 1) throw ContractError("synth_blobs: need at least 1 sample per class");
    int64_t dim = channels * h * w;

    // per-class smooth mean pattern: a few gaussian bumps on the grid
    std::vector<std::vector<double>> means;
    for (int64_t cl = 0; cl < classes; ++cl) {
        Rng rng(mix_seed(seed, 0x6d65616eULL, static_cast<uint64_t>(cl)));
        std::vector<double> m(static_cast<size_t>(dim), 0.0);
        for (int bump = 0; bump < 3; ++bump) {
            double cy = rng.uniform() * static_cast<double>(h);
            double cx = rng.uniform() * static_cast<double>(w);
            double rad = 1.5 + rng.uniform() * 0.25 * static_cast<double>(std::min(h, w));
            double amp = 0.4 + 0.6 * rng.uniform();
            for (int64_t ch = 0; ch < channels; ++ch)
                for (int64_t y = 0; y < h; ++y)
                    for (int64_t x = 0; x < w; ++x) {
                        double dy = (static_cast<double>(y) - cy) / rad;
                        double dx = (static_cast<double>(x) - cx) / rad;
                        m[static_cast<size_t>((ch * h + y) * w + x)] +=
                            amp * std::exp(-(dx * dx + dy * dy));
                    }
        }
        means.push_back(std::move(m));
    }

    Dataset ds;
    ds.count = classes * per_class;
    ds.channels = channels;
    ds.height = h;
    ds.width = w;
    ds.class_count = classes;
    ds.pixels_f64.resize(static_cast<size_t>(ds.count * dim));
    ds.labels.resize(static_cast<size_t>(ds.count));
    Rng noise(mix_seed(seed, 0x6e6f697365ULL, noise_salt));
    int64_t i = 0;
    for (int64_t cl = 0; cl < classes; ++cl)
        for (int64_t j = 0; j < per_class; ++j, ++i) {
            ds.labels[static_cast<size_t>(i)] = cl;
            double* out = ds.pixels_f64.data() + i * dim;
            const double* m = means[static_cast<size_t>(cl)].data();
            for (int64_t e = 0; e < dim; ++e)
                out[e] = m[e] + (sigma > 0.0 ? sigma * noise.normal() : 0.0);
        }
    return ds;
}

namespace {

// Seven-segment layout on a unit square: (y0,x0)-(y1,x1) per segment.
//   0: top, 1: top-left, 2: top-right, 3: middle, 4: bottom-left,
//   5: bottom-right, 6: bottom
constexpr double kSeg[7][4] = {
    {0.10, 0.20, 0.10, 0.80}, {0.10, 0.20, 0.50, 0.20}, {0.10, 0.80, 0.50, 0.80},
    {0.50, 0.20, 0.50, 0.80}, {0.50, 0.20, 0.90, 0.20}, {0.50, 0.80, 0.90, 0.80},
    {0.90, 0.20, 0.90, 0.80}};

constexpr int kDigitSegs[10] = {
    0b1110111,  // 0: all but middle
    0b0100100,  // 1
    0b1011101,  // 2
    0b1101101,  // 3
    0b0101110,  // 4
    0b1101011,  // 5
    0b1111011,  // 6
    0b0100101,  // 7
    0b1111111,  // 8
    0b1101111,  // 9
};

double point_segment_dist(double py, double px, const double s[4]) {
    double vy = s[2] - s[0], vx = s[3] - s[1];
    double wy = py - s[0], wx = px - s[1];
    double len2 = vy * vy + vx * vx;
    double t = len2 > 0.0 ? (wy * vy + wx * vx) / len2 : 0.0;
    t = std::min(1.0, std::max(0.0, t));
    double dy = py - (s[0] + t * vy), dx = px - (s[1] + t * vx);
    return std::sqrt(dy * dy + dx * dx);
}

}  // namespace

Dataset synth_digits(int64_t count, uint64_t seed) {
    constexpr int64_t kH = 28, kW = 28;
    Dataset ds;
    ds.count = count;
    ds.channels = 1;
    ds.height = kH;
    ds.width = kW;
    ds.class_count = 10;
    ds.pixels_u8.resize(static_cast<size_t>(count * kH * kW));
    ds.labels.resize(static_cast<size_t>(count));

    constexpr double kStroke = 0.065;  // half-width of a segment, unit square
    for (int64_t i = 0; i < count; ++i) {
        Rng rng(mix_seed(seed, 0x64696769ULL, static_cast<uint64_t>(i)));
        int64_t digit = rng.uniform_int(10);
        ds.labels[static_cast<size_t>(i)] = digit;
        int segs = kDigitSegs[digit];
        double dy = (rng.uniform() - 0.5) * 0.28;  // up to ~4 px shift
        double dx = (rng.uniform() - 0.5) * 0.28;
        double scale = 0.85 + 0.3 * rng.uniform();
        double intensity = 0.72 + 0.28 * rng.uniform();
        uint8_t* img = ds.pixels_u8.data() + i * kH * kW;
        for (int64_t y = 0; y < kH; ++y)
            for (int64_t x = 0; x < kW; ++x) {
                double uy = ((static_cast<double>(y) + 0.5) / kH - 0.5 - dy) / scale + 0.5;
                double ux = ((static_cast<double>(x) + 0.5) / kW - 0.5 - dx) / scale + 0.5;
                double best = 1e9;
                for (int s = 0; s < 7; ++s)
                    if (segs & (1 << (6 - s))) best = std::min(best, point_segment_dist(uy, ux, kSeg[s]));
                double v = intensity / (1.0 + std::exp((best - kStroke) / 0.012));
                v += 0.16 * rng.normal();
                v = std::min(1.0, std::max(0.0, v));
                img[y * kW + x] = static_cast<uint8_t>(std::lround(v * 255.0));
            }
    }
    return ds;
}

}  // namespace bd::data
