#include <benchmark/benchmark.h>

#include "bd/gemm.hpp"
#include "bd/losses.hpp"
#include "bd/ops.hpp"
#include "bd/rng.hpp"
#include "bd/tape.hpp"

using namespace bd;

namespace {

Tensor rnd(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
    int64_t n = shape_numel(shape);
    std::vector<double> v(static_cast<size_t>(n));
    for (double& x : v) x = lo + (hi - lo) * rng.uniform();
    return Tensor::from_data(std::move(shape), std::move(v));
}

void BM_Gemm(benchmark::State& state) {
    int64_t m = state.range(0), k = state.range(1), n = state.range(2);
    Rng rng(1);
    std::vector<double> a(static_cast<size_t>(m * k)), b(static_cast<size_t>(k * n)),
        c(static_cast<size_t>(m * n));
    for (double& x : a) x = rng.uniform();
    for (double& x : b) x = rng.uniform();
    for (auto _ : state) {
        gemm_nn(m, n, k, a.data(), k, b.data(), n, c.data(), n);
        benchmark::DoNotOptimize(c.data());
    }
    state.counters["GFLOP/s"] = benchmark::Counter(
        2.0 * static_cast<double>(m * k * n) * static_cast<double>(state.iterations()) / 1e9,
        benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Gemm)->Args({64, 794, 256})->Args({16, 36, 3136})->Args({256, 256, 256});

void BM_Conv2dForward(benchmark::State& state) {
    Rng rng(2);
    Tensor x = rnd(rng, {64, 8, 14, 14});
    Tensor w = rnd(rng, {16, 8, 3, 3});
    for (auto _ : state) {
        Tensor y = conv2d(x, w, nullptr, 2, 1);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_Conv2dForward);

void BM_Conv2dBackward(benchmark::State& state) {
    Rng rng(3);
    Tensor x = Tensor::param({64, 8, 14, 14}, rnd(rng, {64, 8, 14, 14}).vec());
    Tensor w = Tensor::param({16, 8, 3, 3}, rnd(rng, {16, 8, 3, 3}).vec());
    for (auto _ : state) {
        Tape tape;
        TapeScope scope(tape);
        tape.backward(sum_all(conv2d(x, w, nullptr, 2, 1)));
        x.zero_grad();
        w.zero_grad();
    }
}
BENCHMARK(BM_Conv2dBackward);

void BM_SimilarityLoss(benchmark::State& state) {
    Rng rng(4);
    std::vector<Tensor> feats = {rnd(rng, {64, 16, 7, 7}), rnd(rng, {64, 16, 7, 7}),
                                 rnd(rng, {64, 16, 7, 7})};
    for (auto _ : state) {
        Tensor l = loss_l2_simmaps(feats);
        benchmark::DoNotOptimize(l.data());
    }
}
BENCHMARK(BM_SimilarityLoss);

void BM_PairwiseKl(benchmark::State& state) {
    Rng rng(5);
    std::vector<Tensor> logits = {rnd(rng, {64, 10}), rnd(rng, {64, 10}), rnd(rng, {64, 10})};
    for (auto _ : state) {
        Tensor l = loss_kl_pairwise(logits, 3.0);
        benchmark::DoNotOptimize(l.data());
    }
}
BENCHMARK(BM_PairwiseKl);

}  // namespace
