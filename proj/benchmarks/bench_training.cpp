#include <benchmark/benchmark.h>

#include "bd/train.hpp"

using namespace bd;

namespace {

struct StepFixture {
    nn::BranchedModel model;
    nn::Discriminator disc;
    SgdOptimizer opt_m{0.05, 0.9, 5e-4}, opt_d{0.05, 0.9, 5e-4};
    Tensor images;
    std::vector<int64_t> labels;
    Rng rng{9};

    static StepFixture make(int64_t batch, int64_t hw, int64_t disc_hidden) {
        Rng init(7);
        StepFixture f;
        nn::ArchSpec arch = nn::make_arch("tiny-resnet", 10, 1, hw, hw);
        f.model = nn::BranchedModel::build(arch, 2, init);
        nn::DiscriminatorSpec dspec;
        dspec.classes = 10;
        dspec.cond_channels = 1;
        dspec.cond_h = dspec.cond_w = hw;
        dspec.hidden = disc_hidden;
        dspec.layers = 3;
        f.disc = nn::Discriminator::build(dspec, init);
        std::vector<double> img(static_cast<size_t>(batch * hw * hw));
        for (double& v : img) v = init.uniform();
        f.images = Tensor::from_data({batch, 1, hw, hw}, std::move(img));
        for (int64_t i = 0; i < batch; ++i) f.labels.push_back(i % 10);
        return f;
    }
};

void BM_TrainStepFull(benchmark::State& state) {
    StepFixture f = StepFixture::make(64, 28, 256);
    LossWeights w;
    Tape tape;
    for (auto _ : state) {
        StepMetrics m = train_step(f.model, f.disc, f.opt_m, f.opt_d, tape, f.images, f.labels, w,
                                   1, f.rng);
        benchmark::DoNotOptimize(m);
    }
    state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_TrainStepFull)->Unit(benchmark::kMillisecond);

void BM_TrainStepCeOnly(benchmark::State& state) {
    StepFixture f = StepFixture::make(64, 28, 256);
    LossWeights w;
    w.alpha = 0.0;
    w.beta = 0.0;
    w.gamma = 0.0;
    Tape tape;
    for (auto _ : state) {
        StepMetrics m = train_step(f.model, f.disc, f.opt_m, f.opt_d, tape, f.images, f.labels, w,
                                   1, f.rng);
        benchmark::DoNotOptimize(m);
    }
    state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_TrainStepCeOnly)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
