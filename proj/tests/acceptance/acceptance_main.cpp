// Acceptance suite: every release-blocking property, one pass/fail line per
// criterion. Runs standalone (no test framework) so the output reads as a
// checklist; exits nonzero if anything fails.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "bd/cli.hpp"
#include "bd/oracle/oracle.hpp"
#include "bd/train.hpp"

using namespace bd;

namespace {

int g_failures = 0;
std::vector<std::string> g_lines;

void report(int criterion, const char* title, bool pass, const std::string& detail) {
    char line[512];
    std::snprintf(line, sizeof line, "[%s] criterion %d: %s%s%s", pass ? "PASS" : "FAIL",
                  criterion, title, detail.empty() ? "" : " -- ", detail.c_str());
    std::puts(line);
    std::fflush(stdout);
    g_lines.push_back(line);
    if (!pass) ++g_failures;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string work_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / "bd_acceptance" / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

Tensor rnd_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
    int64_t n = shape_numel(shape);
    std::vector<double> v(static_cast<size_t>(n));
    for (double& x : v) x = lo + (hi - lo) * rng.uniform();
    return Tensor::from_data(std::move(shape), std::move(v));
}

std::vector<std::vector<double>> raw(const std::vector<Tensor>& ts) {
    std::vector<std::vector<double>> out;
    for (const Tensor& t : ts) out.push_back(t.vec());
    return out;
}

nn::Discriminator random_disc(Rng& rng, int64_t classes, int64_t ch, int64_t hw,
                              int64_t hidden = 14, int64_t layers = 2) {
    nn::DiscriminatorSpec spec;
    spec.classes = classes;
    spec.cond_channels = ch;
    spec.cond_h = spec.cond_w = hw;
    spec.hidden = hidden;
    spec.layers = layers;
    nn::Discriminator d = nn::Discriminator::build(spec, rng);
    // the default zero-started head would make score-surface checks vacuous
    for (nn::Param p : d.params())
        if (p.name == "d.w_out" || p.name == "d.b_out")
            for (int64_t i = 0; i < p.tensor->numel(); ++i)
                p.tensor->data_mut()[i] = rng.normal() * 0.3;
    return d;
}

// ---------------------------------------------------------------- criterion 1

void criterion_1() {
    Timer timer;
    double worst = 0.0;
    std::string worst_eq = "-";
    auto track = [&](const char* eq, double err) {
        if (err > worst) {
            worst = err;
            worst_eq = eq;
        }
    };
    Rng rng(0xAC01);
    for (int trial = 0; trial < 30; ++trial) {
        int64_t k1 = 2 + rng.uniform_int(3);         // K+1 in {2,3,4}
        int64_t b = 1 + rng.uniform_int(8);          // B <= 8
        int64_t c = 2 + rng.uniform_int(9);          // classes <= 10
        int64_t hw = 1 + rng.uniform_int(4);         // spatial N = hw^2 <= 16
        int64_t fc = 1 + rng.uniform_int(4);         // feature channels
        double t = 0.5 + 4.0 * rng.uniform();
        double mu = rng.uniform();

        std::vector<Tensor> logits, feats;
        std::vector<int64_t> labels;
        for (int64_t k = 0; k < k1; ++k) {
            logits.push_back(rnd_tensor(rng, {b, c}, -3.0, 3.0));
            feats.push_back(rnd_tensor(rng, {b, fc, hw, hw}));
        }
        for (int64_t i = 0; i < b; ++i) labels.push_back(rng.uniform_int(c));

        // softmax and its softened variant
        {
            Tensor p = softmax_probs(logits[0]);
            auto ref = oracle::softmax(logits[0].vec(), b, c);
            track("softmax", oracle::max_relative_error(p.vec(), ref));
            Tensor q = softened_probs(logits[0], t);
            auto qr = oracle::softened(logits[0].vec(), b, c, t);
            track("softened", oracle::max_relative_error(q.vec(), qr));
        }
        // summed cross entropy
        track("ce", oracle::relative_error(loss_ce(logits, labels).item(),
                                            oracle::ce_sum(raw(logits), b, c, labels)));
        // pairwise KL
        track("kl", oracle::relative_error(loss_kl_pairwise(logits, t).item(),
                                            oracle::kl_pairwise(raw(logits), b, c, t)));
        // cosine similarity map
        {
            Tensor s = similarity_map(feats[0]);
            auto ref = oracle::similarity(feats[0].vec(), b, fc, hw, hw);
            track("simmap", oracle::max_relative_error(s.vec(), ref));
        }
        // similarity-map L2 distillation
        {
            std::vector<oracle::FeatureDims> dims(static_cast<size_t>(k1), {b, fc, hw, hw});
            track("l2", oracle::relative_error(loss_l2_simmaps(feats).item(),
                                                oracle::l2_simmaps(raw(feats), dims)));
        }
        // critic real mixture
        std::vector<Tensor> probs;
        for (const Tensor& a : logits) probs.push_back(softmax_probs(a));
        Tensor y = onehot(labels, c);
        Tensor r = real_mix(probs, y, mu);
        track("mix", oracle::max_relative_error(
                         r.vec(), oracle::real_mix(raw(probs), y.vec(), mu, b, c)));
        // critic and generator adversarial losses
        {
            nn::Discriminator d = random_disc(rng, c, 1, 4);
            Tensor img = rnd_tensor(rng, {b, 1, 4, 4}, 0.0, 1.0);
            std::vector<double> eps;
            for (int64_t i = 0; i < b; ++i) eps.push_back(rng.uniform());
            double lgp = 10.0 * rng.uniform();
            Tensor dl = loss_discriminator_wgangp(d, probs, r, img, lgp, eps);
            auto snap = d.snapshot();
            track("critic", oracle::relative_error(
                             dl.item(), oracle::disc_loss_wgangp(snap, raw(probs), r.vec(),
                                                                 img.vec(), lgp, eps, b)));
            Tensor gl = loss_generator_w(d, probs, img);
            track("gen", oracle::relative_error(
                             gl.item(), oracle::gen_loss_w(snap, raw(probs), img.vec(), b)));
        }
        // teacher-student total
        {
            BranchOutputs teacher, student;
            for (int64_t k = 0; k < k1; ++k) {
                teacher.logits.push_back(rnd_tensor(rng, {b, c}, -3.0, 3.0));
                teacher.features.push_back(rnd_tensor(rng, {b, fc, hw, hw}));
                student.logits.push_back(logits[static_cast<size_t>(k)]);
                student.features.push_back(feats[static_cast<size_t>(k)]);
            }
            LossWeights wt;
            wt.temperature = t;
            wt.lambda1 = 0.7;
            wt.lambda2 = 0.2;
            wt.lambda3 = 0.4;
            nn::Discriminator d = random_disc(rng, c, 1, 4);
            Tensor img = rnd_tensor(rng, {b, 1, 4, 4}, 0.0, 1.0);
            auto snap = d.snapshot();
            std::vector<oracle::FeatureDims> dims(static_cast<size_t>(k1), {b, fc, hw, hw});
            double got = loss_kd_total(teacher, student, wt, &d, img).item();
            double ref = oracle::kd_total(raw(teacher.logits), raw(student.logits), b, c,
                                          raw(teacher.features), raw(student.features), dims, wt,
                                          &snap, img.vec(), true);
            track("kd", oracle::relative_error(got, ref));
        }
    }
    char detail[160];
    std::snprintf(detail, sizeof detail, "30 instances per loss, worst rel err %.2e (%s), %.1fs",
                  worst, worst_eq.c_str(), timer.seconds());
    report(1, "every loss matches its naive-loop oracle at 1e-9", worst <= 1e-9 && timer.seconds() < 10.0,
           detail);
}

// ---------------------------------------------------------------- criterion 2

void criterion_2() {
    Timer timer;
    Rng rng(0xAC02);
    nn::ArchSpec arch = nn::make_arch("tiny-resnet", 4, 2, 8, 8);
    nn::BranchedModel model = nn::BranchedModel::build(arch, 2, rng);
    nn::Discriminator disc = random_disc(rng, 4, 2, 8, 12, 2);
    Tensor images = rnd_tensor(rng, {4, 2, 8, 8}, 0.0, 1.0);
    std::vector<int64_t> labels = {0, 1, 2, 3};
    LossWeights wt;  // ledger defaults: all four terms live

    // The similarity term stops gradients at the deeper map of each pair, so
    // the finite-difference reference must hold those maps at their unperturbed
    // values: fd of the raw value would differentiate through the detach.
    std::vector<Tensor> frozen_maps;
    {
        NoGradGuard ng;
        BranchOutputs out = model.forward_all(images);
        for (const Tensor& f : out.features) frozen_maps.push_back(similarity_map(f));
    }
    auto l2_frozen_deep = [&](const BranchOutputs& out) {
        int64_t k1 = out.classifiers();
        double total = 0.0;
        for (int64_t i = 0; i < k1 - 1; ++i) {
            double inner = 0.0;
            for (int64_t j = i + 1; j < k1; ++j)
                inner += mean_all(square(sub(similarity_map(out.features[static_cast<size_t>(i)]),
                                             frozen_maps[static_cast<size_t>(j)])))
                             .item();
            total += inner / static_cast<double>(k1 - 1 - i);
        }
        return total;
    };
    auto loss_value = [&]() {
        NoGradGuard ng;
        BranchOutputs out = model.forward_all(images);
        Tensor ce = loss_ce(out.logits, labels);
        Tensor kl = loss_kl_pairwise(out.logits, wt.temperature, wt.kl_detach_target);
        std::vector<Tensor> probs;
        for (const Tensor& a : out.logits) probs.push_back(softmax_probs(a));
        Tensor w = loss_generator_w(disc, probs, images);
        return (1.0 - wt.alpha) * ce.item() + wt.alpha * kl.item() +
               wt.beta * l2_frozen_deep(out) + wt.gamma * w.item();
    };

    Tape tape;
    {
        TapeScope scope(tape);
        BranchOutputs out = model.forward_all(images);
        Tensor ce = loss_ce(out.logits, labels);
        Tensor kl = loss_kl_pairwise(out.logits, wt.temperature, wt.kl_detach_target);
        Tensor l2 = loss_l2_simmaps(out.features);
        std::vector<Tensor> probs;
        for (const Tensor& a : out.logits) probs.push_back(softmax_probs(a));
        Tensor w = loss_generator_w(disc, probs, images);
        tape.backward(loss_sd_total(ce, kl, l2, w, wt));
    }

    auto params = model.params();
    double h = 1e-5;
    double worst = 0.0;
    int checked = 0, skipped_zero = 0;
    Rng pick(0xAC02F);
    for (int n = 0; n < 50; ++n) {
        size_t pi = static_cast<size_t>(pick.uniform_int(static_cast<int64_t>(params.size())));
        Tensor& t = *params[pi].tensor;
        int64_t ci = pick.uniform_int(t.numel());
        double an = t.has_grad() ? t.grad()[static_cast<size_t>(ci)] : 0.0;
        double keep = t.data()[ci];
        t.data_mut()[ci] = keep + h;
        double fp = loss_value();
        t.data_mut()[ci] = keep - h;
        double fm = loss_value();
        t.data_mut()[ci] = keep;
        double fd = (fp - fm) / (2.0 * h);
        if (std::fabs(an) < 1e-8 && std::fabs(fd) < 1e-6) {
            ++skipped_zero;  // both numerically zero
            continue;
        }
        worst = std::max(worst, oracle::relative_error(an, fd));
        ++checked;
    }
    bool pass_model = worst <= 1e-4;

    // discriminator_input_grad against fd of the forward score
    double worst_d = 0.0;
    {
        nn::Discriminator d = random_disc(rng, 5, 1, 6, 10, 3);
        Tensor img = rnd_tensor(rng, {3, 1, 6, 6}, 0.0, 1.0);
        Tensor p_hat = softmax_probs(rnd_tensor(rng, {3, 5}, -1.5, 1.5));
        Tensor g = d.input_grad(p_hat, d.make_cond(img));
        for (int64_t bi = 0; bi < 3; ++bi) {
            std::vector<double> row(p_hat.data() + bi * 5, p_hat.data() + (bi + 1) * 5);
            std::vector<double> img_row(img.data() + bi * 36, img.data() + (bi + 1) * 36);
            auto f = [&](const std::vector<double>& v) {
                NoGradGuard ng;
                return d.score_direct(Tensor::from_data({1, 5}, v),
                                      Tensor::from_data({1, 1, 6, 6}, img_row))
                    .item();
            };
            auto fd = oracle::fd_grad(f, row);
            for (int64_t c = 0; c < 5; ++c)
                worst_d = std::max(worst_d,
                                   oracle::relative_error(g.data()[bi * 5 + c],
                                                          fd[static_cast<size_t>(c)]));
        }
    }
    bool pass_disc = worst_d <= 1e-6;

    char detail[200];
    std::snprintf(detail, sizeof detail,
                  "model grad worst rel %.2e over %d coords (%d ~zero skipped); input-grad worst "
                  "rel %.2e; %.1fs",
                  worst, checked, skipped_zero, worst_d, timer.seconds());
    report(2, "backward() and discriminator_input_grad match finite differences",
           pass_model && pass_disc && timer.seconds() < 60.0, detail);
}

// ---------------------------------------------------------------- criterion 3

void criterion_3() {
    Rng rng(0xAC03);
    std::vector<Tensor> feats;
    for (int k = 0; k < 3; ++k) {
        int64_t n = shape_numel({2, 3, 3, 3});
        std::vector<double> v(static_cast<size_t>(n));
        for (double& x : v) x = -1.0 + 2.0 * rng.uniform();
        feats.push_back(Tensor::param({2, 3, 3, 3}, std::move(v)));
    }
    Tape tape;
    TapeScope scope(tape);
    tape.backward(loss_l2_simmaps(feats));

    bool deepest_zero = !feats[2].has_grad();
    if (feats[2].has_grad())
        for (double v : feats[2].grad()) deepest_zero = deepest_zero && v == 0.0;
    bool shallow_nonzero = false;
    if (feats[0].has_grad())
        for (double v : feats[0].grad()) shallow_nonzero = shallow_nonzero || v != 0.0;
    report(3, "similarity-map loss backpropagates only toward shallower classifiers",
           deepest_zero && shallow_nonzero,
           deepest_zero ? "deepest grad identically zero, shallowest nonzero"
                        : "deepest classifier received gradient");
}

// ---------------------------------------------------------------- criterion 4

void criterion_4() {
    Rng rng(0xAC04);
    int64_t b = 4, c = 4;
    Tensor img = rnd_tensor(rng, {b, 2, 6, 6}, 0.0, 1.0);
    std::vector<int64_t> labels = {0, 1, 2, 3};

    // constant critic degenerate values
    nn::Discriminator dc = random_disc(rng, c, 2, 6);
    for (nn::Param p : dc.params())
        std::fill(p.tensor->data_mut(), p.tensor->data_mut() + p.tensor->numel(), 0.0);
    for (nn::Param p : dc.params())
        if (p.name == "d.b_out") p.tensor->data_mut()[0] = 0.375;
    std::vector<Tensor> probs;
    for (int k = 0; k < 3; ++k)
        probs.push_back(softmax_probs(rnd_tensor(rng, {b, c})).detach());
    Tensor r = real_mix(probs, onehot(labels, c), 0.5);
    std::vector<double> eps;
    for (int64_t i = 0; i < b; ++i) eps.push_back(rng.uniform());
    double lambda_gp = 10.0;
    bool exact_values;
    {
        Tape tape;
        TapeScope scope(tape);
        double dl = loss_discriminator_wgangp(dc, probs, r, img, lambda_gp, eps).item();
        double gl = loss_generator_w(dc, probs, img).item();
        exact_values = dl == lambda_gp && gl == -0.375;
    }

    // a critic step leaves generator parameters bitwise unchanged, and the
    // generator step leaves the critic bitwise unchanged
    nn::ArchSpec arch = nn::make_arch("tiny-resnet", c, 2, 6, 6);
    nn::BranchedModel model = nn::BranchedModel::build(arch, 2, rng);
    nn::Discriminator disc = random_disc(rng, c, 2, 6);
    SgdOptimizer opt_m(0.05, 0.9, 5e-4), opt_d(0.05, 0.9, 5e-4);
    LossWeights wt;

    auto bytes_of = [](std::vector<nn::Param> params) {
        std::vector<double> out;
        for (const nn::Param& p : params)
            out.insert(out.end(), p.tensor->vec().begin(), p.tensor->vec().end());
        return out;
    };

    Tape tape;
    TapeScope scope(tape);
    BranchOutputs out = model.forward_all(img);
    std::vector<Tensor> live;
    for (const Tensor& a : out.logits) live.push_back(softmax_probs(a));
    std::vector<Tensor> fakes;
    for (const Tensor& p : live) fakes.push_back(p.detach());
    Tensor rr = real_mix(fakes, onehot(labels, c), wt.mu_r);

    auto gen_before = bytes_of(model.params());
    Tensor d_loss = loss_discriminator_wgangp(disc, fakes, rr, img, wt.lambda_gp, eps);
    tape.backward(d_loss);
    opt_d.step(disc.params());
    bool gen_untouched = bytes_of(model.params()) == gen_before;

    auto disc_after_critic = bytes_of(disc.params());
    Tensor ce = loss_ce(out.logits, labels);
    Tensor kl = loss_kl_pairwise(out.logits, wt.temperature, false);
    Tensor l2 = loss_l2_simmaps(out.features);
    Tensor w = loss_generator_w(disc, live, img);
    tape.backward(loss_sd_total(ce, kl, l2, w, wt));
    opt_m.step(model.params());
    bool disc_untouched = bytes_of(disc.params()) == disc_after_critic;
    bool gen_moved = bytes_of(model.params()) != gen_before;

    char detail[200];
    std::snprintf(detail, sizeof detail,
                  "constant critic: loss_d == lambda_gp and loss_w == -c %s; parameter isolation %s",
                  exact_values ? "exactly" : "FAILED", gen_untouched && disc_untouched ? "holds" : "FAILED");
    report(4, "WGAN-GP degenerate values and update isolation",
           exact_values && gen_untouched && disc_untouched && gen_moved, detail);
}

// ---------------------------------------------------------------- criterion 5

void criterion_5() {
    bool ok = true;
    std::ostringstream detail;
    struct Case {
        const char* arch;
        int64_t classes, ch, hw, k;
    };
    for (const Case& c : {Case{"tiny-resnet", 10, 1, 28, 2}, Case{"resnet18", 100, 3, 32, 3}}) {
        Rng rng(0xAC05);
        nn::ArchSpec arch = nn::make_arch(c.arch, c.classes, c.ch, c.hw, c.hw);
        nn::BranchedModel branched = nn::BranchedModel::build(arch, c.k, rng);
        Rng rng2(0xAC05F);
        nn::BranchedModel baseline = nn::BranchedModel::build(arch, 0, rng2);
        nn::BranchedModel primary = branched.extract_single(c.k + 1);
        nn::CountReport pr = nn::count_params_flops(primary);
        nn::CountReport br = nn::count_params_flops(baseline);
        nn::CountReport full = nn::count_params_flops(branched);
        bool match = pr.params == br.params && pr.flops == br.flops &&
                     full.params > pr.params && full.flops > pr.flops;
        ok = ok && match;
        detail << c.arch << ": train " << full.params << "p/" << full.flops << "f, test "
               << pr.params << "p/" << pr.flops << "f (baseline " << br.params << "p/" << br.flops
               << "f); ";
    }
    report(5, "extracted primary classifier matches the unbranched baseline exactly", ok,
           detail.str());
}

// ---------------------------------------------------------------- criterion 6

data::SplitDataset criterion6_dataset() {
    // Real MNIST when available; otherwise a deterministic MNIST-format stand-in
    // written to disk so load_idx still parses genuine IDX files.
    std::string root;
    if (const char* env = std::getenv("BRANCH_DISTILL_DATA")) root = env;
    data::SplitDataset split;
    bool have_real = false;
    if (!root.empty()) {
        try {
            split = data::load_dataset("mnist", root, 10);
            have_real = true;
        } catch (const Error&) {
            have_real = false;
        }
    }
    if (!have_real) {
        std::string dir = work_dir("mnist-standin");
        data::Dataset train = data::synth_digits(10000, 0xD16175ULL);
        data::Dataset test = data::synth_digits(10000, 0xD16173E57ULL);
        data::write_idx(train, dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
        data::write_idx(test, dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
        split = data::load_dataset("mnist", dir, 10);
        split.id = "mnist";
    }
    // first 10k of train, full test split
    if (split.train.count > 10000) {
        split.train.count = 10000;
        split.train.pixels_u8.resize(static_cast<size_t>(10000 * split.train.sample_dim()));
        split.train.labels.resize(10000);
        split.train.compute_norm_stats();
        split.test.mean = split.train.mean;
        split.test.stddev = split.train.stddev;
    }
    return split;
}

void criterion_6() {
    Timer timer;
    data::SplitDataset split = criterion6_dataset();

    // Six independent runs over an immutable dataset: each owns its tape and
    // rng, so they spread across whatever cores the machine has.
    struct Job {
        uint64_t seed;
        bool full;
        RunReport report;
        std::string error;
    };
    std::vector<Job> jobs;
    for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        jobs.push_back({seed, true, {}, {}});
        jobs.push_back({seed, false, {}, {}});
    }
    std::mutex print_mu;
    auto run_job = [&](Job& job) {
        TrainConfig cfg;
        cfg.arch = "tiny-resnet";
        cfg.branches = 2;
        cfg.classes = 10;
        cfg.dataset = "mnist";
        cfg.epochs = 15;
        cfg.batch_size = 64;
        cfg.seed = job.seed;
        cfg.seed_set = true;
        if (!job.full) {
            cfg.weights.alpha = 0.0;
            cfg.weights.beta = 0.0;
            cfg.weights.gamma = 0.0;
        }
        cfg.checkpoint_dir = work_dir(std::string("c6-") + (job.full ? "full" : "ce") + "-s" +
                                      std::to_string(job.seed));
        try {
            job.report = train_run_on(cfg, split);
        } catch (const std::exception& e) {
            job.error = e.what();
            return;
        }
        std::lock_guard<std::mutex> lock(print_mu);
        std::printf("  c6 %s seed %llu: deepest best %.4f, ensemble best %.4f (%.0fs)\n",
                    job.full ? "full" : "ce", static_cast<unsigned long long>(job.seed),
                    job.report.best_acc.back(), job.report.best_ensemble, timer.seconds());
        std::fflush(stdout);
    };
    unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                                       static_cast<unsigned>(jobs.size())));
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t)
        pool.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1))
                run_job(jobs[i]);
        });
    for (std::thread& t : pool) t.join();
    for (const Job& job : jobs)
        if (!job.error.empty()) {
            report(6, "desk-scale training effect on the 10k-digit subset", false,
                   "run failed: " + job.error);
            return;
        }

    double full_deep = 0.0, ce_deep = 0.0, full_ens = 0.0, full_best_single = 0.0;
    for (const Job& job : jobs) {
        if (job.full) {
            full_deep += job.report.best_acc.back() / 3.0;
            full_ens += job.report.best_ensemble / 3.0;
            double best_single = 0.0;
            for (double a : job.report.best_acc) best_single = std::max(best_single, a);
            full_best_single += best_single / 3.0;
        } else {
            ce_deep += job.report.best_acc.back() / 3.0;
        }
    }
    bool deep_ok = full_deep >= ce_deep - 0.001;       // 0.1 accuracy points
    bool ens_ok = full_ens >= full_best_single - 0.003;  // 0.3 accuracy points
    char detail[256];
    std::snprintf(detail, sizeof detail,
                  "deepest: full %.4f vs ce-only %.4f (need >= -0.001); ensemble %.4f vs best "
                  "single %.4f (need >= -0.003); %.0fs total",
                  full_deep, ce_deep, full_ens, full_best_single, timer.seconds());
    report(6, "desk-scale training effect on the 10k-digit subset", deep_ok && ens_ok, detail);
}

// ---------------------------------------------------------------- criterion 7

void criterion_7() {
    Timer timer;
    TrainConfig cfg;
    cfg.arch = "tiny-resnet";
    cfg.branches = 2;
    cfg.classes = 4;
    cfg.dataset = "synth";
    cfg.epochs = 4;
    cfg.batch_size = 64;
    cfg.seed = 1;
    cfg.seed_set = true;
    cfg.checkpoint_dir = work_dir("c7-ablate");
    std::string out_csv = cfg.checkpoint_dir + "/ablation.csv";
    int rc = cli::cmd_ablate(cfg, 2, out_csv);

    std::string csv = slurp(out_csv);
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);  // header
    int rows = 0;
    bool all_ok = true;
    double max_w = 0.0, max_d = 0.0;
    while (std::getline(is, line)) {
        ++rows;
        // rung,seed,acc_c1..c3,acc_ensemble,max_abs_loss_w,max_abs_loss_d,all_finite
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        double w = std::stod(cells[cells.size() - 3]);
        double d = std::stod(cells[cells.size() - 2]);
        bool finite = cells.back() == "1";
        max_w = std::max(max_w, w);
        max_d = std::max(max_d, d);
        all_ok = all_ok && finite && w < 1e3 && d < 1e3;
    }
    char detail[200];
    std::snprintf(detail, sizeof detail,
                  "%d rows (4 rungs x 2 seeds), max |loss_w| %.3g, max |loss_d| %.3g, %.0fs", rows,
                  max_w, max_d, timer.seconds());
    report(7, "ablation ladder emits a stable 4-rung CSV", rc == 0 && rows == 8 && all_ok, detail);
}

// ---------------------------------------------------------------- criterion 8

void criterion_8() {
    Timer timer;
    // identical config + seed => identical metrics bytes
    TrainConfig cfg;
    cfg.arch = "tiny-resnet";
    cfg.branches = 2;
    cfg.classes = 4;
    cfg.dataset = "synth";
    cfg.epochs = 2;
    cfg.batch_size = 32;
    cfg.seed = 12;
    cfg.seed_set = true;
    cfg.disc_hidden = 32;
    cfg.checkpoint_dir = work_dir("c8-a");
    RunReport a = train_run(cfg);
    cfg.checkpoint_dir = work_dir("c8-b");
    RunReport b = train_run(cfg);
    bool csv_equal = slurp(a.metrics_csv_path) == slurp(b.metrics_csv_path);

    // checkpoint save -> load -> save byte identity
    TrainState st = load_checkpoint(a.final_checkpoint_path);
    std::string resaved = work_dir("c8-ck") + "/resaved.bdkd";
    save_checkpoint(resaved, st);
    bool ck_equal = slurp(a.final_checkpoint_path) == slurp(resaved);

    // IDX and CIFAR fixtures round-trip exactly
    std::string dir = work_dir("c8-fixtures");
    data::Dataset digits = data::synth_digits(16, 5);
    data::write_idx(digits, dir + "/im-idx3-ubyte", dir + "/lb-idx1-ubyte");
    data::Dataset loaded = data::load_idx(dir + "/im-idx3-ubyte", dir + "/lb-idx1-ubyte");
    bool idx_equal = loaded.pixels_u8 == digits.pixels_u8 && loaded.labels == digits.labels;

    bool cifar_equal;
    {
        std::string path = dir + "/cifar_fixture.bin";
        std::vector<uint8_t> record(3073);
        record[0] = 9;
        for (size_t i = 1; i < record.size(); ++i) record[i] = static_cast<uint8_t>((i * 7) % 256);
        std::ofstream out(path, std::ios::binary);
        out.write(reinterpret_cast<const char*>(record.data()),
                  static_cast<std::streamsize>(record.size()));
        out.close();
        data::Dataset c = data::load_cifar_binary({path}, false);
        cifar_equal = c.count == 1 && c.labels[0] == 9 &&
                      std::equal(c.pixels_u8.begin(), c.pixels_u8.end(), record.begin() + 1);
    }

    char detail[200];
    std::snprintf(detail, sizeof detail, "metrics bytes %s, checkpoint bytes %s, IDX %s, CIFAR %s, %.0fs",
                  csv_equal ? "equal" : "DIFFER", ck_equal ? "equal" : "DIFFER",
                  idx_equal ? "exact" : "DIFFER", cifar_equal ? "exact" : "DIFFER",
                  timer.seconds());
    report(8, "determinism and persistence", csv_equal && ck_equal && idx_equal && cifar_equal,
           detail);
}

// ---------------------------------------------------------------- criterion 9

void criterion_9() {
    Timer timer;
    // (a) zero lambdas reproduce plain training bitwise
    TrainConfig tcfg;
    tcfg.arch = "tiny-resnet";
    tcfg.branches = 2;
    tcfg.classes = 4;
    tcfg.dataset = "synth";
    tcfg.epochs = 1;
    tcfg.batch_size = 32;
    tcfg.seed = 41;
    tcfg.seed_set = true;
    tcfg.disc_hidden = 32;
    tcfg.checkpoint_dir = work_dir("c9-teacher");
    RunReport teacher_run = train_run(tcfg);

    TrainConfig pcfg = tcfg;
    pcfg.seed = 42;
    pcfg.epochs = 2;
    pcfg.checkpoint_dir = work_dir("c9-plain");
    RunReport plain = train_run(pcfg);

    TrainConfig dcfg = pcfg;
    dcfg.weights.lambda1 = dcfg.weights.lambda2 = dcfg.weights.lambda3 = 0.0;
    dcfg.checkpoint_dir = work_dir("c9-distill");
    RunReport distilled = train_teacher_student(teacher_run.final_checkpoint_path, dcfg);
    bool bitwise = slurp(plain.metrics_csv_path) == slurp(distilled.metrics_csv_path);

    // (b) teacher identical to student: KL and L2 of L_KD vanish at step zero
    Rng rng(0xAC09);
    nn::ArchSpec arch = nn::make_arch("tiny-resnet", 4, 1, 16, 16);
    Rng r1(77), r2(77);
    nn::BranchedModel teacher = nn::BranchedModel::build(arch, 2, r1);
    nn::BranchedModel student = nn::BranchedModel::build(arch, 2, r2);
    teacher.set_training(false);
    student.set_training(false);
    Tensor img = rnd_tensor(rng, {3, 1, 16, 16}, 0.0, 1.0);
    NoGradGuard ng;
    BranchOutputs to = teacher.forward_all(img);
    BranchOutputs so = student.forward_all(img);
    LossWeights wt;
    wt.lambda1 = 1.0;
    wt.lambda2 = 0.0;
    wt.lambda3 = 0.0;
    double kl_part = loss_kd_total(to, so, wt, nullptr, img).item();
    wt.lambda1 = 0.0;
    wt.lambda2 = 1.0;
    double l2_part = loss_kd_total(to, so, wt, nullptr, img).item();
    bool zero_at_identity = kl_part == 0.0 && l2_part == 0.0;

    char detail[200];
    std::snprintf(detail, sizeof detail,
                  "zero-lambda trajectory %s plain; identical-teacher KL %.1e / L2 %.1e; %.0fs",
                  bitwise ? "bitwise equals" : "DIFFERS FROM", kl_part, l2_part, timer.seconds());
    report(9, "teacher-student mode reduces and vanishes correctly", bitwise && zero_at_identity,
           detail);
}

}  // namespace

int main(int argc, char** argv) {
    bool quick = argc > 1 && std::string(argv[1]) == "--skip-training-effect";
    std::puts("branch-distill acceptance suite");
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    if (quick)
        std::puts("[SKIP] criterion 6 (requested)");
    else
        criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
