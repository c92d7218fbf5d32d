#include "bd/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "bd/alloc_tuning.hpp"
#include "bd/errors.hpp"

namespace bd {

namespace {

std::vector<Tensor> softmax_all(const std::vector<Tensor>& logits) {
    std::vector<Tensor> out;
    out.reserve(logits.size());
    for (const Tensor& a : logits) out.push_back(softmax_probs(a));
    return out;
}

std::vector<Tensor> detach_all(const std::vector<Tensor>& ts) {
    std::vector<Tensor> out;
    out.reserve(ts.size());
    for (const Tensor& t : ts) out.push_back(t.detach());
    return out;
}

double finite_item(const Tensor& t, const char* what) {
    double v = t.item();
    if (!std::isfinite(v)) throw NumericError(std::string(what) + " is non-finite, aborting step");
    return v;
}

std::string timestamp_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
    return buf;
}

}  // namespace

StepMetrics train_step(nn::BranchedModel& model, nn::Discriminator& disc, SgdOptimizer& opt_model,
                       SgdOptimizer& opt_disc, Tape& tape, const Tensor& images,
                       const std::vector<int64_t>& labels, const LossWeights& weights,
                       int64_t critic_steps, Rng& rng, nn::BranchedModel* teacher,
                       KdPairing pairing) {
    if (!model.is_training()) throw ContractError("train_step: model must be in train mode");
    if (critic_steps < 1) throw ContractError("train_step: critic_steps must be >= 1");
    StepMetrics metrics;
    TapeScope scope(tape);
    int64_t b = images.dim(0);

    BranchOutputs outputs = model.forward_all(images);
    std::vector<Tensor> probs = softmax_all(outputs.logits);
    Tensor y_onehot = onehot(labels, model.arch().classes);

    bool use_kd = teacher && (weights.lambda1 != 0.0 || weights.lambda2 != 0.0 ||
                              weights.lambda3 != 0.0);
    BranchOutputs teacher_out;
    if (use_kd) {
        NoGradGuard no_grad;
        teacher_out = teacher->forward_all(images);
    }

    // --- critic updates on detached generator outputs ---
    std::vector<Tensor> fake_probs = detach_all(probs);
    // In distillation mode with an adversarial term, the critic's real sample
    // mixes the teacher's ensemble with the labels.
    std::vector<Tensor> real_source =
        (use_kd && weights.lambda3 != 0.0) ? softmax_all(teacher_out.logits) : fake_probs;
    for (int64_t s = 0; s < critic_steps; ++s) {
        Tensor r = real_mix(real_source, y_onehot, weights.mu_r);
        std::vector<double> eps(static_cast<size_t>(b));
        for (double& e : eps) e = rng.uniform();
        Tensor d_loss =
            loss_discriminator_wgangp(disc, fake_probs, r, images, weights.lambda_gp, eps);
        metrics.d = finite_item(d_loss, "discriminator loss");
        tape.backward(d_loss);
        opt_disc.step(disc.params());
    }

    // --- one generator update ---
    Tensor ce = loss_ce(outputs.logits, labels);
    metrics.ce = finite_item(ce, "cross-entropy loss");
    Tensor kl, l2, w;
    if (weights.alpha != 0.0) {
        kl = loss_kl_pairwise(outputs.logits, weights.temperature, weights.kl_detach_target);
        metrics.kl = finite_item(kl, "pairwise KL loss");
    } else {
        kl = Tensor::zeros({1});
    }
    if (weights.beta != 0.0) {
        l2 = loss_l2_simmaps(outputs.features);
        metrics.l2 = finite_item(l2, "similarity-map loss");
    } else {
        l2 = Tensor::zeros({1});
    }
    if (weights.gamma != 0.0) {
        w = loss_generator_w(disc, probs, images);
        metrics.w = finite_item(w, "generator Wasserstein loss");
    } else {
        w = Tensor::zeros({1});
    }
    Tensor total = loss_sd_total(ce, kl, l2, w, weights);
    if (use_kd) {
        Tensor kd = loss_kd_total(teacher_out, outputs, weights, &disc, images, pairing);
        metrics.kd = finite_item(kd, "teacher-student loss");
        total = add(total, kd);
    }
    finite_item(total, "total loss");
    tape.backward(total);
    opt_model.step(model.params());
    tape.clear();
    return metrics;
}

EvalResult evaluate(nn::BranchedModel& model, const data::Dataset& ds,
                    const std::vector<double>& mean, const std::vector<double>& stddev,
                    int64_t batch_size) {
    if (ds.count == 0) throw ContractError("evaluate: empty split");
    bool was_training = model.is_training();
    model.set_training(false);
    NoGradGuard no_grad;

    int64_t k1 = model.classifier_count();
    std::vector<int64_t> correct(static_cast<size_t>(k1), 0);
    int64_t ensemble_correct = 0;
    data::AugmentPolicy policy = data::AugmentPolicy::eval();

    std::vector<int64_t> indices;
    for (int64_t start = 0; start < ds.count; start += batch_size) {
        int64_t bsz = std::min(batch_size, ds.count - start);
        indices.resize(static_cast<size_t>(bsz));
        for (int64_t i = 0; i < bsz; ++i) indices[static_cast<size_t>(i)] = start + i;
        auto [images, labels] = data::make_batch(ds, indices, policy, mean, stddev, 0, 0);
        BranchOutputs out = model.forward_all(images);
        int64_t classes = model.arch().classes;
        std::vector<double> ens(static_cast<size_t>(bsz * classes), 0.0);
        for (int64_t k = 0; k < k1; ++k) {
            Tensor p = softmax_probs(out.logits[static_cast<size_t>(k)]);
            const double* pv = p.data();
            for (int64_t i = 0; i < bsz; ++i) {
                const double* row = pv + i * classes;
                int64_t arg = 0;
                for (int64_t c = 1; c < classes; ++c)
                    if (row[c] > row[arg]) arg = c;
                if (arg == labels[static_cast<size_t>(i)]) correct[static_cast<size_t>(k)]++;
                for (int64_t c = 0; c < classes; ++c)
                    ens[static_cast<size_t>(i * classes + c)] += row[c];
            }
        }
        for (int64_t i = 0; i < bsz; ++i) {
            const double* row = ens.data() + i * classes;
            int64_t arg = 0;
            for (int64_t c = 1; c < classes; ++c)
                if (row[c] > row[arg]) arg = c;
            if (arg == labels[static_cast<size_t>(i)]) ensemble_correct++;
        }
    }
    model.set_training(was_training);

    EvalResult res;
    for (int64_t k = 0; k < k1; ++k)
        res.classifier_acc.push_back(static_cast<double>(correct[static_cast<size_t>(k)]) /
                                     static_cast<double>(ds.count));
    res.ensemble_acc = static_cast<double>(ensemble_correct) / static_cast<double>(ds.count);
    return res;
}

void write_manifest(const std::string& path, const TrainConfig& cfg, uint64_t dataset_checksum,
                    const RunReport& report, const std::string& started, const std::string& ended) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest '" + path + "'");
    out << "# branch-distill run manifest (parses back as a config)\n";
    out << "# version: 0.1.0\n";
    out << "# dataset_checksum: " << dataset_checksum << "\n";
    out << "# started: " << started << "\n";
    out << "# ended: " << ended << "\n";
    out << "# metrics_csv: " << report.metrics_csv_path << "\n";
    out << "# final_checkpoint: " << report.final_checkpoint_path << "\n";
    for (const std::string& p : report.best_checkpoint_paths) out << "# best_checkpoint: " << p << "\n";
    out << serialize_config(cfg);
}

RunReport train_run_on(const TrainConfig& cfg, const data::SplitDataset& data,
                       TrainState* teacher) {
    cfg.validate();
    tune_allocator_for_training();
    std::string started = timestamp_now();
    const data::Dataset& train = data.train;
    const data::Dataset& test = data.test;
    if (train.class_count > cfg.classes)
        throw ConfigError("dataset has " + std::to_string(train.class_count) +
                          " classes but config says " + std::to_string(cfg.classes));
    if (teacher && teacher->k_branches != cfg.branches)
        throw ConfigError("teacher has K=" + std::to_string(teacher->k_branches) +
                          " branches but config asks for K=" + std::to_string(cfg.branches));

    Rng rng(cfg.seed);
    nn::ArchSpec arch =
        nn::make_arch(cfg.arch, cfg.classes, train.channels, train.height, train.width);
    nn::BranchedModel model = nn::BranchedModel::build(arch, cfg.branches, rng);

    nn::DiscriminatorSpec dspec;
    dspec.classes = cfg.classes;
    dspec.cond_channels = train.channels;
    dspec.cond_h = train.height;
    dspec.cond_w = train.width;
    dspec.cond_mode = cfg.disc_cond == "pool" ? nn::DiscriminatorSpec::Cond::AvgPool
                                              : nn::DiscriminatorSpec::Cond::Flatten;
    dspec.hidden = cfg.disc_hidden;
    dspec.layers = cfg.disc_layers;
    nn::Discriminator disc = nn::Discriminator::build(dspec, rng);

    SgdOptimizer opt_model(cfg.lr0, cfg.momentum, cfg.weight_decay);
    SgdOptimizer opt_disc(cfg.lr0, cfg.momentum, cfg.weight_decay);

    std::string run_dir = cfg.resolved_checkpoint_dir();
    std::filesystem::create_directories(run_dir);
    std::string csv_path = run_dir + "/metrics.csv";
    std::ofstream csv(csv_path);
    if (!csv) throw IoError("cannot write metrics CSV '" + csv_path + "'");
    csv << "epoch,lr,loss_ce,loss_kl,loss_l2,loss_w,loss_d";
    for (int64_t k = 1; k <= model.classifier_count(); ++k) csv << ",acc_c" << k;
    csv << ",acc_ensemble\n";

    RunReport report;
    report.run_dir = run_dir;
    report.metrics_csv_path = csv_path;
    report.best_acc.assign(static_cast<size_t>(model.classifier_count()), -1.0);
    report.best_epoch.assign(static_cast<size_t>(model.classifier_count()), 0);
    report.best_checkpoint_paths.assign(static_cast<size_t>(model.classifier_count()), "");

    data::AugmentPolicy train_policy = data::AugmentPolicy::train_for(data.id);
    Tape tape;
    EvalResult eval;
    nn::BranchedModel* teacher_model = teacher ? &teacher->model : nullptr;
    if (teacher_model) teacher_model->set_training(false);

    std::vector<int64_t> order(static_cast<size_t>(train.count));
    for (int64_t i = 0; i < train.count; ++i) order[static_cast<size_t>(i)] = i;

    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = cosine_lr(epoch, cfg.epochs, cfg.lr0);
        opt_model.set_lr(lr);
        opt_disc.set_lr(lr * cfg.disc_lr_scale);
        model.set_training(true);

        // Fisher-Yates draw from the run stream
        for (int64_t i = train.count - 1; i > 0; --i) {
            int64_t j = rng.uniform_int(i + 1);
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
        }

        StepMetrics sums;
        double max_w = 0.0, max_d = 0.0;
        int64_t steps = 0;
        for (int64_t start = 0; start < train.count; start += cfg.batch_size) {
            int64_t bsz = std::min<int64_t>(cfg.batch_size, train.count - start);
            std::vector<int64_t> idx(order.begin() + start, order.begin() + start + bsz);
            auto [images, labels] = data::make_batch(train, idx, train_policy, train.mean,
                                                     train.stddev, cfg.seed, epoch);
            StepMetrics m = train_step(model, disc, opt_model, opt_disc, tape, images, labels,
                                       cfg.weights, cfg.critic_steps, rng, teacher_model,
                                       KdPairing::Matched);
            sums.ce += m.ce;
            sums.kl += m.kl;
            sums.l2 += m.l2;
            sums.w += m.w;
            sums.d += m.d;
            sums.kd += m.kd;
            max_w = std::max(max_w, std::fabs(m.w));
            max_d = std::max(max_d, std::fabs(m.d));
            ++steps;
        }
        StepMetrics means{sums.ce / steps, sums.kl / steps, sums.l2 / steps,
                          sums.w / steps,  sums.d / steps,  sums.kd / steps};
        report.epoch_losses.push_back(means);
        report.epoch_max_abs_w.push_back(max_w);
        report.epoch_max_abs_d.push_back(max_d);

        if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs - 1)
            eval = evaluate(model, test, train.mean, train.stddev,
                            std::max<int64_t>(cfg.batch_size, 256));

        char row[512];
        int off = std::snprintf(row, sizeof row, "%lld,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f",
                                static_cast<long long>(epoch + 1), lr, means.ce, means.kl,
                                means.l2, means.w, means.d);
        for (double acc : eval.classifier_acc)
            off += std::snprintf(row + off, sizeof row - off, ",%.6f", acc);
        std::snprintf(row + off, sizeof row - off, ",%.6f", eval.ensemble_acc);
        csv << row << "\n";
        csv.flush();

        for (int64_t k = 0; k < model.classifier_count(); ++k) {
            if (eval.classifier_acc[static_cast<size_t>(k)] >
                report.best_acc[static_cast<size_t>(k)]) {
                report.best_acc[static_cast<size_t>(k)] =
                    eval.classifier_acc[static_cast<size_t>(k)];
                report.best_epoch[static_cast<size_t>(k)] = epoch + 1;
                TrainState st{std::move(model), std::move(disc), opt_model, opt_disc,
                              epoch + 1,        rng,             cfg.branches};
                std::string path = run_dir + "/best_c" + std::to_string(k + 1) + ".bdkd";
                save_checkpoint(path, st, cfg.precision);
                report.best_checkpoint_paths[static_cast<size_t>(k)] = path;
                model = std::move(st.model);
                disc = std::move(st.disc);
            }
        }
        report.best_ensemble = std::max(report.best_ensemble, eval.ensemble_acc);
    }

    report.final_eval = eval;
    TrainState final_state{std::move(model), std::move(disc), opt_model, opt_disc,
                           cfg.epochs,       rng,             cfg.branches};
    report.final_checkpoint_path = run_dir + "/final.bdkd";
    save_checkpoint(report.final_checkpoint_path, final_state, cfg.precision);

    report.manifest_path = run_dir + "/manifest.txt";
    write_manifest(report.manifest_path, cfg, train.checksum(), report, started, timestamp_now());
    return report;
}

RunReport train_run(const TrainConfig& cfg) {
    cfg.validate();
    data::SplitDataset data = data::load_dataset(cfg.dataset, cfg.data_root, cfg.classes);
    return train_run_on(cfg, data);
}

RunReport train_teacher_student(const std::string& teacher_checkpoint, const TrainConfig& cfg) {
    cfg.validate();
    TrainState teacher = load_checkpoint(teacher_checkpoint);
    teacher.model.set_training(false);
    data::SplitDataset data = data::load_dataset(cfg.dataset, cfg.data_root, cfg.classes);
    return train_run_on(cfg, data, &teacher);
}

}  // namespace bd
