#include "bd/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <CLI11.hpp>

#include "bd/errors.hpp"
#include "bd/train.hpp"

namespace bd::cli {

namespace {

void print_report(const RunReport& report) {
    std::printf("run directory: %s\n", report.run_dir.c_str());
    for (size_t k = 0; k < report.best_acc.size(); ++k)
        std::printf("classifier %zu: best test accuracy %.4f (epoch %lld)\n", k + 1,
                    report.best_acc[k], static_cast<long long>(report.best_epoch[k]));
    std::printf("ensemble: best test accuracy %.4f\n", report.best_ensemble);
}

}  // namespace

int cmd_train(const TrainConfig& cfg) {
    RunReport report = train_run(cfg);
    print_report(report);
    return 0;
}

int cmd_distill(const TrainConfig& cfg, const std::string& teacher_checkpoint) {
    if (teacher_checkpoint.empty())
        throw ConfigError("distill needs --teacher <checkpoint>");
    RunReport report = train_teacher_student(teacher_checkpoint, cfg);
    print_report(report);
    return 0;
}

int cmd_eval(const TrainConfig& cfg, const std::string& checkpoint) {
    if (checkpoint.empty()) throw ConfigError("eval needs --checkpoint <path>");
    TrainState st = load_checkpoint(checkpoint);
    data::SplitDataset data = data::load_dataset(cfg.dataset, cfg.data_root, cfg.classes);
    EvalResult eval = evaluate(st.model, data.test, data.train.mean, data.train.stddev,
                               cfg.batch_size);

    nn::CountReport train_cost = nn::count_params_flops(st.model);
    std::printf("train-time: %lld params, %lld flops\n",
                static_cast<long long>(train_cost.params), static_cast<long long>(train_cost.flops));
    for (int64_t k = 1; k <= st.model.classifier_count(); ++k) {
        nn::BranchedModel single = st.model.extract_single(k);
        nn::CountReport cost = nn::count_params_flops(single);
        std::printf("classifier %lld: accuracy %.4f, %lld params, %lld flops\n",
                    static_cast<long long>(k),
                    eval.classifier_acc[static_cast<size_t>(k - 1)],
                    static_cast<long long>(cost.params), static_cast<long long>(cost.flops));
    }
    std::printf("ensemble: accuracy %.4f\n", eval.ensemble_acc);
    return 0;
}

int cmd_ablate(const TrainConfig& cfg, int64_t seeds, const std::string& out_csv) {
    if (seeds < 1) throw ConfigError("ablate needs --seeds >= 1");
    struct Rung {
        const char* name;
        bool kl, l2, w;
    };
    const Rung rungs[] = {{"ce", false, false, false},
                          {"ce+kl", true, false, false},
                          {"ce+kl+l2", true, true, false},
                          {"ce+kl+l2+w", true, true, true}};

    std::string out_path = out_csv;
    if (out_path.empty()) out_path = cfg.resolved_checkpoint_dir() + "/ablation.csv";
    std::filesystem::create_directories(
        std::filesystem::path(out_path).parent_path().empty()
            ? "."
            : std::filesystem::path(out_path).parent_path().string());
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write '" + out_path + "'");
    out << "rung,seed";
    for (int64_t k = 1; k <= cfg.branches + 1; ++k) out << ",acc_c" << k;
    out << ",acc_ensemble,max_abs_loss_w,max_abs_loss_d,all_finite\n";

    data::SplitDataset data = data::load_dataset(cfg.dataset, cfg.data_root, cfg.classes);
    for (int64_t s = 0; s < seeds; ++s) {
        for (const Rung& rung : rungs) {
            TrainConfig run_cfg = cfg;
            run_cfg.seed = cfg.seed + static_cast<uint64_t>(s);
            if (!rung.kl) run_cfg.weights.alpha = 0.0;
            if (!rung.l2) run_cfg.weights.beta = 0.0;
            if (!rung.w) run_cfg.weights.gamma = 0.0;
            run_cfg.checkpoint_dir = cfg.resolved_checkpoint_dir() + "/ablate-" + rung.name +
                                     "-s" + std::to_string(run_cfg.seed);
            RunReport report = train_run_on(run_cfg, data);

            bool finite = true;
            for (const StepMetrics& m : report.epoch_losses)
                finite = finite && std::isfinite(m.ce) && std::isfinite(m.kl) &&
                         std::isfinite(m.l2) && std::isfinite(m.w) && std::isfinite(m.d);
            double max_w = 0.0, max_d = 0.0;
            for (double v : report.epoch_max_abs_w) max_w = std::max(max_w, v);
            for (double v : report.epoch_max_abs_d) max_d = std::max(max_d, v);

            char row[512];
            int off = std::snprintf(row, sizeof row, "%s,%llu", rung.name,
                                    static_cast<unsigned long long>(run_cfg.seed));
            for (double acc : report.best_acc)
                off += std::snprintf(row + off, sizeof row - off, ",%.6f", acc);
            std::snprintf(row + off, sizeof row - off, ",%.6f,%.6f,%.6f,%d",
                          report.best_ensemble, max_w, max_d, finite ? 1 : 0);
            out << row << "\n";
            out.flush();
            std::printf("ablate %s seed %llu done\n", rung.name,
                        static_cast<unsigned long long>(run_cfg.seed));
        }
    }
    std::printf("ablation table: %s\n", out_path.c_str());
    return 0;
}

namespace {

// every config key is also a CLI flag; flags override file values
const char* kConfigKeys[] = {"arch",         "branches",   "classes",     "dataset",
                             "data_root",    "epochs",     "batch_size",  "lr0",
                             "momentum",     "weight_decay", "alpha",     "beta",
                             "gamma",        "temperature", "mu_r",       "lambda_gp",
                             "lambda1",      "lambda2",    "lambda3",     "critic_steps",
                             "seed",         "eval_every", "checkpoint_dir", "kl_detach_target",
                             "precision",    "disc_hidden", "disc_layers", "disc_cond",
                             "disc_lr_scale"};

struct SubArgs {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
    std::map<std::string, std::string> raw;
};

void add_common(CLI::App* sub, SubArgs& args) {
    sub->add_option("--config", args.config_path, "flat key=value config file");
    for (const char* key : kConfigKeys)
        sub->add_option_function<std::string>(
            std::string("--") + key,
            [&args, key](const std::string& v) { args.overrides.emplace_back(key, v); });
}

TrainConfig resolve(const SubArgs& args) {
    TrainConfig cfg = parse_config(args.config_path, args.overrides);
    cfg.validate();
    return cfg;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"multi-branched adversarial self-distillation trainer"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    SubArgs train_args, distill_args, eval_args, ablate_args;
    std::string teacher_path, eval_checkpoint, ablate_out;
    int64_t ablate_seeds = 1;

    CLI::App* train = app.add_subcommand("train", "train with the self-distillation objective");
    add_common(train, train_args);
    CLI::App* distill = app.add_subcommand("distill", "train a student against a frozen teacher");
    add_common(distill, distill_args);
    distill->add_option("--teacher", teacher_path, "teacher checkpoint (.bdkd)")->required();
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint and report costs");
    add_common(eval, eval_args);
    eval->add_option("--checkpoint", eval_checkpoint, "checkpoint to evaluate")->required();
    CLI::App* ablate = app.add_subcommand("ablate", "run the loss-ablation ladder");
    add_common(ablate, ablate_args);
    ablate->add_option("--seeds", ablate_seeds, "number of consecutive seeds");
    ablate->add_option("--out", ablate_out, "output CSV path");

    try {
        app.parse(argc, argv);
        if (train->parsed()) return cmd_train(resolve(train_args));
        if (distill->parsed()) return cmd_distill(resolve(distill_args), teacher_path);
        if (eval->parsed()) return cmd_eval(resolve(eval_args), eval_checkpoint);
        if (ablate->parsed()) return cmd_ablate(resolve(ablate_args), ablate_seeds, ablate_out);
        return 2;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 3;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    }
}

}  // namespace bd::cli
