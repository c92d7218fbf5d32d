#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "bd/config.hpp"
#include "bd/errors.hpp"

using namespace bd;

namespace {
std::string write_tmp(const std::string& name, const std::string& body) {
    std::string path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path);
    out << body;
    return path;
}
}  // namespace

TEST_CASE("empty file keeps defaults but the seed stays required") {
    std::string path = write_tmp("bd_cfg_empty.cfg", "");
    TrainConfig cfg = parse_config(path);
    CHECK(cfg.arch == "tiny-resnet");
    CHECK(cfg.epochs == 200);
    CHECK(cfg.batch_size == 128);
    CHECK(cfg.lr0 == 0.1);
    CHECK(cfg.momentum == 0.9);
    CHECK(cfg.weight_decay == 5e-4);
    CHECK(cfg.weights.alpha == 0.3);
    CHECK(cfg.weights.lambda_gp == 10.0);
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("seed"), ConfigError);
    apply_config_kv(cfg, "seed", "9");
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("out-of-range values carry the key name") {
    TrainConfig cfg;
    CHECK_THROWS_WITH_AS(apply_config_kv(cfg, "alpha", "1.5"), doctest::Contains("alpha"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(apply_config_kv(cfg, "temperature", "0"),
                         doctest::Contains("temperature"), ConfigError);
    CHECK_THROWS_WITH_AS(apply_config_kv(cfg, "epochs", "abc"), doctest::Contains("epochs"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(apply_config_kv(cfg, "frobnicate", "1"), doctest::Contains("frobnicate"),
                         ConfigError);
}

TEST_CASE("flag overrides win over file values") {
    std::string path = write_tmp("bd_cfg_file.cfg", "epochs=200\nseed=4\nalpha=0.25\n");
    TrainConfig cfg = parse_config(path, {{"epochs", "2"}});
    CHECK(cfg.epochs == 2);
    CHECK(cfg.seed == 4);
    CHECK(cfg.weights.alpha == 0.25);
}

TEST_CASE("serialized config (and thus a manifest) parses back identically") {
    TrainConfig cfg;
    apply_config_kv(cfg, "seed", "31");
    apply_config_kv(cfg, "alpha", "0.125");
    apply_config_kv(cfg, "dataset", "synth-digits");
    apply_config_kv(cfg, "disc_cond", "pool");
    std::string path = write_tmp("bd_cfg_round.cfg",
                                 "# manifest-style comment\n" + serialize_config(cfg));
    TrainConfig back = parse_config(path);
    CHECK(back.seed == 31);
    CHECK(back.weights.alpha == 0.125);
    CHECK(back.dataset == "synth-digits");
    CHECK(back.disc_cond == "pool");
    CHECK(serialize_config(back) == serialize_config(cfg));
}

TEST_CASE("validate covers the documented ranges") {
    TrainConfig cfg;
    cfg.seed_set = true;
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.epochs = 1;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.batch_size = 1;
    cfg.critic_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.critic_steps = 1;
    cfg.momentum = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.momentum = 0.9;
    CHECK_NOTHROW(cfg.validate());
}
