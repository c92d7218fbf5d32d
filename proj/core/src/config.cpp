#include "bd/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "bd/errors.hpp"

namespace bd {

namespace {

int64_t parse_i64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int64_t x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError("key '" + key + "': cannot parse '" + v + "' as an integer");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        uint64_t x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError("key '" + key + "': cannot parse '" + v + "' as an unsigned integer");
    }
}

double parse_f64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError("key '" + key + "': cannot parse '" + v + "' as a number");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "': cannot parse '" + v + "' as a boolean");
}

void check_range(const std::string& key, bool ok, const std::string& expect) {
    if (!ok) throw ConfigError("key '" + key + "': value out of range (" + expect + ")");
}

}  // namespace

void apply_config_kv(TrainConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "arch") cfg.arch = value;
    else if (key == "branches") cfg.branches = parse_i64(key, value);
    else if (key == "classes") cfg.classes = parse_i64(key, value);
    else if (key == "dataset") cfg.dataset = value;
    else if (key == "data_root") cfg.data_root = value;
    else if (key == "epochs") cfg.epochs = parse_i64(key, value);
    else if (key == "batch_size") cfg.batch_size = parse_i64(key, value);
    else if (key == "lr0") cfg.lr0 = parse_f64(key, value);
    else if (key == "momentum") cfg.momentum = parse_f64(key, value);
    else if (key == "weight_decay") cfg.weight_decay = parse_f64(key, value);
    else if (key == "alpha") {
        cfg.weights.alpha = parse_f64(key, value);
        check_range(key, cfg.weights.alpha >= 0.0 && cfg.weights.alpha <= 1.0, "alpha in [0,1]");
    } else if (key == "beta") {
        cfg.weights.beta = parse_f64(key, value);
        check_range(key, cfg.weights.beta >= 0.0, "beta >= 0");
    } else if (key == "gamma") {
        cfg.weights.gamma = parse_f64(key, value);
        check_range(key, cfg.weights.gamma >= 0.0, "gamma >= 0");
    } else if (key == "temperature") {
        cfg.weights.temperature = parse_f64(key, value);
        check_range(key, cfg.weights.temperature > 0.0, "temperature > 0");
    } else if (key == "mu_r") {
        cfg.weights.mu_r = parse_f64(key, value);
        check_range(key, cfg.weights.mu_r >= 0.0 && cfg.weights.mu_r <= 1.0, "mu_r in [0,1]");
    } else if (key == "lambda_gp") {
        cfg.weights.lambda_gp = parse_f64(key, value);
        check_range(key, cfg.weights.lambda_gp >= 0.0, "lambda_gp >= 0");
    } else if (key == "lambda1") {
        cfg.weights.lambda1 = parse_f64(key, value);
        check_range(key, cfg.weights.lambda1 >= 0.0, "lambda1 >= 0");
    } else if (key == "lambda2") {
        cfg.weights.lambda2 = parse_f64(key, value);
        check_range(key, cfg.weights.lambda2 >= 0.0, "lambda2 >= 0");
    } else if (key == "lambda3") {
        cfg.weights.lambda3 = parse_f64(key, value);
        check_range(key, cfg.weights.lambda3 >= 0.0, "lambda3 >= 0");
    } else if (key == "critic_steps") cfg.critic_steps = parse_i64(key, value);
    else if (key == "seed") {
        cfg.seed = parse_u64(key, value);
        cfg.seed_set = true;
    } else if (key == "eval_every") cfg.eval_every = parse_i64(key, value);
    else if (key == "checkpoint_dir") cfg.checkpoint_dir = value;
    else if (key == "kl_detach_target") cfg.weights.kl_detach_target = parse_bool(key, value);
    else if (key == "precision") {
        if (value != "f64" && value != "f32")
            throw ConfigError("key 'precision': expected f64 or f32, got '" + value + "'");
        cfg.precision = value;
    } else if (key == "disc_hidden") cfg.disc_hidden = parse_i64(key, value);
    else if (key == "disc_layers") cfg.disc_layers = parse_i64(key, value);
    else if (key == "disc_cond") {
        if (value != "flatten" && value != "pool")
            throw ConfigError("key 'disc_cond': expected flatten or pool, got '" + value + "'");
        cfg.disc_cond = value;
    } else if (key == "disc_lr_scale") {
        cfg.disc_lr_scale = parse_f64(key, value);
        check_range(key, cfg.disc_lr_scale > 0.0, "disc_lr_scale > 0");
    } else {
        throw ConfigError("unknown key '" + key + "'");
    }
}

TrainConfig parse_config(const std::string& path,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
    TrainConfig cfg;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config '" + path + "'");
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            size_t start = line.find_first_not_of(" \t\r");
            if (start == std::string::npos || line[start] == '#') continue;
            size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("'" + path + "' line " + std::to_string(lineno) +
                                  ": expected key=value");
            auto trim = [](std::string s) {
                size_t a = s.find_first_not_of(" \t\r");
                size_t b = s.find_last_not_of(" \t\r");
                return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
            };
            apply_config_kv(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }
    for (const auto& [k, v] : overrides) apply_config_kv(cfg, k, v);
    return cfg;
}

void TrainConfig::validate() const {
    if (!seed_set) throw ConfigError("seed is required (set seed=<u64> or pass --seed)");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (critic_steps < 1) throw ConfigError("critic_steps must be >= 1");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
    if (!(std::isfinite(lr0) && lr0 > 0.0)) throw ConfigError("lr0 must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0,1)");
    if (!(std::isfinite(weight_decay) && weight_decay >= 0.0))
        throw ConfigError("weight_decay must be >= 0");
    if (branches < 0) throw ConfigError("branches must be >= 0");
    if (classes < 2) throw ConfigError("classes must be >= 2");
    if (disc_hidden < 1) throw ConfigError("disc_hidden must be >= 1");
    if (disc_layers < 0) throw ConfigError("disc_layers must be >= 0");
    if (!(std::isfinite(disc_lr_scale) && disc_lr_scale > 0.0))
        throw ConfigError("disc_lr_scale must be positive");
    weights.validate();
}

std::string TrainConfig::resolved_checkpoint_dir() const {
    if (!checkpoint_dir.empty()) return checkpoint_dir;
    return "runs/" + arch + "-" + dataset + "-s" + std::to_string(seed);
}

std::string serialize_config(const TrainConfig& cfg) {
    std::ostringstream os;
    os.precision(17);
    os << "arch=" << cfg.arch << "\n";
    os << "branches=" << cfg.branches << "\n";
    os << "classes=" << cfg.classes << "\n";
    os << "dataset=" << cfg.dataset << "\n";
    if (!cfg.data_root.empty()) os << "data_root=" << cfg.data_root << "\n";
    os << "epochs=" << cfg.epochs << "\n";
    os << "batch_size=" << cfg.batch_size << "\n";
    os << "lr0=" << cfg.lr0 << "\n";
    os << "momentum=" << cfg.momentum << "\n";
    os << "weight_decay=" << cfg.weight_decay << "\n";
    os << "alpha=" << cfg.weights.alpha << "\n";
    os << "beta=" << cfg.weights.beta << "\n";
    os << "gamma=" << cfg.weights.gamma << "\n";
    os << "temperature=" << cfg.weights.temperature << "\n";
    os << "mu_r=" << cfg.weights.mu_r << "\n";
    os << "lambda_gp=" << cfg.weights.lambda_gp << "\n";
    os << "lambda1=" << cfg.weights.lambda1 << "\n";
    os << "lambda2=" << cfg.weights.lambda2 << "\n";
    os << "lambda3=" << cfg.weights.lambda3 << "\n";
    os << "critic_steps=" << cfg.critic_steps << "\n";
    os << "seed=" << cfg.seed << "\n";
    os << "eval_every=" << cfg.eval_every << "\n";
    os << "checkpoint_dir=" << cfg.resolved_checkpoint_dir() << "\n";
    os << "kl_detach_target=" << (cfg.weights.kl_detach_target ? "true" : "false") << "\n";
    os << "precision=" << cfg.precision << "\n";
    os << "disc_hidden=" << cfg.disc_hidden << "\n";
    os << "disc_layers=" << cfg.disc_layers << "\n";
    os << "disc_cond=" << cfg.disc_cond << "\n";
    os << "disc_lr_scale=" << cfg.disc_lr_scale << "\n";
    return os.str();
}

}  // namespace bd
