#include "lrgcn/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lrgcn {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw std::runtime_error("config: bad numeric value for " + key + ": '" + v + "'");
    }
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const unsigned long long x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw std::runtime_error("config: bad integer value for " + key + ": '" + v + "'");
    }
}

}  // namespace

void apply_config_entry(TrainConfig& cfg, const std::string& key,
                        const std::string& value) {
    if (key == "beta") cfg.beta = parse_double(key, value);
    else if (key == "gamma") cfg.gamma = parse_double(key, value);
    else if (key == "lambda") cfg.lambda = parse_double(key, value);
    else if (key == "lr") cfg.lr = parse_double(key, value);
    else if (key == "lr_rule") cfg.lr_rule = parse_double(key, value);
    else if (key == "lr_policy") cfg.lr_policy = parse_double(key, value);
    else if (key == "label_smoothing") cfg.label_smoothing = parse_double(key, value);
    else if (key == "momentum") cfg.momentum = parse_double(key, value);
    else if (key == "entropy_coef") cfg.entropy_coef = parse_double(key, value);
    else if (key == "init_rule_weight") cfg.init_rule_weight = parse_double(key, value);
    else if (key == "batch_size") cfg.batch_size = parse_uint(key, value);
    else if (key == "beam_width") cfg.beam_width = parse_uint(key, value);
    else if (key == "max_steps") cfg.max_steps = parse_uint(key, value);
    else if (key == "action_cap") cfg.action_cap = parse_uint(key, value);
    else if (key == "dim") cfg.dim = parse_uint(key, value);
    else if (key == "policy_dim") cfg.policy_dim = parse_uint(key, value);
    else if (key == "policy_hidden") cfg.policy_hidden = parse_uint(key, value);
    else if (key == "rollouts_per_query") cfg.rollouts_per_query = parse_uint(key, value);
    else if (key == "epochs_pretrain_gnn") cfg.epochs_pretrain_gnn = parse_uint(key, value);
    else if (key == "epochs_pretrain_rl") cfg.epochs_pretrain_rl = parse_uint(key, value);
    else if (key == "epochs_joint") cfg.epochs_joint = parse_uint(key, value);
    else if (key == "patience") cfg.patience = parse_uint(key, value);
    else if (key == "seed") cfg.seed = parse_uint(key, value);
    else if (key == "threads") cfg.threads = static_cast<int>(parse_uint(key, value));
    else if (key == "rule_init_samples") cfg.rule_init_samples = parse_uint(key, value);
    else if (key == "rule_init") {
        if (value == "fixed") cfg.rule_init = RuleInit::Fixed;
        else if (value == "empirical") cfg.rule_init = RuleInit::Empirical;
        else throw std::runtime_error("config: rule_init must be fixed or empirical, got '" +
                                      value + "'");
    } else if (key == "composition_op") {
        if (value == "mult" || value == "multiply") cfg.composition_op = CompositionOp::Multiply;
        else if (value == "sub" || value == "subtract") cfg.composition_op = CompositionOp::Subtract;
        else throw std::runtime_error("config: composition_op must be mult or sub, got '" +
                                      value + "'");
    } else {
        throw std::runtime_error("config: unknown key '" + key + "'");
    }

    if (cfg.beta < 0.0 || cfg.gamma < 0.0 || cfg.lambda < 0.0)
        throw std::runtime_error("config: beta, gamma, lambda must be >= 0");
    if (cfg.batch_size < 1) throw std::runtime_error("config: batch_size must be >= 1");
    if (cfg.max_steps < 1) throw std::runtime_error("config: max_steps must be >= 1");
    if (cfg.beam_width < 1) throw std::runtime_error("config: beam_width must be >= 1");
}

TrainConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path.string());
    TrainConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": expected key = value");
        try {
            apply_config_entry(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " +
                                     e.what());
        }
    }
    return cfg;
}

std::map<std::string, std::string> config_to_map(const TrainConfig& cfg) {
    auto num = [](double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    };
    std::map<std::string, std::string> m;
    m["beta"] = num(cfg.beta);
    m["gamma"] = num(cfg.gamma);
    m["lambda"] = num(cfg.lambda);
    m["lr"] = num(cfg.lr);
    m["lr_rule"] = num(cfg.lr_rule);
    m["lr_policy"] = num(cfg.lr_policy);
    m["label_smoothing"] = num(cfg.label_smoothing);
    m["momentum"] = num(cfg.momentum);
    m["entropy_coef"] = num(cfg.entropy_coef);
    m["init_rule_weight"] = num(cfg.init_rule_weight);
    m["batch_size"] = std::to_string(cfg.batch_size);
    m["beam_width"] = std::to_string(cfg.beam_width);
    m["max_steps"] = std::to_string(cfg.max_steps);
    m["action_cap"] = std::to_string(cfg.action_cap);
    m["dim"] = std::to_string(cfg.dim);
    m["policy_dim"] = std::to_string(cfg.policy_dim);
    m["policy_hidden"] = std::to_string(cfg.policy_hidden);
    m["rollouts_per_query"] = std::to_string(cfg.rollouts_per_query);
    m["epochs_pretrain_gnn"] = std::to_string(cfg.epochs_pretrain_gnn);
    m["epochs_pretrain_rl"] = std::to_string(cfg.epochs_pretrain_rl);
    m["epochs_joint"] = std::to_string(cfg.epochs_joint);
    m["patience"] = std::to_string(cfg.patience);
    m["seed"] = std::to_string(cfg.seed);
    m["threads"] = std::to_string(cfg.threads);
    m["composition_op"] =
        cfg.composition_op == CompositionOp::Multiply ? "mult" : "sub";
    m["rule_init"] = cfg.rule_init == RuleInit::Fixed ? "fixed" : "empirical";
    m["rule_init_samples"] = std::to_string(cfg.rule_init_samples);
    return m;
}

}  // namespace lrgcn
