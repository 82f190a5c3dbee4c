// lrgcn command line: dataset prep, pretraining, joint training,
// evaluation, and artifact dumps.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lrgcn/checkpoint.hpp"
#include "lrgcn/config.hpp"
#include "lrgcn/dataset.hpp"
#include "lrgcn/evaluator.hpp"
#include "lrgcn/kg.hpp"
#include "lrgcn/log.hpp"
#include "lrgcn/path_miner.hpp"
#include "lrgcn/predictor.hpp"
#include "lrgcn/rule_engine.hpp"
#include "lrgcn/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersionTag = "lrgcn 0.1.0";

std::uint64_t hash_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot hash missing file: " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// One manifest per run: resolved config, seeds, input hashes, outputs,
// timings, version tag.
class Manifest {
public:
    Manifest(std::string command, fs::path out_dir)
        : out_dir_(std::move(out_dir)), start_(std::chrono::steady_clock::now()) {
        j_["command"] = std::move(command);
        j_["version"] = kVersionTag;
        j_["status"] = "running";
        j_["inputs"] = json::object();
        j_["outputs"] = json::array();
    }

    void set_config(const lrgcn::TrainConfig& cfg) {
        j_["config"] = lrgcn::config_to_map(cfg);
        j_["seed"] = cfg.seed;
    }
    void add_input(const std::string& label, const fs::path& p) {
        j_["inputs"][label] = {{"path", p.string()}, {"fnv1a64", hex64(hash_file(p))}};
    }
    void add_output(const fs::path& p) { j_["outputs"].push_back(p.string()); }
    void set(const std::string& key, const json& v) { j_[key] = v; }

    void finish(const std::string& status, const std::string& message = "") {
        j_["status"] = status;
        if (!message.empty()) j_["message"] = message;
        j_["elapsed_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - start_)
                               .count();
        std::error_code ec;
        fs::create_directories(out_dir_, ec);
        std::ofstream out(out_dir_ / "manifest.json");
        out << j_.dump(2) << '\n';
    }

private:
    json j_;
    fs::path out_dir_;
    std::chrono::steady_clock::time_point start_;
};

struct LoadedData {
    lrgcn::DatasetBundle bundle;
    lrgcn::KnowledgeGraph graph;
    std::vector<lrgcn::Triple> dev;
    std::vector<lrgcn::Triple> test;
    lrgcn::FilterIndex filter;
};

LoadedData load_all(const fs::path& data_dir) {
    LoadedData d;
    d.bundle = lrgcn::load_dataset(data_dir);
    d.graph = lrgcn::KnowledgeGraph::build(d.bundle.train);
    d.dev = d.graph.to_id_triples(d.bundle.dev);
    d.test = d.graph.to_id_triples(d.bundle.test);
    d.filter.add_split(d.graph, d.graph.triples());
    d.filter.add_split(d.graph, d.dev);
    d.filter.add_split(d.graph, d.test);
    lrgcn::log_info("loaded %s: |E|=%zu |R|=%zu train=%zu dev=%zu test=%zu",
                    data_dir.string().c_str(), d.graph.num_entities(),
                    d.graph.num_relations(), d.graph.triples().size(), d.dev.size(),
                    d.test.size());
    return d;
}

lrgcn::TrainConfig resolve_config(const std::string& config_path,
                                  std::optional<std::uint64_t> seed_override,
                                  std::optional<int> threads_override) {
    lrgcn::TrainConfig cfg;
    if (!config_path.empty()) cfg = lrgcn::parse_config_file(config_path);
    if (seed_override) cfg.seed = *seed_override;
    if (threads_override) cfg.threads = *threads_override;
    return cfg;
}

void write_epoch_log(const fs::path& path, const std::string& phase,
                     const std::vector<lrgcn::EpochLog>& log, bool append) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    for (const auto& e : log) {
        json j{{"phase", phase},
               {"epoch", e.epoch},
               {"label_loss", e.stats.label_loss},
               {"den_loss", e.stats.den_loss},
               {"elbo_loss", e.stats.elbo_loss},
               {"paths", e.stats.paths},
               {"positive_paths", e.stats.positive_paths},
               {"rule_count", e.rule_count},
               {"rule_updates", e.stats.rule_updates}};
        if (e.dev_mrr >= 0.0) {
            j["dev_mrr"] = e.dev_mrr;
            j["dev_hits10"] = e.dev_hits10;
        }
        out << j.dump() << '\n';
    }
}

json report_to_json(const lrgcn::RankingReport& r) {
    json buckets = json::array();
    for (const auto& b : r.buckets) {
        buckets.push_back({{"lo", b.lo},
                           {"hi", b.hi == UINT32_MAX ? json(nullptr) : json(b.hi)},
                           {"mrr", b.mrr},
                           {"count", b.count}});
    }
    return json{{"queries", r.per_query.size()},
                {"mrr", r.mrr},
                {"hits1", r.hits1},
                {"hits3", r.hits3},
                {"hits10", r.hits10},
                {"in_degree_buckets", buckets}};
}

int cmd_sparsify(const fs::path& in_dir, const fs::path& out_dir, double fraction,
                 std::uint64_t seed) {
    Manifest manifest("sparsify", out_dir);
    try {
        manifest.add_input("train", in_dir / "train.txt");
        auto train = lrgcn::read_triple_file(in_dir / "train.txt");
        auto sparse = lrgcn::sparsify(train, fraction, seed);
        fs::create_directories(out_dir);
        lrgcn::write_triple_file(out_dir / "train.txt", sparse);
        manifest.add_output(out_dir / "train.txt");
        for (const char* name : {"valid.txt", "test.txt"}) {
            if (fs::exists(in_dir / name)) {
                fs::copy_file(in_dir / name, out_dir / name,
                              fs::copy_options::overwrite_existing);
                manifest.add_output(out_dir / name);
            }
        }
        json meta{{"fraction", fraction},
                  {"seed", seed},
                  {"input_triples", train.size()},
                  {"output_triples", sparse.size()}};
        std::ofstream(out_dir / "sparsify_meta.json") << meta.dump(2) << '\n';
        manifest.add_output(out_dir / "sparsify_meta.json");
        manifest.set("counts", meta);
        manifest.finish("ok");
        std::cout << "sparsify: " << train.size() << " -> " << sparse.size()
                  << " triples (fraction " << fraction << ", seed " << seed << ")\n";
        return 0;
    } catch (const std::exception& e) {
        manifest.finish("error", e.what());
        std::cerr << "sparsify failed: " << e.what() << '\n';
        return 1;
    }
}

int cmd_pretrain(const fs::path& data_dir, const fs::path& out_dir,
                 const lrgcn::TrainConfig& cfg) {
    Manifest manifest("pretrain", out_dir);
    try {
        manifest.set_config(cfg);
        for (const char* f : {"train.txt", "valid.txt", "test.txt"})
            manifest.add_input(f, data_dir / f);
        LoadedData d = load_all(data_dir);
        fs::create_directories(out_dir);

        auto phi = lrgcn::PredictorParams::init(
            d.graph.num_entities(), d.graph.num_relations_aug(), cfg.dim,
            cfg.composition_op, lrgcn::derive_seed(cfg.seed, "predictor"));
        auto theta = lrgcn::PolicyParams::init(
            d.graph.num_entities(), d.graph.num_relations_aug(), cfg.policy_dim,
            cfg.policy_hidden, lrgcn::derive_seed(cfg.seed, "policy"));

        const auto queries = lrgcn::make_queries(d.graph);
        const auto gnn = lrgcn::pretrain_gnn(d.graph, phi, queries, d.dev, d.filter, cfg);
        write_epoch_log(out_dir / "train_log.jsonl", "pretrain_gnn", gnn.log, false);
        const auto rl = lrgcn::pretrain_policy(d.graph, theta, queries, cfg);
        write_epoch_log(out_dir / "train_log.jsonl", "pretrain_rl", rl.log, true);

        lrgcn::Checkpoint ckpt;
        ckpt.predictor = std::move(phi);
        ckpt.policy = std::move(theta);
        ckpt.seed = cfg.seed;
        lrgcn::save_checkpoint(out_dir / "post-pretrain.ckpt", ckpt);
        manifest.add_output(out_dir / "post-pretrain.ckpt");
        manifest.add_output(out_dir / "train_log.jsonl");
        manifest.set("gnn_epochs", gnn.epochs_run);
        manifest.set("rl_epochs", rl.epochs_run);
        if (gnn.best_dev_mrr >= 0.0) manifest.set("best_dev_mrr", gnn.best_dev_mrr);
        manifest.finish("ok");
        std::cout << "pretrain: gnn epochs " << gnn.epochs_run << ", rl epochs "
                  << rl.epochs_run;
        if (gnn.best_dev_mrr >= 0.0) std::cout << ", best dev MRR " << gnn.best_dev_mrr;
        std::cout << '\n';
        return 0;
    } catch (const std::exception& e) {
        manifest.finish("error", e.what());
        std::cerr << "pretrain failed: " << e.what() << '\n';
        return 1;
    }
}

int cmd_joint_train(const fs::path& data_dir, const fs::path& ckpt_path,
                    const fs::path& out_dir, const lrgcn::TrainConfig& cfg) {
    Manifest manifest("joint-train", out_dir);
    try {
        manifest.set_config(cfg);
        for (const char* f : {"train.txt", "valid.txt", "test.txt"})
            manifest.add_input(f, data_dir / f);
        manifest.add_input("checkpoint", ckpt_path);
        LoadedData d = load_all(data_dir);
        fs::create_directories(out_dir);

        lrgcn::Checkpoint ckpt = lrgcn::load_checkpoint(ckpt_path);
        if (ckpt.predictor.entity.rows != d.graph.num_entities())
            throw std::runtime_error("checkpoint entity count does not match dataset");

        const auto queries = lrgcn::make_queries(d.graph);
        const auto joint = lrgcn::joint_train(d.graph, ckpt.predictor, ckpt.policy,
                                              ckpt.rules, queries, d.dev, d.filter, cfg);
        write_epoch_log(out_dir / "train_log.jsonl", "joint", joint.log, false);

        ckpt.has_rules = true;
        lrgcn::save_checkpoint(out_dir / "post-joint.ckpt", ckpt);
        manifest.add_output(out_dir / "post-joint.ckpt");
        manifest.add_output(out_dir / "train_log.jsonl");
        manifest.set("joint_epochs", joint.epochs_run);
        manifest.set("rule_count", ckpt.rules.size());
        if (joint.best_dev_mrr >= 0.0) manifest.set("best_dev_mrr", joint.best_dev_mrr);
        manifest.finish("ok");
        std::cout << "joint-train: epochs " << joint.epochs_run << ", rules "
                  << ckpt.rules.size();
        if (joint.best_dev_mrr >= 0.0) std::cout << ", best dev MRR " << joint.best_dev_mrr;
        std::cout << '\n';
        return 0;
    } catch (const std::exception& e) {
        manifest.finish("error", e.what());
        std::cerr << "joint-train failed: " << e.what() << '\n';
        return 1;
    }
}

int cmd_evaluate(const fs::path& data_dir, const fs::path& ckpt_path,
                 const fs::path& out_dir, const std::string& split,
                 const std::string& dump_ranks, const lrgcn::TrainConfig& cfg) {
    Manifest manifest("evaluate", out_dir);
    try {
        manifest.set_config(cfg);
        manifest.add_input("checkpoint", ckpt_path);
        LoadedData d = load_all(data_dir);
        fs::create_directories(out_dir);
        lrgcn::Checkpoint ckpt = lrgcn::load_checkpoint(ckpt_path);
        if (ckpt.predictor.entity.rows != d.graph.num_entities())
            throw std::runtime_error("checkpoint entity count does not match dataset");

        const auto& triples = split == "valid" ? d.dev : d.test;
        lrgcn::EvalOptions opts;
        opts.seed = lrgcn::derive_seed(cfg.seed, "eval");
        opts.threads = cfg.threads;
        const auto report = lrgcn::evaluate(d.graph, d.filter, ckpt.predictor, triples, opts);

        std::ofstream(out_dir / "report.json") << report_to_json(report).dump(2) << '\n';
        std::ofstream(out_dir / "report.txt") << report.to_text();
        manifest.add_output(out_dir / "report.json");
        manifest.add_output(out_dir / "report.txt");
        if (!dump_ranks.empty()) {
            std::ofstream ranks(dump_ranks);
            ranks << "source\trelation\tgold\trank\tdirection\n";
            for (const auto& q : report.per_query) {
                ranks << d.graph.entity_vocab().name(q.src) << '\t'
                      << d.graph.relation_name(q.rel) << '\t'
                      << d.graph.entity_vocab().name(q.gold) << '\t' << q.rank << '\t'
                      << (q.head_direction ? "head" : "tail") << '\n';
            }
            manifest.add_output(dump_ranks);
        }
        manifest.set("metrics", report_to_json(report));
        manifest.finish("ok");
        std::cout << report.to_text();
        return 0;
    } catch (const std::exception& e) {
        manifest.finish("error", e.what());
        std::cerr << "evaluate failed: " << e.what() << '\n';
        return 1;
    }
}

int cmd_dump_rules(const fs::path& data_dir, const fs::path& ckpt_path,
                   const fs::path& out_path) {
    try {
        LoadedData d = load_all(data_dir);
        lrgcn::Checkpoint ckpt = lrgcn::load_checkpoint(ckpt_path);
        std::ofstream out(out_path);
        out << ckpt.rules.dump_tsv(d.graph);
        std::cout << "dump-rules: wrote " << ckpt.rules.size() << " rules to "
                  << out_path.string() << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "dump-rules failed: " << e.what() << '\n';
        return 1;
    }
}

int cmd_dump_paths(const fs::path& data_dir, const fs::path& ckpt_path,
                   const fs::path& out_path, const std::string& split, std::size_t limit,
                   const lrgcn::TrainConfig& cfg) {
    try {
        LoadedData d = load_all(data_dir);
        lrgcn::Checkpoint ckpt = lrgcn::load_checkpoint(ckpt_path);
        std::vector<lrgcn::Triple> triples;
        if (split == "train") triples = d.graph.triples();
        else if (split == "valid") triples = d.dev;
        else triples = d.test;
        if (limit > 0 && triples.size() > limit) triples.resize(limit);

        std::ofstream out(out_path);
        std::size_t n_paths = 0;
        for (const auto& t : triples) {
            auto paths = lrgcn::beam_search(d.graph, ckpt.policy, {t.head, t.rel},
                                            cfg.beam_width, cfg.max_steps, cfg.action_cap);
            for (auto& p : paths) {
                lrgcn::classify(p, t.tail);
                out << lrgcn::format_path(d.graph, p) << '\n';
                ++n_paths;
            }
        }
        std::cout << "dump-paths: wrote " << n_paths << " paths to " << out_path.string()
                  << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "dump-paths failed: " << e.what() << '\n';
        return 1;
    }
}

int cmd_report_sparsity(const std::vector<std::string>& runs, const fs::path& out_path,
                        const lrgcn::TrainConfig& cfg) {
    try {
        std::ostringstream table;
        table << "dataset\tfraction\ttrain_triples\tavg_in_degree\tMRR\tHits@10\n";
        for (const std::string& spec : runs) {
            const auto colon = spec.rfind(':');
            if (colon == std::string::npos)
                throw std::runtime_error("--run expects DATA_DIR:CHECKPOINT, got " + spec);
            const fs::path data_dir = spec.substr(0, colon);
            const fs::path ckpt_path = spec.substr(colon + 1);
            LoadedData d = load_all(data_dir);
            lrgcn::Checkpoint ckpt = lrgcn::load_checkpoint(ckpt_path);
            lrgcn::EvalOptions opts;
            opts.seed = lrgcn::derive_seed(cfg.seed, "eval");
            opts.threads = cfg.threads;
            const auto report =
                lrgcn::evaluate(d.graph, d.filter, ckpt.predictor, d.test, opts);
            std::string fraction = "1.0";
            if (fs::exists(data_dir / "sparsify_meta.json")) {
                json meta;
                std::ifstream(data_dir / "sparsify_meta.json") >> meta;
                fraction = std::to_string(meta.value("fraction", 1.0));
            }
            table << d.bundle.name << '\t' << fraction << '\t' << d.graph.triples().size()
                  << '\t' << d.graph.avg_in_degree() << '\t' << report.mrr << '\t'
                  << report.hits10 << '\n';
        }
        std::ofstream(out_path) << table.str();
        std::cout << table.str();
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "report-sparsity failed: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse knowledge-graph completion with path-mined densification "
                 "and rule distillation"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir, ckpt_path, split = "test", dump_ranks;
    std::string in_dir, out_path;
    double fraction = 1.0;
    std::uint64_t sparsify_seed = 0;
    std::size_t limit = 0;
    std::vector<std::string> runs;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> threads_override;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config file (key = value lines)");
        cmd->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t s) { seed_override = s; }, "root seed override");
        cmd->add_option_function<int>(
            "--threads", [&](int t) { threads_override = t; }, "thread cap override");
    };

    auto* sp = app.add_subcommand("sparsify", "coverage-preserving train subsampling");
    sp->add_option("--in", in_dir, "input dataset dir")->required();
    sp->add_option("--out", out_dir, "output dataset dir")->required();
    sp->add_option("--fraction", fraction, "retained fraction in (0,1]")->required();
    sp->add_option("--seed", sparsify_seed, "sampling seed");

    auto* pt = app.add_subcommand("pretrain", "label-loss + REINFORCE pretraining");
    pt->add_option("--data", data_dir, "dataset dir")->required();
    pt->add_option("--out", out_dir, "output dir")->required();
    add_common(pt);

    auto* jt = app.add_subcommand("joint-train", "variational EM joint training");
    jt->add_option("--data", data_dir, "dataset dir")->required();
    jt->add_option("--ckpt", ckpt_path, "post-pretrain checkpoint")->required();
    jt->add_option("--out", out_dir, "output dir")->required();
    add_common(jt);

    auto* ev = app.add_subcommand("evaluate", "filtered link-prediction evaluation");
    ev->add_option("--data", data_dir, "dataset dir")->required();
    ev->add_option("--ckpt", ckpt_path, "checkpoint")->required();
    ev->add_option("--out", out_dir, "output dir")->required();
    ev->add_option("--split", split, "test|valid")->check(CLI::IsMember({"test", "valid"}));
    ev->add_option("--dump-ranks", dump_ranks, "write per-query ranks TSV here");
    add_common(ev);

    auto* dr = app.add_subcommand("dump-rules", "write the rule store as TSV");
    dr->add_option("--data", data_dir, "dataset dir")->required();
    dr->add_option("--ckpt", ckpt_path, "checkpoint with rules")->required();
    dr->add_option("--out", out_path, "output TSV path")->required();

    auto* dp = app.add_subcommand("dump-paths", "beam-search paths for inspection");
    dp->add_option("--data", data_dir, "dataset dir")->required();
    dp->add_option("--ckpt", ckpt_path, "checkpoint")->required();
    dp->add_option("--out", out_path, "output text path")->required();
    dp->add_option("--split", split, "train|valid|test")
        ->check(CLI::IsMember({"train", "valid", "test"}));
    dp->add_option("--limit", limit, "max queries (0 = all)");
    add_common(dp);

    auto* rs = app.add_subcommand("report-sparsity", "fraction-vs-MRR table over variants");
    rs->add_option("--run", runs, "DATA_DIR:CHECKPOINT (repeatable)")->required();
    rs->add_option("--out", out_path, "output table path")->required();
    add_common(rs);

    CLI11_PARSE(app, argc, argv);

    try {
        const lrgcn::TrainConfig cfg =
            resolve_config(config_path, seed_override, threads_override);
        if (sp->parsed()) return cmd_sparsify(in_dir, out_dir, fraction, sparsify_seed);
        if (pt->parsed()) return cmd_pretrain(data_dir, out_dir, cfg);
        if (jt->parsed()) return cmd_joint_train(data_dir, ckpt_path, out_dir, cfg);
        if (ev->parsed())
            return cmd_evaluate(data_dir, ckpt_path, out_dir, split, dump_ranks, cfg);
        if (dr->parsed()) return cmd_dump_rules(data_dir, ckpt_path, out_path);
        if (dp->parsed())
            return cmd_dump_paths(data_dir, ckpt_path, out_path, split, limit, cfg);
        if (rs->parsed()) return cmd_report_sparsity(runs, out_path, cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
