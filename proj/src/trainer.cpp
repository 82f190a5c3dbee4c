#include "lrgcn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

#include "lrgcn/log.hpp"

namespace lrgcn {

std::vector<TrainQuery> make_queries(const KnowledgeGraph& g) {
    std::vector<TrainQuery> out;
    out.reserve(g.triples().size() * 2);
    for (const Triple& t : g.triples()) {
        out.push_back({t.head, t.rel, t.tail});
        out.push_back({t.tail, g.inverse(t.rel), t.head});
    }
    return out;
}

std::vector<VirtualTriple> build_densified_triples(std::span<const ReasoningPath> paths) {
    std::vector<VirtualTriple> out;
    std::set<std::tuple<EntityId, EntityId, std::vector<RelationId>>> seen;
    auto emit = [&](EntityId src, RelationId query_rel, std::vector<RelationId> body,
                    EntityId target) {
        if (seen.emplace(src, target, body).second)
            out.push_back({src, query_rel, std::move(body), target});
    };

    for (const ReasoningPath& p : paths) {
        const std::size_t n_steps = p.steps.size();
        if (n_steps == 0) continue;
        if (p.positive) {
            std::vector<RelationId> body(n_steps);
            for (std::size_t i = 0; i < n_steps; ++i) body[i] = p.steps[i].rel;
            emit(p.source, p.query_rel, std::move(body), p.terminal);
        }
        // Prefix segments over entities e_1..e_n, n = n_steps + 1: indices
        // i = 2..n-2 give (e_s, r_1..r_i, e_{i+1}), where e_{i+1} is the
        // destination of step i.
        for (std::size_t i = 2; i + 1 <= n_steps; ++i) {
            std::vector<RelationId> body(i);
            for (std::size_t k = 0; k < i; ++k) body[k] = p.steps[k].rel;
            emit(p.source, p.query_rel, std::move(body), p.steps[i - 1].dst);
        }
    }
    return out;
}

std::vector<EStepTarget> build_estep_targets(std::span<const ReasoningPath> neg_paths,
                                             RuleStore& rules, double init_rule_weight) {
    std::vector<EStepTarget> out;
    for (const ReasoningPath& p : neg_paths) {
        if (p.steps.empty()) continue;
        const auto key = induce_rule(p);
        if (!key) continue;
        const Rule& rule = rules.get_or_insert(*key, init_rule_weight);
        const double weight = rule.weight * p.prior_weight();
        out.push_back({p.source, p.query_rel, p.terminal, weight});
        EntityId src = p.source;
        for (const PathStep& s : p.steps) {
            out.push_back({src, s.rel, s.dst, weight});
            src = s.dst;
        }
    }
    return out;
}

namespace {

struct HarvestedPath {
    ReasoningPath path;
    std::optional<std::size_t> rule_idx;
};

struct BatchHarvest {
    std::vector<HarvestedPath> paths;
    std::size_t positives = 0;
};

BatchHarvest harvest_batch(const KnowledgeGraph& g, const PolicyParams& theta,
                           RuleStore& rules, std::span<const TrainQuery> batch,
                           const TrainConfig& cfg, Rng& conf_rng) {
    BatchHarvest h;
    for (const TrainQuery& q : batch) {
        auto paths = beam_search(g, theta, {q.src, q.rel}, cfg.beam_width, cfg.max_steps,
                                 cfg.action_cap);
        for (ReasoningPath& p : paths) {
            if (p.steps.empty()) continue;
            classify(p, q.gold);
            h.positives += p.positive;
            HarvestedPath hp{std::move(p), std::nullopt};
            if (auto key = induce_rule(hp.path)) {
                if (!rules.find(*key)) {
                    const double w0 =
                        cfg.rule_init == RuleInit::Empirical
                            ? empirical_rule_confidence(g, *key, cfg.rule_init_samples,
                                                        conf_rng)
                            : cfg.init_rule_weight;
                    rules.get_or_insert(*key, w0);
                }
                hp.rule_idx = rules.index_of(*key);
            }
            h.paths.push_back(std::move(hp));
        }
    }
    return h;
}

EpochStats run_epoch(const KnowledgeGraph& g, PredictorParams& phi,
                     const PolicyParams* theta, RuleStore* rules,
                     std::span<const TrainQuery> queries, const TrainConfig& cfg,
                     Rng& shuffle_rng, SgdState& opt) {
    EpochStats stats;
    if (queries.empty()) return stats;

    std::vector<std::size_t> order(queries.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[shuffle_rng.next_index(i)]);

    PredictorGrads grads = PredictorGrads::zeros_like(phi);
    const std::size_t bs = std::max<std::size_t>(1, cfg.batch_size);
    Rng conf_rng(derive_seed(cfg.seed, "rule-confidence"));

    for (std::size_t start = 0; start < order.size(); start += bs) {
        const std::size_t end = std::min(order.size(), start + bs);
        LossSpec spec;
        spec.beta = cfg.beta;
        spec.gamma = cfg.gamma;
        spec.lambda = cfg.lambda;
        spec.label_smoothing = cfg.label_smoothing;
        spec.labels.reserve(end - start);
        for (std::size_t i = start; i < end; ++i) {
            const TrainQuery& q = queries[order[i]];
            spec.labels.push_back({q.src, q.rel, q.gold});
        }

        BatchHarvest harvest;
        if (theta && rules) {
            std::vector<TrainQuery> batch_queries;
            batch_queries.reserve(end - start);
            for (std::size_t i = start; i < end; ++i)
                batch_queries.push_back(queries[order[i]]);
            harvest = harvest_batch(g, *theta, *rules, batch_queries, cfg, conf_rng);
            stats.paths += harvest.paths.size();
            stats.positive_paths += harvest.positives;

            std::vector<ReasoningPath> all;
            all.reserve(harvest.paths.size());
            for (const HarvestedPath& hp : harvest.paths) all.push_back(hp.path);
            spec.virtual_triples = build_densified_triples(all);

            std::vector<ReasoningPath> neg;
            for (const HarvestedPath& hp : harvest.paths)
                if (!hp.path.positive) neg.push_back(hp.path);
            spec.estep_targets = build_estep_targets(neg, *rules, cfg.init_rule_weight);
        }

        // E-step: one gradient step with theta and rule weights frozen.
        const LossBreakdown b = combined_loss_and_gradients(g, phi, spec, grads);
        if (!std::isfinite(b.total))
            throw std::runtime_error("train epoch: non-finite loss at batch " +
                                     std::to_string(stats.batches));
        sgd_step(phi, grads, cfg.lr, opt);
        stats.label_loss += b.label;
        stats.den_loss += b.den;
        stats.elbo_loss += b.elbo;
        ++stats.batches;

        // M-step: per-rule gradients from negative paths, averaged over the
        // batch, applied in rule insertion order against post-E-step
        // predictor probabilities.
        if (theta && rules) {
            std::map<std::size_t, std::pair<double, std::size_t>> rule_grads;
            std::optional<Encoded> enc;
            std::unordered_map<std::uint64_t, std::vector<double>> prob_cache;
            for (const HarvestedPath& hp : harvest.paths) {
                if (hp.path.positive || !hp.rule_idx) continue;
                if (!enc) enc = encode(g, phi);
                const std::uint64_t qkey =
                    (static_cast<std::uint64_t>(hp.path.source) << 32) |
                    hp.path.query_rel;
                auto it = prob_cache.find(qkey);
                if (it == prob_cache.end()) {
                    QueryScore qs = forward_encoded(*enc, hp.path.source,
                                                    enc->h_rel.row_span(hp.path.query_rel));
                    it = prob_cache.emplace(qkey, std::move(qs.probs)).first;
                }
                const double p_target = it->second[hp.path.terminal];
                const Rule& rule = rules->at(*hp.rule_idx);
                const double grad =
                    p_target - path_likelihood(rule, hp.path.prior_weight());
                auto& acc = rule_grads[*hp.rule_idx];
                acc.first += grad;
                acc.second += 1;
            }
            for (const auto& [idx, acc] : rule_grads) {
                Rule& rule = rules->at(idx);
                rule.weight = std::clamp(
                    rule.weight + cfg.lr_rule * acc.first / static_cast<double>(acc.second),
                    0.0, 1.0);
                rule.update_count += acc.second;
                stats.rule_updates += acc.second;
            }
        }
    }
    const auto nb = static_cast<double>(std::max<std::size_t>(1, stats.batches));
    stats.label_loss /= nb;
    stats.den_loss /= nb;
    stats.elbo_loss /= nb;
    return stats;
}

}  // namespace

EpochStats label_epoch(const KnowledgeGraph& g, PredictorParams& phi,
                       std::span<const TrainQuery> queries, const TrainConfig& cfg,
                       Rng& shuffle_rng, SgdState& opt) {
    return run_epoch(g, phi, nullptr, nullptr, queries, cfg, shuffle_rng, opt);
}

EpochStats em_epoch(const KnowledgeGraph& g, PredictorParams& phi,
                    const PolicyParams& theta, RuleStore& rules,
                    std::span<const TrainQuery> queries, const TrainConfig& cfg,
                    Rng& shuffle_rng, SgdState& opt) {
    return run_epoch(g, phi, &theta, &rules, queries, cfg, shuffle_rng, opt);
}

namespace {

double run_dev_eval(const KnowledgeGraph& g, const PredictorParams& phi,
                    std::span<const Triple> dev, const FilterIndex& filter,
                    const TrainConfig& cfg, std::uint64_t epoch, EpochLog& log) {
    if (dev.empty()) return -1.0;
    EvalOptions opts;
    opts.seed = derive_seed(cfg.seed, "dev-eval", epoch);
    opts.threads = cfg.threads;
    const RankingReport report = evaluate(g, filter, phi, dev, opts);
    log.dev_mrr = report.mrr;
    log.dev_hits10 = report.hits10;
    return report.mrr;
}

}  // namespace

TrainOutcome pretrain_gnn(const KnowledgeGraph& g, PredictorParams& phi,
                          std::span<const TrainQuery> queries,
                          std::span<const Triple> dev, const FilterIndex& filter,
                          const TrainConfig& cfg) {
    TrainOutcome out;
    Rng shuffle(derive_seed(cfg.seed, "gnn-shuffle"));
    SgdState opt;
    opt.momentum = cfg.momentum;
    PredictorParams best = phi;
    double best_mrr = -1.0;
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs_pretrain_gnn; ++epoch) {
        EpochLog log;
        log.epoch = epoch;
        log.stats = label_epoch(g, phi, queries, cfg, shuffle, opt);
        const double mrr = run_dev_eval(g, phi, dev, filter, cfg, epoch, log);
        out.log.push_back(log);
        ++out.epochs_run;
        if (mrr >= 0.0) {
            if (mrr > best_mrr) {
                best_mrr = mrr;
                best = phi;
                since_best = 0;
            } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
                log_info("pretrain_gnn: dev MRR stalled for %zu epochs, stopping at %zu",
                         cfg.patience, epoch + 1);
                break;
            }
        }
    }
    if (best_mrr >= 0.0 && !dev.empty()) {
        phi = best;
        out.best_dev_mrr = best_mrr;
    }
    return out;
}

TrainOutcome pretrain_policy(const KnowledgeGraph& g, PolicyParams& theta,
                             std::span<const TrainQuery> queries,
                             const TrainConfig& cfg) {
    TrainOutcome out;
    if (queries.empty()) return out;
    Rng shuffle(derive_seed(cfg.seed, "rl-shuffle"));
    Rng sample(derive_seed(cfg.seed, "rl-sample"));
    ReinforceState state;
    ReinforceConfig rcfg;
    rcfg.rollouts_per_query = cfg.rollouts_per_query;
    rcfg.max_steps = cfg.max_steps;
    rcfg.action_cap = cfg.action_cap;
    rcfg.entropy_coef = cfg.entropy_coef;

    std::vector<std::pair<Query, EntityId>> pool(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i)
        pool[i] = {{queries[i].src, queries[i].rel}, queries[i].gold};

    const std::size_t bs = std::max<std::size_t>(1, cfg.batch_size);
    for (std::size_t epoch = 0; epoch < cfg.epochs_pretrain_rl; ++epoch) {
        for (std::size_t i = pool.size(); i > 1; --i)
            std::swap(pool[i - 1], pool[shuffle.next_index(i)]);
        double reward = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < pool.size(); start += bs) {
            const std::size_t end = std::min(pool.size(), start + bs);
            const auto st = reinforce_update(
                g, theta, std::span(pool).subspan(start, end - start), cfg.lr_policy,
                state, rcfg, sample);
            reward += st.mean_reward;
            ++batches;
        }
        EpochLog log;
        log.epoch = epoch;
        log.stats.label_loss = -reward / static_cast<double>(std::max<std::size_t>(1, batches));
        out.log.push_back(log);
        ++out.epochs_run;
        log_debug("pretrain_policy epoch %zu mean reward %.4f", epoch,
                  reward / static_cast<double>(std::max<std::size_t>(1, batches)));
    }
    return out;
}

TrainOutcome joint_train(const KnowledgeGraph& g, PredictorParams& phi,
                         const PolicyParams& theta, RuleStore& rules,
                         std::span<const TrainQuery> queries, std::span<const Triple> dev,
                         const FilterIndex& filter, const TrainConfig& cfg) {
    TrainOutcome out;
    Rng shuffle(derive_seed(cfg.seed, "joint-shuffle"));
    SgdState opt;
    opt.momentum = cfg.momentum;
    PredictorParams best = phi;
    RuleStore best_rules = rules;
    double best_mrr = -1.0;
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs_joint; ++epoch) {
        EpochLog log;
        log.epoch = epoch;
        log.stats = em_epoch(g, phi, theta, rules, queries, cfg, shuffle, opt);
        log.rule_count = rules.size();
        const double mrr = run_dev_eval(g, phi, dev, filter, cfg, epoch, log);
        out.log.push_back(log);
        ++out.epochs_run;
        if (mrr >= 0.0) {
            if (mrr > best_mrr) {
                best_mrr = mrr;
                best = phi;
                best_rules = rules;
                since_best = 0;
            } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
                log_info("joint_train: dev MRR stalled for %zu epochs, stopping at %zu",
                         cfg.patience, epoch + 1);
                break;
            }
        }
    }
    if (best_mrr >= 0.0 && !dev.empty()) {
        phi = best;
        rules = best_rules;
        out.best_dev_mrr = best_mrr;
    }
    return out;
}

}  // namespace lrgcn
