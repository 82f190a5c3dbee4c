#pragma once
// Orchestration of pretraining and the variational EM loop: harvest paths
// per training query, split by polarity, build densified virtual triples
// and E-step distillation targets, take one predictor gradient step, then
// apply the pseudo-likelihood M-step to rule weights.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lrgcn/evaluator.hpp"
#include "lrgcn/kg.hpp"
#include "lrgcn/path_miner.hpp"
#include "lrgcn/predictor.hpp"
#include "lrgcn/rng.hpp"
#include "lrgcn/rule_engine.hpp"

namespace lrgcn {

enum class RuleInit : std::uint8_t {
    Fixed,      // fresh rules start at init_rule_weight
    Empirical,  // fresh rules start at a sampled AMIE-style confidence
};

struct TrainConfig {
    double beta = 1.0;    // densification loss weight
    double gamma = 1.0;   // distillation loss weight
    double lambda = 0.0;  // entropy constraint inside the elbo loss
    double lr = 0.005;
    double lr_rule = 0.5;  // eta_w, M-step step size
    double lr_policy = 0.05;
    double label_smoothing = 0.1;
    double momentum = 0.0;
    double entropy_coef = 0.0;  // REINFORCE entropy bonus
    double init_rule_weight = 0.5;
    RuleInit rule_init = RuleInit::Fixed;
    std::size_t rule_init_samples = 64;
    std::size_t batch_size = 128;
    std::size_t beam_width = 4;
    std::size_t max_steps = 3;
    std::size_t action_cap = 256;
    std::size_t dim = 64;
    std::size_t policy_dim = 16;
    std::size_t policy_hidden = 32;
    std::size_t rollouts_per_query = 8;
    std::size_t epochs_pretrain_gnn = 50;
    std::size_t epochs_pretrain_rl = 10;
    std::size_t epochs_joint = 20;
    std::size_t patience = 0;  // dev-MRR patience; 0 disables early stop
    std::uint64_t seed = 42;
    CompositionOp composition_op = CompositionOp::Multiply;
    int threads = 1;
};

struct TrainQuery {
    EntityId src;
    RelationId rel;
    EntityId gold;
};

// Both-direction training queries: (h, r) -> t and (t, r^-1) -> h for
// every stored triple.
std::vector<TrainQuery> make_queries(const KnowledgeGraph& g);

// Virtual triples from a batch of classified paths: the full-path triple
// for every positive path with at least one step, plus prefix segments
// (source, r_1..r_i, e_{i+1}) for i = 2..n-2 from every path with at
// least three entities. Deduplicated on (source, body, target).
std::vector<VirtualTriple> build_densified_triples(std::span<const ReasoningPath> paths);

// Distillation targets from negative paths: one conclusion target
// ((e_s, r_q) -> e_n) plus one target per path fact, all weighted by
// rule_weight * prior. Paths whose rule body collapses contribute nothing.
std::vector<EStepTarget> build_estep_targets(std::span<const ReasoningPath> neg_paths,
                                             RuleStore& rules,
                                             double init_rule_weight = 0.5);

struct EpochStats {
    double label_loss = 0.0;
    double den_loss = 0.0;
    double elbo_loss = 0.0;
    std::size_t batches = 0;
    std::size_t paths = 0;
    std::size_t positive_paths = 0;
    std::size_t rule_updates = 0;
};

// One pass of plain label-loss training over shuffled queries.
EpochStats label_epoch(const KnowledgeGraph& g, PredictorParams& phi,
                       std::span<const TrainQuery> queries, const TrainConfig& cfg,
                       Rng& shuffle_rng, SgdState& opt);

// One variational EM pass: per batch, beam-search paths, classify, induce
// rules, take an E-step on label + beta*den + gamma*elbo with theta and
// rule weights frozen, then M-step the rule weights of negative paths
// against post-step predictor probabilities. theta is never updated here.
EpochStats em_epoch(const KnowledgeGraph& g, PredictorParams& phi,
                    const PolicyParams& theta, RuleStore& rules,
                    std::span<const TrainQuery> queries, const TrainConfig& cfg,
                    Rng& shuffle_rng, SgdState& opt);

struct EpochLog {
    std::size_t epoch = 0;
    EpochStats stats;
    double dev_mrr = -1.0;  // negative when no dev evaluation ran
    double dev_hits10 = 0.0;
    std::size_t rule_count = 0;
};

struct TrainOutcome {
    std::vector<EpochLog> log;
    double best_dev_mrr = -1.0;
    std::size_t epochs_run = 0;
};

// Label-loss pretraining with optional dev-MRR patience; keeps the best
// dev checkpoint when a dev split is supplied.
TrainOutcome pretrain_gnn(const KnowledgeGraph& g, PredictorParams& phi,
                          std::span<const TrainQuery> queries,
                          std::span<const Triple> dev, const FilterIndex& filter,
                          const TrainConfig& cfg);

// REINFORCE pretraining of the path policy.
TrainOutcome pretrain_policy(const KnowledgeGraph& g, PolicyParams& theta,
                             std::span<const TrainQuery> queries,
                             const TrainConfig& cfg);

// Joint EM training; keeps the best dev checkpoint (predictor and rule
// store) when a dev split is supplied.
TrainOutcome joint_train(const KnowledgeGraph& g, PredictorParams& phi,
                         const PolicyParams& theta, RuleStore& rules,
                         std::span<const TrainQuery> queries, std::span<const Triple> dev,
                         const FilterIndex& filter, const TrainConfig& cfg);

}  // namespace lrgcn
