#pragma once
// Policy-guided path search over the augmented graph: sampled rollouts and
// beam search from (e_s, r_q) up to a step limit, per-step probabilities
// defining the prior path weight, and REINFORCE pretraining.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lrgcn/kg.hpp"
#include "lrgcn/linalg.hpp"
#include "lrgcn/rng.hpp"

namespace lrgcn {

// Policy parameters own private entity/relation embeddings (not shared
// with the predictor). The relation table has one extra row: the reserved
// STOP relation with id 2|R|.
struct PolicyParams {
    std::size_t dim = 0;
    std::size_t hidden = 0;
    Matrix entity;           // |E| x dim
    Matrix relation;         // (2|R| + 1) x dim
    Matrix w1;               // hidden x 4*dim
    std::vector<double> b1;  // hidden
    std::vector<double> w2;  // hidden -> one logit per action

    static PolicyParams init(std::size_t n_entities, std::size_t n_relations_aug,
                             std::size_t dim, std::size_t hidden, std::uint64_t seed);

    RelationId stop_relation() const {
        return static_cast<RelationId>(relation.rows - 1);
    }
};

struct Query {
    EntityId source;
    RelationId rel;
};

struct PathStep {
    RelationId rel;
    EntityId dst;

    bool operator==(const PathStep&) const = default;
};

struct ReasoningPath {
    EntityId source = 0;
    RelationId query_rel = 0;
    std::vector<PathStep> steps;     // graph edges only; STOP is never recorded
    std::vector<double> step_probs;  // policy probability of each chosen step
    EntityId terminal = 0;           // == source when steps is empty
    bool positive = false;

    double prior_weight() const {
        double w = 1.0;
        for (double p : step_probs) w *= p;
        return w;
    }
};

// An action is an outgoing augmented edge or STOP (self-loop on the
// reserved relation). STOP is always present and always last.
struct Action {
    RelationId rel;
    EntityId dst;
    bool is_stop;
};

struct ActionDist {
    std::vector<Action> actions;
    std::vector<double> logits;
    std::vector<double> probs;  // softmax over logits, sums to 1
};

// Softmax policy over the outgoing edges of `current` plus STOP. When the
// out-degree exceeds `action_cap`, only the top-cap edges by logit are
// kept (STOP survives regardless).
ActionDist action_distribution(const KnowledgeGraph& g, const PolicyParams& theta,
                               RelationId query_rel, EntityId current,
                               std::size_t action_cap = 256);

// Samples actions until STOP or max_steps. The STOP decision terminates
// the walk and its probability is not part of the prior weight.
ReasoningPath rollout(const KnowledgeGraph& g, const PolicyParams& theta, Query q,
                      Rng& rng, std::size_t max_steps = 3, std::size_t action_cap = 256);

// Deterministic counterpart of rollouts: beam over cumulative step
// log-probability, emitting a terminal candidate at every depth. Results
// are deduplicated on (steps, terminal) and sorted by prior weight
// descending (ties broken lexicographically). Never returns empty paths.
std::vector<ReasoningPath> beam_search(const KnowledgeGraph& g, const PolicyParams& theta,
                                       Query q, std::size_t beam_width,
                                       std::size_t max_steps = 3,
                                       std::size_t action_cap = 256);

// Positive iff the path terminates on the gold entity.
bool classify(ReasoningPath& path, EntityId gold);

struct ReinforceState {
    double baseline = 0.0;  // moving average of rewards
    double update_tau = 0.1;
};

struct ReinforceConfig {
    std::size_t rollouts_per_query = 8;
    std::size_t max_steps = 3;
    std::size_t action_cap = 256;
    double entropy_coef = 0.0;
};

struct ReinforceStats {
    double mean_reward = 0.0;
    std::size_t trajectories = 0;
};

// One REINFORCE ascent step on expected terminal reward (1 if the rollout
// ends on gold, else 0) with a moving-average baseline.
ReinforceStats reinforce_update(const KnowledgeGraph& g, PolicyParams& theta,
                                std::span<const std::pair<Query, EntityId>> batch,
                                double lr, ReinforceState& state,
                                const ReinforceConfig& cfg, Rng& rng);

// One path per line: e_s -[r1]-> e2 -[r2]-> ... | prior=P | polarity=+/-
std::string format_path(const KnowledgeGraph& g, const ReasoningPath& path);

}  // namespace lrgcn
