#pragma once
// Embedding-based link predictor: one composition aggregation layer over
// the augmented graph, a trilinear scorer producing per-entity sigmoid
// probabilities, composite-relation attention, and the three training
// losses with exact analytic gradients.

#include <cstdint>
#include <span>
#include <vector>

#include "lrgcn/kg.hpp"
#include "lrgcn/linalg.hpp"

namespace lrgcn {

enum class CompositionOp : std::uint8_t { Multiply = 0, Subtract = 1 };

struct PredictorParams {
    std::size_t dim = 0;
    CompositionOp comp = CompositionOp::Multiply;
    Matrix entity;               // |E| x d
    Matrix relation;             // 2|R| x d
    Matrix w_comp;               // d x d, message transform
    Matrix w_self;               // d x d, self-loop transform
    Matrix w_rel;                // d x d, relation transform
    std::vector<double> w_attn;  // 2d, composite-relation attention

    static PredictorParams init(std::size_t n_entities, std::size_t n_relations_aug,
                                std::size_t dim, CompositionOp comp, std::uint64_t seed);
};

// Same shapes as the trainable tables of PredictorParams.
struct PredictorGrads {
    Matrix entity;
    Matrix relation;
    Matrix w_comp;
    Matrix w_self;
    Matrix w_rel;
    std::vector<double> w_attn;

    static PredictorGrads zeros_like(const PredictorParams& p);
    void zero();
};

// Encoded entity/relation tables:
//   h_v = tanh(mean over incoming augmented edges (u, r) of
//              W_comp (e_u o rho_r)  +  W_self e_v)
//   h_r = W_rel rho_r
// where o is the configured composition. Entities with no edges use only
// the self term.
struct Encoded {
    Matrix h_ent;  // |E| x d, post-tanh
    Matrix h_rel;  // 2|R| x d
};

Encoded encode(const KnowledgeGraph& g, const PredictorParams& p);

struct QueryScore {
    EntityId source = 0;
    RelationId rel = 0;
    std::vector<double> scores;  // raw trilinear score per entity
    std::vector<double> probs;   // sigmoid(score), strictly in (0, 1)
};

// score_o = sum_k h_src[k] * rel_emb[k] * h_o[k] for every entity o.
QueryScore forward_encoded(const Encoded& enc, EntityId src,
                           std::span<const double> rel_emb);

QueryScore forward(const KnowledgeGraph& g, const PredictorParams& p, EntityId src,
                   RelationId rel);

QueryScore forward_with_relation_embedding(const KnowledgeGraph& g,
                                           const PredictorParams& p, EntityId src,
                                           std::span<const double> rel_emb);

// Attention-composed embedding of a relation chain r_1..r_i under query
// relation r_q. Raw attention logits pass through LeakyReLU (slope 0.01)
// and are normalized after shifting by the minimum so weights stay
// nonnegative and sum to one.
std::vector<double> composite_relation_embedding(const PredictorParams& p,
                                                 RelationId query_rel,
                                                 std::span<const RelationId> body);

// Mean over entities of binary cross-entropy against the one-hot gold
// indicator; label smoothing moves targets to (1-eps)*onehot + eps/|E|.
// Probabilities are clamped to [1e-7, 1-1e-7] before logs.
double label_loss(const QueryScore& score, EntityId gold, double label_smoothing = 0.0);

struct VirtualTriple {
    EntityId source;
    RelationId query_rel;  // attention context for the composite body
    std::vector<RelationId> body;
    EntityId target;

    bool operator==(const VirtualTriple&) const = default;
};

// Mean of label_loss over virtual triples scored with composite relation
// embeddings; empty list yields 0.
double den_loss(const KnowledgeGraph& g, const PredictorParams& p,
                std::span<const VirtualTriple> virtual_triples,
                double label_smoothing = 0.0);

struct EStepTarget {
    EntityId src;
    RelationId rel;
    EntityId gold;
    double weight;  // w_rule * path prior, constant w.r.t. phi
};

// sum_t weight_t * (-log p(gold_t)) + lambda * sum_t sum_o q_o log q_o,
// where q is the per-query probability vector renormalized to sum 1.
double elbo_loss(const KnowledgeGraph& g, const PredictorParams& p,
                 std::span<const EStepTarget> targets, double lambda);

struct LabelTarget {
    EntityId src;
    RelationId rel;
    EntityId gold;
};

// Mini-batch loss: mean label loss + beta * den loss + gamma * elbo loss.
struct LossSpec {
    std::vector<LabelTarget> labels;
    std::vector<VirtualTriple> virtual_triples;
    std::vector<EStepTarget> estep_targets;
    double beta = 0.0;
    double gamma = 0.0;
    double lambda = 0.0;
    double label_smoothing = 0.0;
};

struct LossBreakdown {
    double label = 0.0;
    double den = 0.0;
    double elbo = 0.0;
    double total = 0.0;
};

LossBreakdown combined_loss(const KnowledgeGraph& g, const PredictorParams& p,
                            const LossSpec& spec);

// Evaluates the combined loss and the exact gradient of every parameter
// table. Throws if any gradient block is non-finite, naming the block.
LossBreakdown combined_loss_and_gradients(const KnowledgeGraph& g,
                                          const PredictorParams& p, const LossSpec& spec,
                                          PredictorGrads& grads);

struct SgdState {
    double momentum = 0.0;
    PredictorGrads velocity;
};

// In-place first-order update; plain SGD when momentum is 0. Throws on a
// non-finite update.
void sgd_step(PredictorParams& p, const PredictorGrads& grads, double lr);
void sgd_step(PredictorParams& p, const PredictorGrads& grads, double lr, SgdState& state);

}  // namespace lrgcn
