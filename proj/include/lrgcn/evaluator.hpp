#pragma once
// Filtered link-prediction evaluation in both directions with the RANDOM
// tie protocol, plus in-degree bucket breakdowns.

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lrgcn/kg.hpp"
#include "lrgcn/predictor.hpp"
#include "lrgcn/rng.hpp"

namespace lrgcn {

// (source entity, relation) -> all known valid tails over the provided
// splits, with inverse-direction pairs materialized.
class FilterIndex {
public:
    void add_split(const KnowledgeGraph& g, std::span<const Triple> triples);
    const std::vector<EntityId>& valid_tails(EntityId src, RelationId rel) const;

private:
    std::unordered_map<std::uint64_t, std::vector<EntityId>> map_;
    std::vector<EntityId> empty_;
    std::uint64_t key(EntityId src, RelationId rel) const {
        return (static_cast<std::uint64_t>(src) << 32) | rel;
    }
    std::size_t num_relations_aug_ = 0;
};

// Rank of gold after removing every other known-valid entity from
// contention: 1 + #{survivors scoring strictly higher} + a uniformly
// random slot among exact score ties.
int filtered_rank(std::span<const double> scores, EntityId gold,
                  std::span<const EntityId> known_valid, Rng& rng);

struct QueryRank {
    EntityId src;
    RelationId rel;
    EntityId gold;
    int rank;
    bool head_direction;  // true when this is the (t, r^-1, ?) query
};

struct DegreeBucket {
    std::uint32_t lo;
    std::uint32_t hi;  // inclusive; UINT32_MAX = open-ended
    double mrr = 0.0;
    std::size_t count = 0;
};

struct RankingReport {
    std::vector<QueryRank> per_query;
    double mrr = 0.0;     // fraction in (0, 1]
    double hits1 = 0.0;   // percent
    double hits3 = 0.0;   // percent
    double hits10 = 0.0;  // percent
    std::vector<DegreeBucket> buckets;

    std::string to_text() const;
};

struct EvalOptions {
    std::uint64_t seed = 0;
    int threads = 1;
    // Default bucket edges by train in-degree of the gold entity.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> bucket_edges = {
        {0, 1}, {2, 3}, {4, 7}, {8, 15}, {16, UINT32_MAX}};
};

// Each split triple contributes a tail query (h, r, ?) and a head query
// (t, r^-1, ?). MRR is the mean reciprocal filtered rank; Hits@k are
// percentages.
RankingReport evaluate(const KnowledgeGraph& g, const FilterIndex& filter,
                       const PredictorParams& params, std::span<const Triple> split,
                       const EvalOptions& opts = {});

// Re-buckets an existing report against different in-degree edges.
std::vector<DegreeBucket> indegree_report(
    const RankingReport& report, const KnowledgeGraph& g,
    std::span<const std::pair<std::uint32_t, std::uint32_t>> bucket_edges);

}  // namespace lrgcn
