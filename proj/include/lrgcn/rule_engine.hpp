#pragma once
// Rule induction from reasoning paths with loop removal, a real-time
// updated rule store with weights in [0, 1], the per-path likelihood, and
// the pseudo-likelihood weight update.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lrgcn/kg.hpp"
#include "lrgcn/path_miner.hpp"
#include "lrgcn/rng.hpp"

namespace lrgcn {

struct Rule {
    std::vector<RelationId> body;  // loop-elided relation chain, length >= 1
    RelationId head;               // the query relation
    double weight = 0.5;           // clamped to [0, 1]
    std::uint64_t update_count = 0;
};

struct RuleKey {
    std::vector<RelationId> body;
    RelationId head;

    bool operator==(const RuleKey&) const = default;
};

// Canonical (body, head) extracted from a path. Returns nullopt when the
// body collapses to nothing (pure loop back to the source); such paths are
// excluded from rule accounting.
std::optional<RuleKey> induce_rule(const ReasoningPath& path);

class RuleStore {
public:
    // Existing rule for the key, or a fresh one at init_weight.
    Rule& get_or_insert(const RuleKey& key, double init_weight = 0.5);

    const Rule* find(const RuleKey& key) const;
    Rule* find(const RuleKey& key);

    std::size_t size() const { return rules_.size(); }

    // Insertion-ordered iteration.
    auto begin() { return rules_.begin(); }
    auto end() { return rules_.end(); }
    auto begin() const { return rules_.begin(); }
    auto end() const { return rules_.end(); }
    const Rule& at(std::size_t i) const { return rules_[i]; }
    Rule& at(std::size_t i) { return rules_[i]; }
    std::optional<std::size_t> index_of(const RuleKey& key) const;

    // TSV: body_rel_1,body_rel_2,...<TAB>head<TAB>weight<TAB>update_count
    std::string dump_tsv(const KnowledgeGraph& g) const;

private:
    struct KeyHash {
        std::size_t operator()(const RuleKey& k) const;
    };
    std::vector<Rule> rules_;
    std::unordered_map<RuleKey, std::size_t, KeyHash> index_;
};

// AMIE-style sampled confidence p(head | body): walks `samples` random
// groundings of the body chain over the augmented graph and returns the
// fraction whose endpoints close the head relation. Falls back to 0.5
// when no grounding completes.
double empirical_rule_confidence(const KnowledgeGraph& g, const RuleKey& key,
                                 std::size_t samples, Rng& rng);

// sigmoid(weight * prior_weight); prior_weight must lie in (0, 1].
double path_likelihood(const Rule& rule, double prior_weight);

// exp(weight * prior_weight); the partition function is never computed.
double unnormalized_joint(const Rule& rule, double prior_weight);

// One pseudo-likelihood ascent step: weight moves toward making the path
// likelihood match p_target, clamped to [0, 1].
void m_step_update(Rule& rule, double prior_weight, double p_target, double eta_w);

}  // namespace lrgcn
