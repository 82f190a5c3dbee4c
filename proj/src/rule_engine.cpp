#include "lrgcn/rule_engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "lrgcn/linalg.hpp"

namespace lrgcn {

std::optional<RuleKey> induce_rule(const ReasoningPath& path) {
    if (path.steps.empty()) throw std::runtime_error("induce_rule: path has no steps");

    // Scan the entity sequence left to right keeping a growing prefix; a
    // revisit truncates back to the first occurrence, deleting the loop
    // span and its relations.
    std::vector<EntityId> ents{path.source};
    std::vector<RelationId> rels;
    for (const PathStep& s : path.steps) {
        auto it = std::find(ents.begin(), ents.end(), s.dst);
        if (it != ents.end()) {
            const std::size_t keep = static_cast<std::size_t>(it - ents.begin()) + 1;
            ents.resize(keep);
            rels.resize(keep - 1);
        } else {
            ents.push_back(s.dst);
            rels.push_back(s.rel);
        }
    }
    if (rels.empty()) return std::nullopt;  // pure loop back to the source
    return RuleKey{std::move(rels), path.query_rel};
}

std::size_t RuleStore::KeyHash::operator()(const RuleKey& k) const {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ k.head;
    for (RelationId r : k.body) {
        h ^= r + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
}

Rule& RuleStore::get_or_insert(const RuleKey& key, double init_weight) {
    auto it = index_.find(key);
    if (it != index_.end()) return rules_[it->second];
    Rule r;
    r.body = key.body;
    r.head = key.head;
    r.weight = init_weight;
    rules_.push_back(std::move(r));
    index_.emplace(key, rules_.size() - 1);
    return rules_.back();
}

const Rule* RuleStore::find(const RuleKey& key) const {
    auto it = index_.find(key);
    return it == index_.end() ? nullptr : &rules_[it->second];
}

Rule* RuleStore::find(const RuleKey& key) {
    auto it = index_.find(key);
    return it == index_.end() ? nullptr : &rules_[it->second];
}

std::optional<std::size_t> RuleStore::index_of(const RuleKey& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::string RuleStore::dump_tsv(const KnowledgeGraph& g) const {
    std::ostringstream os;
    for (const Rule& r : rules_) {
        for (std::size_t i = 0; i < r.body.size(); ++i) {
            if (i) os << ',';
            os << g.relation_name(r.body[i]);
        }
        os << '\t' << g.relation_name(r.head) << '\t' << r.weight << '\t'
           << r.update_count << '\n';
    }
    return os.str();
}

double empirical_rule_confidence(const KnowledgeGraph& g, const RuleKey& key,
                                 std::size_t samples, Rng& rng) {
    // Uniform groundings of the first body atom.
    std::vector<std::pair<EntityId, EntityId>> starts;
    for (EntityId e = 0; e < g.num_entities(); ++e)
        for (const Edge& edge : g.neighbors(e))
            if (edge.rel == key.body.front()) starts.push_back({e, edge.dst});
    if (starts.empty()) return 0.5;

    std::size_t completed = 0, closed = 0;
    std::vector<EntityId> matches;
    for (std::size_t s = 0; s < samples; ++s) {
        auto [origin, cur] = starts[rng.next_index(starts.size())];
        bool alive = true;
        for (std::size_t j = 1; j < key.body.size() && alive; ++j) {
            matches.clear();
            for (const Edge& edge : g.neighbors(cur))
                if (edge.rel == key.body[j]) matches.push_back(edge.dst);
            if (matches.empty()) alive = false;
            else cur = matches[rng.next_index(matches.size())];
        }
        if (!alive) continue;
        ++completed;
        for (const Edge& edge : g.neighbors(origin)) {
            if (edge.rel == key.head && edge.dst == cur) {
                ++closed;
                break;
            }
        }
    }
    if (completed == 0) return 0.5;
    return static_cast<double>(closed) / static_cast<double>(completed);
}

double path_likelihood(const Rule& rule, double prior_weight) {
    if (!(prior_weight > 0.0 && prior_weight <= 1.0))
        throw std::runtime_error("path_likelihood: prior weight must be in (0, 1]");
    return sigmoid(rule.weight * prior_weight);
}

double unnormalized_joint(const Rule& rule, double prior_weight) {
    return std::exp(rule.weight * prior_weight);
}

void m_step_update(Rule& rule, double prior_weight, double p_target, double eta_w) {
    if (!(p_target >= 0.0 && p_target <= 1.0))
        throw std::runtime_error("m_step_update: target must be in [0, 1]");
    const double grad = p_target - path_likelihood(rule, prior_weight);
    rule.weight = std::clamp(rule.weight + eta_w * grad, 0.0, 1.0);
    ++rule.update_count;
}

}  // namespace lrgcn
