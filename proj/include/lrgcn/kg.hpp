#pragma once
// In-memory knowledge graph with interned vocabularies, inverse-relation
// augmentation, and adjacency/degree queries. Immutable after build; safe
// for unrestricted concurrent reads.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace lrgcn {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
    EntityId head;
    RelationId rel;
    EntityId tail;

    bool operator==(const Triple&) const = default;
};

struct StringTriple {
    std::string head;
    std::string rel;
    std::string tail;

    bool operator==(const StringTriple&) const = default;
};

// Outgoing augmented edge: (relation, destination entity).
struct Edge {
    RelationId rel;
    EntityId dst;

    bool operator==(const Edge&) const = default;
};

// String<->dense-id map. Ids are assigned in first-seen order so identical
// input bytes always produce identical id assignment.
class Vocab {
public:
    std::uint32_t get_or_add(const std::string& name);
    std::optional<std::uint32_t> find(const std::string& name) const;
    const std::string& name(std::uint32_t id) const;
    std::size_t size() const { return names_.size(); }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t> ids_;
};

class KnowledgeGraph {
public:
    // Interns vocabularies in first-seen order, deduplicates triples, and
    // materializes one inverse edge per stored triple. Throws on empty input.
    static KnowledgeGraph build(const std::vector<StringTriple>& triples);

    std::size_t num_entities() const { return entities_.size(); }
    std::size_t num_relations() const { return num_relations_; }          // original
    std::size_t num_relations_aug() const { return 2 * num_relations_; }  // with inverses

    // inverse(r) = r + |R| if r < |R|, else r - |R|.
    RelationId inverse(RelationId r) const;
    bool is_inverse(RelationId r) const { return r >= num_relations_; }

    // Outgoing augmented edges, sorted by (relation, tail). Throws on
    // out-of-range ids.
    std::span<const Edge> neighbors(EntityId e) const;

    // Original (deduplicated, non-inverse) triples in input order.
    const std::vector<Triple>& triples() const { return triples_; }

    std::size_t num_indexed_edges() const { return 2 * triples_.size(); }
    std::size_t duplicates_dropped() const { return duplicates_dropped_; }

    // In-degree over original triples only.
    const std::vector<std::uint32_t>& in_degrees() const { return in_degree_; }
    double avg_in_degree() const;

    const Vocab& entity_vocab() const { return entities_; }
    const Vocab& relation_vocab() const { return relations_; }

    // Name of any augmented relation id; inverses are rendered as "name^-1".
    std::string relation_name(RelationId r) const;

    // Converts string triples against this graph's vocabulary. Unknown
    // entities/relations raise an error listing the offenders
    // (transductive setting).
    std::vector<Triple> to_id_triples(const std::vector<StringTriple>& triples) const;

private:
    Vocab entities_;
    Vocab relations_;
    std::size_t num_relations_ = 0;
    std::vector<Triple> triples_;
    std::vector<std::vector<Edge>> adjacency_;
    std::vector<std::uint32_t> in_degree_;
    std::size_t duplicates_dropped_ = 0;
};

// Reads a tab-separated triple file (head<TAB>relation<TAB>tail, one per
// line, UTF-8, no header). Malformed lines raise an error naming the line
// number.
std::vector<StringTriple> read_triple_file(const std::filesystem::path& path);

void write_triple_file(const std::filesystem::path& path,
                       const std::vector<StringTriple>& triples);

}  // namespace lrgcn
