#include "lrgcn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lrgcn/rng.hpp"

namespace lrgcn {

DatasetBundle load_dataset(const std::filesystem::path& dir) {
    DatasetBundle bundle;
    bundle.name = dir.filename().string();
    bundle.source_path = dir.string();
    for (const char* file : {"train.txt", "valid.txt", "test.txt"}) {
        if (!std::filesystem::exists(dir / file))
            throw std::runtime_error("load_dataset: missing " + (dir / file).string());
    }
    bundle.train = read_triple_file(dir / "train.txt");
    bundle.dev = read_triple_file(dir / "valid.txt");
    bundle.test = read_triple_file(dir / "test.txt");
    if (bundle.train.empty())
        throw std::runtime_error("load_dataset: empty train split in " + dir.string());

    // Coverage check: to_id_triples throws on unknown symbols.
    KnowledgeGraph g = KnowledgeGraph::build(bundle.train);
    g.to_id_triples(bundle.dev);
    g.to_id_triples(bundle.test);
    return bundle;
}

std::vector<StringTriple> sparsify(const std::vector<StringTriple>& train,
                                   double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::runtime_error("sparsify: fraction must be in (0, 1]");
    if (train.empty()) throw std::runtime_error("sparsify: empty input");

    const std::size_t n = train.size();
    const auto target = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(n)));
    if (fraction == 1.0) return train;

    // Intern ids in first-seen order so the covering pass iterates the same
    // way on every platform.
    Vocab entities, relations;
    std::vector<std::vector<std::size_t>> entity_incident;
    std::vector<std::vector<std::size_t>> relation_incident;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& t = train[i];
        if (t.head.empty() || t.rel.empty() || t.tail.empty())
            throw std::runtime_error("sparsify: triple with empty field");
        auto h = entities.get_or_add(t.head);
        auto r = relations.get_or_add(t.rel);
        auto tl = entities.get_or_add(t.tail);
        if (entity_incident.size() < entities.size()) entity_incident.resize(entities.size());
        if (relation_incident.size() < relations.size())
            relation_incident.resize(relations.size());
        entity_incident[h].push_back(i);
        entity_incident[tl].push_back(i);
        relation_incident[r].push_back(i);
    }

    Rng rng(seed);
    std::vector<char> chosen(n, 0);
    std::vector<char> entity_covered(entities.size(), 0);
    std::vector<char> relation_covered(relations.size(), 0);
    std::size_t chosen_count = 0;

    auto choose = [&](std::size_t idx) {
        if (chosen[idx]) return;
        chosen[idx] = 1;
        ++chosen_count;
        entity_covered[*entities.find(train[idx].head)] = 1;
        entity_covered[*entities.find(train[idx].tail)] = 1;
        relation_covered[*relations.find(train[idx].rel)] = 1;
    };

    // Covering pass: entities then relations, ascending id; each uncovered
    // item picks one uniformly random incident triple.
    for (std::size_t e = 0; e < entities.size(); ++e) {
        if (entity_covered[e]) continue;
        const auto& inc = entity_incident[e];
        choose(inc[rng.next_index(inc.size())]);
    }
    for (std::size_t r = 0; r < relations.size(); ++r) {
        if (relation_covered[r]) continue;
        const auto& inc = relation_incident[r];
        choose(inc[rng.next_index(inc.size())]);
    }

    if (chosen_count > target) {
        const double min_fraction =
            static_cast<double>(chosen_count) / static_cast<double>(n);
        throw std::runtime_error(
            "sparsify: covering set of " + std::to_string(chosen_count) +
            " triples exceeds target " + std::to_string(target) +
            "; minimum feasible fraction for this seed is " +
            std::to_string(min_fraction));
    }

    // Fill the remainder by uniform sampling without replacement.
    std::vector<std::size_t> pool;
    pool.reserve(n - chosen_count);
    for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) pool.push_back(i);
    std::size_t pool_size = pool.size();
    while (chosen_count < target) {
        const std::size_t k = rng.next_index(pool_size);
        choose(pool[k]);
        pool[k] = pool[--pool_size];
    }

    std::vector<StringTriple> out;
    out.reserve(target);
    for (std::size_t i = 0; i < n; ++i)
        if (chosen[i]) out.push_back(train[i]);
    return out;
}

}  // namespace lrgcn
