#pragma once
// Synthetic planted-rule knowledge graphs for training-dynamics tests.
//
// Construction: a background pool of noise triples (tails biased toward a
// few hub entities) is subsampled through the coverage-preserving
// sparsifier; on top of it, rule-instance groups plant the 2-hop chain
//   (a, rb0, b) and (b, rb1, c)  =>  (a, rh, c)
// with some conclusions kept in train and others held out for dev/test,
// so held-out conclusions are reachable via mined paths but unseen as
// facts. Held-out noise triples complete the dev/test splits.

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "lrgcn/dataset.hpp"
#include "lrgcn/kg.hpp"
#include "lrgcn/rng.hpp"

namespace synth {

struct SynthSpec {
    std::size_t n_entities = 322;
    std::size_t n_noise_relations = 9;
    std::size_t n_hubs = 12;
    // Entities reserved as chain intermediates and conclusion tails (never
    // touched by noise, so chain hops and planted answers stay low-degree,
    // and group heads keep a small out-degree). 0 intermediates = legacy
    // layout where chains draw from the whole entity pool.
    std::size_t n_intermediates = 100;
    std::size_t n_conclusions = 90;
    double hub_tail_bias = 0.4;
    std::size_t noise_pool = 5000;
    double train_fraction = 0.2;  // applied to the noise pool
    std::size_t n_groups = 45;    // planted rule-instance groups
    std::size_t train_chains_per_group = 2;
    std::size_t dev_conclusion_groups = 18;  // groups that also plant a dev chain
    std::size_t test_noise = 105;
    std::size_t dev_noise = 75;
    std::uint64_t seed = 1;
};

struct SynthData {
    std::vector<lrgcn::StringTriple> train;
    std::vector<lrgcn::StringTriple> dev;
    std::vector<lrgcn::StringTriple> test;
    std::size_t test_conclusions = 0;  // planted-rule share of the test split
};

inline std::string ent(std::size_t i) { return "e" + std::to_string(i); }

inline SynthData make_planted_kg(const SynthSpec& spec) {
    lrgcn::Rng rng(lrgcn::derive_seed(spec.seed, "synth-kg"));
    const std::string rb0 = "rb0", rb1 = "rb1", rh = "rh";

    auto triple_less = [](const lrgcn::StringTriple& a, const lrgcn::StringTriple& b) {
        return std::tie(a.head, a.rel, a.tail) < std::tie(b.head, b.rel, b.tail);
    };
    std::set<lrgcn::StringTriple, decltype(triple_less)> used(triple_less);

    // Entity layout with reserved pools (pooled mode):
    //   [0, hubs) | intermediates | heads (one per group) | conclusions |
    //   general (noise hosts). Legacy mode (n_intermediates == 0) draws
    //   chain entities from the whole pool.
    const bool pooled = spec.n_intermediates > 0;
    const std::size_t inter_lo = spec.n_hubs;
    const std::size_t head_lo = inter_lo + spec.n_intermediates;
    const std::size_t concl_lo = head_lo + (pooled ? spec.n_groups : 0);
    const std::size_t general_lo = pooled ? concl_lo + spec.n_conclusions : spec.n_hubs;
    if (general_lo + 2 > spec.n_entities)
        throw std::runtime_error("synth: reserved pools leave no general entities");
    auto general = [&] { return general_lo + rng.next_index(spec.n_entities - general_lo); };

    // Background noise pool; never touches the reserved pools. Hub-bound
    // tails follow a deterministic relation->hub affinity so high-degree
    // answers are easy for any trained model, keeping the hard queries at
    // the sparse end.
    std::vector<lrgcn::StringTriple> pool;
    while (pool.size() < spec.noise_pool) {
        const std::size_t h = general();
        const std::size_t r = rng.next_index(spec.n_noise_relations);
        const std::size_t t = rng.next_double() < spec.hub_tail_bias
                                  ? r % spec.n_hubs
                                  : general();
        if (h == t) continue;
        lrgcn::StringTriple triple{ent(h), "rn" + std::to_string(r), ent(t)};
        if (used.insert(triple).second) pool.push_back(std::move(triple));
    }

    // Hold out noise for dev/test before subsampling the rest.
    std::vector<lrgcn::StringTriple> held;
    for (std::size_t i = 0; i < spec.test_noise + spec.dev_noise; ++i) {
        const std::size_t k = rng.next_index(pool.size());
        held.push_back(pool[k]);
        pool[k] = pool.back();
        pool.pop_back();
    }
    std::vector<lrgcn::StringTriple> background =
        lrgcn::sparsify(pool, spec.train_fraction, lrgcn::derive_seed(spec.seed, "synth-sp"));

    // Planted rule-instance groups.
    SynthData out;
    out.train = std::move(background);
    std::vector<lrgcn::StringTriple> dev_conc, test_conc;
    std::size_t next_intermediate = 0;  // sequential with wrap, one per chain
    std::size_t next_conclusion = 0;
    auto fresh_pair = [&](std::size_t avoid) {
        std::size_t b, c;
        if (pooled) {
            b = inter_lo + next_intermediate;
            next_intermediate = (next_intermediate + 1) % spec.n_intermediates;
            c = concl_lo + next_conclusion;
            next_conclusion = (next_conclusion + 1) % spec.n_conclusions;
        } else {
            b = rng.next_index(spec.n_entities);
            while (b == avoid) b = rng.next_index(spec.n_entities);
            c = rng.next_index(spec.n_entities);
            while (c == avoid || c == b) c = rng.next_index(spec.n_entities);
        }
        return std::pair<std::size_t, std::size_t>{b, c};
    };
    for (std::size_t gidx = 0; gidx < spec.n_groups; ++gidx) {
        const std::size_t a = pooled ? head_lo + gidx : general();
        const std::size_t chains =
            spec.train_chains_per_group + 1 + (gidx < spec.dev_conclusion_groups ? 1 : 0);
        for (std::size_t cidx = 0; cidx < chains; ++cidx) {
            const auto [b, c] = fresh_pair(a);
            lrgcn::StringTriple body1{ent(a), rb0, ent(b)};
            lrgcn::StringTriple body2{ent(b), rb1, ent(c)};
            lrgcn::StringTriple concl{ent(a), rh, ent(c)};
            if (!used.insert(concl).second) continue;
            used.insert(body1);
            used.insert(body2);
            out.train.push_back(body1);
            out.train.push_back(body2);
            if (cidx < spec.train_chains_per_group) out.train.push_back(concl);
            else if (cidx == spec.train_chains_per_group) test_conc.push_back(concl);
            else dev_conc.push_back(concl);
        }
    }

    // Dedup train (body edges may repeat across groups).
    {
        std::set<lrgcn::StringTriple, decltype(triple_less)> seen(triple_less);
        std::vector<lrgcn::StringTriple> dedup;
        for (auto& t : out.train)
            if (seen.insert(t).second) dedup.push_back(t);
        out.train = std::move(dedup);
    }

    // Held-out noise is usable only when train still covers its symbols.
    std::set<std::string> train_entities, train_relations;
    for (const auto& t : out.train) {
        train_entities.insert(t.head);
        train_entities.insert(t.tail);
        train_relations.insert(t.rel);
    }
    std::vector<lrgcn::StringTriple> usable_noise;
    for (auto& t : held) {
        if (train_entities.count(t.head) && train_entities.count(t.tail) &&
            train_relations.count(t.rel))
            usable_noise.push_back(t);
    }
    const std::size_t n_test_noise = std::min(spec.test_noise, usable_noise.size());
    out.test.assign(usable_noise.begin(),
                    usable_noise.begin() + static_cast<long>(n_test_noise));
    out.dev.assign(usable_noise.begin() + static_cast<long>(n_test_noise),
                   usable_noise.end());

    // Conclusions whose chain tails survived in the train vocabulary.
    for (auto& t : test_conc) {
        if (train_entities.count(t.head) && train_entities.count(t.tail)) {
            out.test.push_back(t);
            ++out.test_conclusions;
        }
    }
    for (auto& t : dev_conc)
        if (train_entities.count(t.head) && train_entities.count(t.tail))
            out.dev.push_back(t);
    return out;
}

inline std::filesystem::path write_dataset_dir(const std::filesystem::path& dir,
                                               const SynthData& data) {
    std::filesystem::create_directories(dir);
    lrgcn::write_triple_file(dir / "train.txt", data.train);
    lrgcn::write_triple_file(dir / "valid.txt", data.dev);
    lrgcn::write_triple_file(dir / "test.txt", data.test);
    return dir;
}

inline std::filesystem::path temp_dir(const std::string& tag) {
    static std::uint64_t counter = 0;
    auto dir = std::filesystem::temp_directory_path() /
               ("lrgcn_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace synth
