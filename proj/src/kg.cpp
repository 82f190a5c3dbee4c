#include "lrgcn/kg.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "lrgcn/log.hpp"

namespace lrgcn {

std::uint32_t Vocab::get_or_add(const std::string& name) {
    auto it = ids_.find(name);
    if (it != ids_.end()) return it->second;
    auto id = static_cast<std::uint32_t>(names_.size());
    names_.push_back(name);
    ids_.emplace(name, id);
    return id;
}

std::optional<std::uint32_t> Vocab::find(const std::string& name) const {
    auto it = ids_.find(name);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocab::name(std::uint32_t id) const {
    if (id >= names_.size()) throw std::out_of_range("vocab id out of range");
    return names_[id];
}

namespace {
struct TripleHash {
    std::size_t operator()(const Triple& t) const {
        std::uint64_t h = t.head;
        h = h * 0x9e3779b97f4a7c15ULL + t.rel;
        h = h * 0x9e3779b97f4a7c15ULL + t.tail;
        h ^= h >> 29;
        return static_cast<std::size_t>(h);
    }
};
}  // namespace

KnowledgeGraph KnowledgeGraph::build(const std::vector<StringTriple>& triples) {
    if (triples.empty()) throw std::runtime_error("build_graph: empty input");

    KnowledgeGraph g;
    for (const auto& st : triples) {
        if (st.head.empty() || st.rel.empty() || st.tail.empty())
            throw std::runtime_error("build_graph: triple with empty field");
        g.entities_.get_or_add(st.head);
        g.relations_.get_or_add(st.rel);
        g.entities_.get_or_add(st.tail);
    }
    g.num_relations_ = g.relations_.size();

    std::unordered_set<Triple, TripleHash> seen;
    seen.reserve(triples.size() * 2);
    g.triples_.reserve(triples.size());
    for (const auto& st : triples) {
        Triple t{*g.entities_.find(st.head), *g.relations_.find(st.rel),
                 *g.entities_.find(st.tail)};
        if (!seen.insert(t).second) {
            ++g.duplicates_dropped_;
            continue;
        }
        g.triples_.push_back(t);
    }
    if (g.duplicates_dropped_ > 0)
        log_info("build_graph: dropped %zu duplicate triples", g.duplicates_dropped_);

    g.adjacency_.assign(g.entities_.size(), {});
    g.in_degree_.assign(g.entities_.size(), 0);
    for (const Triple& t : g.triples_) {
        g.adjacency_[t.head].push_back({t.rel, t.tail});
        g.adjacency_[t.tail].push_back({g.inverse(t.rel), t.head});
        ++g.in_degree_[t.tail];
    }
    for (auto& edges : g.adjacency_) {
        std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
            return a.rel != b.rel ? a.rel < b.rel : a.dst < b.dst;
        });
    }
    return g;
}

RelationId KnowledgeGraph::inverse(RelationId r) const {
    if (r >= num_relations_aug()) throw std::out_of_range("relation id out of range");
    return r < num_relations_ ? r + static_cast<RelationId>(num_relations_)
                              : r - static_cast<RelationId>(num_relations_);
}

std::span<const Edge> KnowledgeGraph::neighbors(EntityId e) const {
    if (e >= adjacency_.size()) throw std::out_of_range("entity id out of range");
    return adjacency_[e];
}

double KnowledgeGraph::avg_in_degree() const {
    return static_cast<double>(triples_.size()) / static_cast<double>(num_entities());
}

std::string KnowledgeGraph::relation_name(RelationId r) const {
    if (r < num_relations_) return relations_.name(r);
    return relations_.name(r - static_cast<RelationId>(num_relations_)) + "^-1";
}

std::vector<Triple> KnowledgeGraph::to_id_triples(
    const std::vector<StringTriple>& triples) const {
    std::vector<Triple> out;
    out.reserve(triples.size());
    std::vector<std::string> missing;
    for (const auto& st : triples) {
        auto h = entities_.find(st.head);
        auto r = relations_.find(st.rel);
        auto t = entities_.find(st.tail);
        if (!h) missing.push_back("entity '" + st.head + "'");
        if (!r) missing.push_back("relation '" + st.rel + "'");
        if (!t) missing.push_back("entity '" + st.tail + "'");
        if (h && r && t) out.push_back({*h, *r, *t});
    }
    if (!missing.empty()) {
        std::sort(missing.begin(), missing.end());
        missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
        std::string msg = "coverage error: not in training vocabulary:";
        std::size_t shown = 0;
        for (const auto& m : missing) {
            msg += " " + m;
            if (++shown == 10 && missing.size() > 10) {
                msg += " (+" + std::to_string(missing.size() - 10) + " more)";
                break;
            }
        }
        throw std::runtime_error(msg);
    }
    return out;
}

std::vector<StringTriple> read_triple_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open triple file: " + path.string());
    std::vector<StringTriple> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto tab1 = line.find('\t');
        auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        if (tab1 == std::string::npos || tab2 == std::string::npos)
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": expected head<TAB>relation<TAB>tail");
        StringTriple t{line.substr(0, tab1), line.substr(tab1 + 1, tab2 - tab1 - 1),
                       line.substr(tab2 + 1)};
        if (t.head.empty() || t.rel.empty() || t.tail.empty())
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": empty field");
        out.push_back(std::move(t));
    }
    return out;
}

void write_triple_file(const std::filesystem::path& path,
                       const std::vector<StringTriple>& triples) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write triple file: " + path.string());
    for (const auto& t : triples) out << t.head << '\t' << t.rel << '\t' << t.tail << '\n';
}

}  // namespace lrgcn
