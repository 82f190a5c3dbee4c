#include "lrgcn/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace lrgcn {

void FilterIndex::add_split(const KnowledgeGraph& g, std::span<const Triple> triples) {
    num_relations_aug_ = g.num_relations_aug();
    for (const Triple& t : triples) {
        map_[key(t.head, t.rel)].push_back(t.tail);
        map_[key(t.tail, g.inverse(t.rel))].push_back(t.head);
    }
}

const std::vector<EntityId>& FilterIndex::valid_tails(EntityId src, RelationId rel) const {
    auto it = map_.find(key(src, rel));
    return it == map_.end() ? empty_ : it->second;
}

int filtered_rank(std::span<const double> scores, EntityId gold,
                  std::span<const EntityId> known_valid, Rng& rng) {
    if (gold >= scores.size())
        throw std::runtime_error("filtered_rank: gold entity filtered out of scoring");
    std::vector<char> removed(scores.size(), 0);
    for (EntityId e : known_valid)
        if (e < scores.size() && e != gold) removed[e] = 1;

    const double gold_score = scores[gold];
    int greater = 0;
    int ties = 0;
    for (std::size_t o = 0; o < scores.size(); ++o) {
        if (removed[o] || o == gold) continue;
        if (scores[o] > gold_score) ++greater;
        else if (scores[o] == gold_score) ++ties;  // exact-tie protocol
    }
    int rank = 1 + greater;
    if (ties > 0) rank += static_cast<int>(rng.next_index(static_cast<std::uint64_t>(ties) + 1));
    return rank;
}

namespace {
void bucketize(RankingReport& report, const KnowledgeGraph& g,
               std::span<const std::pair<std::uint32_t, std::uint32_t>> edges) {
    report.buckets = indegree_report(report, g, edges);
}
}  // namespace

RankingReport evaluate(const KnowledgeGraph& g, const FilterIndex& filter,
                       const PredictorParams& params, std::span<const Triple> split,
                       const EvalOptions& opts) {
    RankingReport report;
    if (split.empty()) return report;

    const Encoded enc = encode(g, params);

    // Two queries per triple: (h, r, ?) -> t and (t, r^-1, ?) -> h.
    struct PendingQuery {
        EntityId src;
        RelationId rel;
        EntityId gold;
        bool head_direction;
    };
    std::vector<PendingQuery> queries;
    queries.reserve(split.size() * 2);
    for (const Triple& t : split) {
        queries.push_back({t.head, t.rel, t.tail, false});
        queries.push_back({t.tail, g.inverse(t.rel), t.head, true});
    }

    report.per_query.resize(queries.size());
    auto run_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const PendingQuery& q = queries[i];
            const QueryScore qs = forward_encoded(enc, q.src, enc.h_rel.row_span(q.rel));
            Rng rng(derive_seed(opts.seed, "eval-query", i));
            const auto& known = filter.valid_tails(q.src, q.rel);
            const int rank = filtered_rank(qs.scores, q.gold, known, rng);
            report.per_query[i] = {q.src, q.rel, q.gold, rank, q.head_direction};
        }
    };

    const int threads = std::max(1, opts.threads);
    if (threads == 1 || queries.size() < 64) {
        run_range(0, queries.size());
    } else {
        std::vector<std::thread> workers;
        const std::size_t chunk = (queries.size() + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const std::size_t lo = t * chunk;
            const std::size_t hi = std::min(queries.size(), lo + chunk);
            if (lo >= hi) break;
            workers.emplace_back(run_range, lo, hi);
        }
        for (auto& w : workers) w.join();
    }

    double rr = 0.0;
    std::size_t h1 = 0, h3 = 0, h10 = 0;
    for (const QueryRank& qr : report.per_query) {
        rr += 1.0 / qr.rank;
        h1 += qr.rank <= 1;
        h3 += qr.rank <= 3;
        h10 += qr.rank <= 10;
    }
    const double n = static_cast<double>(report.per_query.size());
    report.mrr = rr / n;
    report.hits1 = 100.0 * static_cast<double>(h1) / n;
    report.hits3 = 100.0 * static_cast<double>(h3) / n;
    report.hits10 = 100.0 * static_cast<double>(h10) / n;
    bucketize(report, g, opts.bucket_edges);
    return report;
}

std::vector<DegreeBucket> indegree_report(
    const RankingReport& report, const KnowledgeGraph& g,
    std::span<const std::pair<std::uint32_t, std::uint32_t>> bucket_edges) {
    std::vector<DegreeBucket> buckets;
    buckets.reserve(bucket_edges.size());
    for (const auto& [lo, hi] : bucket_edges) buckets.push_back({lo, hi, 0.0, 0});

    const auto& degrees = g.in_degrees();
    for (const QueryRank& qr : report.per_query) {
        const std::uint32_t deg = degrees[qr.gold];
        for (DegreeBucket& b : buckets) {
            if (deg >= b.lo && deg <= b.hi) {
                b.mrr += 1.0 / qr.rank;
                ++b.count;
                break;
            }
        }
    }
    for (DegreeBucket& b : buckets)
        if (b.count > 0) b.mrr /= static_cast<double>(b.count);
    return buckets;
}

std::string RankingReport::to_text() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    os << "queries  " << per_query.size() << '\n'
       << "MRR      " << mrr << '\n';
    os.precision(2);
    os << "Hits@1   " << hits1 << '\n'
       << "Hits@3   " << hits3 << '\n'
       << "Hits@10  " << hits10 << '\n';
    if (!buckets.empty()) {
        os << "in-degree buckets (gold entity, train in-degree)\n";
        for (const DegreeBucket& b : buckets) {
            os << "  [" << b.lo << ", ";
            if (b.hi == UINT32_MAX) os << "inf";
            else os << b.hi;
            os.precision(4);
            os << "]  count " << b.count << "  MRR " << (b.count ? b.mrr : 0.0) << '\n';
        }
    }
    return os.str();
}

}  // namespace lrgcn
