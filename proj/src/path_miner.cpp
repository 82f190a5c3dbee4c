#include "lrgcn/path_miner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace lrgcn {

namespace {

// x = [ent(current); rel(query); rel(candidate); ent(candidate dst)]
void fill_features(const PolicyParams& t, EntityId current, RelationId query_rel,
                   const Action& a, std::vector<double>& x) {
    const std::size_t d = t.dim;
    x.resize(4 * d);
    const double* e_cur = t.entity.row(current);
    const double* r_q = t.relation.row(query_rel);
    const double* r_c = t.relation.row(a.rel);
    const double* e_dst = t.entity.row(a.dst);
    for (std::size_t k = 0; k < d; ++k) {
        x[k] = e_cur[k];
        x[d + k] = r_q[k];
        x[2 * d + k] = r_c[k];
        x[3 * d + k] = e_dst[k];
    }
}

double mlp_logit(const PolicyParams& t, std::span<const double> x,
                 std::vector<double>* hidden_out = nullptr) {
    std::vector<double> h(t.hidden);
    matvec(t.w1, x, h);
    for (std::size_t i = 0; i < t.hidden; ++i) h[i] = std::tanh(h[i] + t.b1[i]);
    const double logit = dot(h, t.w2);
    if (hidden_out) *hidden_out = std::move(h);
    return logit;
}

void softmax_inplace(std::vector<double>& v) {
    const double m = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double& x : v) {
        x = std::exp(x - m);
        s += x;
    }
    for (double& x : v) x /= s;
}

bool steps_less(const std::vector<PathStep>& a, const std::vector<PathStep>& b) {
    return std::lexicographical_compare(
        a.begin(), a.end(), b.begin(), b.end(), [](const PathStep& x, const PathStep& y) {
            return x.rel != y.rel ? x.rel < y.rel : x.dst < y.dst;
        });
}

}  // namespace

PolicyParams PolicyParams::init(std::size_t n_entities, std::size_t n_relations_aug,
                                std::size_t dim, std::size_t hidden, std::uint64_t seed) {
    if (dim < 1 || hidden < 1) throw std::runtime_error("policy dims must be >= 1");
    PolicyParams t;
    t.dim = dim;
    t.hidden = hidden;
    t.entity = Matrix(n_entities, dim);
    t.relation = Matrix(n_relations_aug + 1, dim);  // +1 reserved STOP row
    t.w1 = Matrix(hidden, 4 * dim);
    t.b1.assign(hidden, 0.0);
    t.w2.assign(hidden, 0.0);
    Rng rng(derive_seed(seed, "policy-init"));
    t.entity.xavier_init(rng, dim, dim);
    t.relation.xavier_init(rng, dim, dim);
    t.w1.xavier_init(rng, 4 * dim, hidden);
    const double a = std::sqrt(6.0 / static_cast<double>(hidden + 1));
    for (double& v : t.w2) v = rng.next_uniform(-a, a);
    return t;
}

ActionDist action_distribution(const KnowledgeGraph& g, const PolicyParams& theta,
                               RelationId query_rel, EntityId current,
                               std::size_t action_cap) {
    auto edges = g.neighbors(current);
    ActionDist dist;
    dist.actions.reserve(edges.size() + 1);
    for (const Edge& e : edges) dist.actions.push_back({e.rel, e.dst, false});
    dist.actions.push_back({theta.stop_relation(), current, true});

    dist.logits.resize(dist.actions.size());
    std::vector<double> x;
    for (std::size_t i = 0; i < dist.actions.size(); ++i) {
        fill_features(theta, current, query_rel, dist.actions[i], x);
        dist.logits[i] = mlp_logit(theta, x);
    }

    if (edges.size() > action_cap) {
        // Keep the top-cap edges by logit; STOP always survives.
        std::vector<std::size_t> order(edges.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return dist.logits[a] > dist.logits[b];
        });
        order.resize(action_cap);
        std::sort(order.begin(), order.end());  // keep adjacency order among survivors
        ActionDist pruned;
        pruned.actions.reserve(action_cap + 1);
        pruned.logits.reserve(action_cap + 1);
        for (std::size_t i : order) {
            pruned.actions.push_back(dist.actions[i]);
            pruned.logits.push_back(dist.logits[i]);
        }
        pruned.actions.push_back(dist.actions.back());
        pruned.logits.push_back(dist.logits.back());
        dist = std::move(pruned);
    }

    dist.probs = dist.logits;
    softmax_inplace(dist.probs);
    return dist;
}

namespace {
std::size_t sample_index(const std::vector<double>& probs, Rng& rng) {
    const double r = rng.next_double();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (r < acc) return i;
    }
    return probs.size() - 1;
}
}  // namespace

ReasoningPath rollout(const KnowledgeGraph& g, const PolicyParams& theta, Query q,
                      Rng& rng, std::size_t max_steps, std::size_t action_cap) {
    ReasoningPath path;
    path.source = q.source;
    path.query_rel = q.rel;
    path.terminal = q.source;
    EntityId current = q.source;
    for (std::size_t step = 0; step < max_steps; ++step) {
        const ActionDist dist = action_distribution(g, theta, q.rel, current, action_cap);
        const std::size_t idx = sample_index(dist.probs, rng);
        if (dist.actions[idx].is_stop) break;
        path.steps.push_back({dist.actions[idx].rel, dist.actions[idx].dst});
        path.step_probs.push_back(dist.probs[idx]);
        current = dist.actions[idx].dst;
    }
    path.terminal = current;
    return path;
}

std::vector<ReasoningPath> beam_search(const KnowledgeGraph& g, const PolicyParams& theta,
                                       Query q, std::size_t beam_width,
                                       std::size_t max_steps, std::size_t action_cap) {
    if (beam_width < 1) throw std::runtime_error("beam_search: width must be >= 1");

    struct Item {
        EntityId entity;
        std::vector<PathStep> steps;
        std::vector<double> step_probs;
        double logp = 0.0;
    };

    std::vector<Item> beam{{q.source, {}, {}, 0.0}};
    std::vector<ReasoningPath> pool;

    for (std::size_t depth = 0; depth < max_steps && !beam.empty(); ++depth) {
        std::vector<Item> candidates;
        for (const Item& item : beam) {
            const ActionDist dist =
                action_distribution(g, theta, q.rel, item.entity, action_cap);
            for (std::size_t i = 0; i < dist.actions.size(); ++i) {
                if (dist.actions[i].is_stop) continue;
                Item next = item;
                next.entity = dist.actions[i].dst;
                next.steps.push_back({dist.actions[i].rel, dist.actions[i].dst});
                next.step_probs.push_back(dist.probs[i]);
                next.logp += std::log(dist.probs[i]);
                candidates.push_back(std::move(next));
            }
        }
        // Every generated extension is a terminal candidate: the policy may
        // stop right after it. Emitting before pruning keeps the final
        // top-B by prior weight exact.
        for (const Item& cand : candidates) {
            ReasoningPath rp;
            rp.source = q.source;
            rp.query_rel = q.rel;
            rp.steps = cand.steps;
            rp.step_probs = cand.step_probs;
            rp.terminal = cand.entity;
            pool.push_back(std::move(rp));
        }
        if (candidates.size() > beam_width) {
            std::sort(candidates.begin(), candidates.end(), [](const Item& a, const Item& b) {
                if (a.logp != b.logp) return a.logp > b.logp;
                return steps_less(a.steps, b.steps);
            });
            candidates.resize(beam_width);
        }
        beam = std::move(candidates);
    }

    // Dedup on (steps, terminal); the construction yields each walk once,
    // so this is a safety net.
    std::sort(pool.begin(), pool.end(), [](const ReasoningPath& a, const ReasoningPath& b) {
        if (a.terminal != b.terminal) return a.terminal < b.terminal;
        return steps_less(a.steps, b.steps);
    });
    pool.erase(std::unique(pool.begin(), pool.end(),
                           [](const ReasoningPath& a, const ReasoningPath& b) {
                               return a.terminal == b.terminal && a.steps == b.steps;
                           }),
               pool.end());

    std::sort(pool.begin(), pool.end(), [](const ReasoningPath& a, const ReasoningPath& b) {
        const double wa = a.prior_weight(), wb = b.prior_weight();
        if (wa != wb) return wa > wb;
        return steps_less(a.steps, b.steps);
    });
    if (pool.size() > beam_width) pool.resize(beam_width);
    return pool;
}

bool classify(ReasoningPath& path, EntityId gold) {
    path.positive = (path.terminal == gold);
    return path.positive;
}

namespace {

struct PolicyGrads {
    Matrix entity;
    Matrix relation;
    Matrix w1;
    std::vector<double> b1;
    std::vector<double> w2;

    explicit PolicyGrads(const PolicyParams& t)
        : entity(t.entity.rows, t.entity.cols),
          relation(t.relation.rows, t.relation.cols),
          w1(t.w1.rows, t.w1.cols),
          b1(t.hidden, 0.0),
          w2(t.hidden, 0.0) {}
};

// Ascent gradient of sum_a dlogit[a] * logit_a(theta) for one state.
void backward_state(const PolicyParams& t, EntityId current, RelationId query_rel,
                    const ActionDist& dist, std::span<const double> dlogit,
                    PolicyGrads& grads) {
    const std::size_t d = t.dim;
    std::vector<double> x, h, dh(t.hidden), dx(4 * d);
    for (std::size_t i = 0; i < dist.actions.size(); ++i) {
        if (dlogit[i] == 0.0) continue;
        fill_features(t, current, query_rel, dist.actions[i], x);
        mlp_logit(t, x, &h);
        for (std::size_t j = 0; j < t.hidden; ++j) {
            grads.w2[j] += dlogit[i] * h[j];
            dh[j] = dlogit[i] * t.w2[j] * (1.0 - h[j] * h[j]);
            grads.b1[j] += dh[j];
        }
        add_outer(grads.w1, dh, x);
        matvec_t(t.w1, dh, dx);
        double* de_cur = grads.entity.row(current);
        double* dr_q = grads.relation.row(query_rel);
        double* dr_c = grads.relation.row(dist.actions[i].rel);
        double* de_dst = grads.entity.row(dist.actions[i].dst);
        for (std::size_t k = 0; k < d; ++k) {
            de_cur[k] += dx[k];
            dr_q[k] += dx[d + k];
            dr_c[k] += dx[2 * d + k];
            de_dst[k] += dx[3 * d + k];
        }
    }
}

}  // namespace

ReinforceStats reinforce_update(const KnowledgeGraph& g, PolicyParams& theta,
                                std::span<const std::pair<Query, EntityId>> batch,
                                double lr, ReinforceState& state,
                                const ReinforceConfig& cfg, Rng& rng) {
    if (batch.empty()) throw std::runtime_error("reinforce_update: empty batch");

    struct TrajStep {
        EntityId entity;
        ActionDist dist;
        std::size_t chosen;
    };

    PolicyGrads grads(theta);
    double reward_sum = 0.0;
    std::size_t n_traj = 0;

    for (const auto& [query, gold] : batch) {
        for (std::size_t r = 0; r < cfg.rollouts_per_query; ++r) {
            std::vector<TrajStep> traj;
            EntityId current = query.source;
            for (std::size_t step = 0; step < cfg.max_steps; ++step) {
                ActionDist dist =
                    action_distribution(g, theta, query.rel, current, cfg.action_cap);
                const std::size_t idx = sample_index(dist.probs, rng);
                const bool stop = dist.actions[idx].is_stop;
                const EntityId next = dist.actions[idx].dst;
                traj.push_back({current, std::move(dist), idx});
                if (stop) break;
                current = next;
            }
            const double reward = (current == gold) ? 1.0 : 0.0;
            reward_sum += reward;
            ++n_traj;
            const double advantage = reward - state.baseline;

            for (const TrajStep& ts : traj) {
                const std::size_t n_act = ts.dist.actions.size();
                std::vector<double> dlogit(n_act, 0.0);
                for (std::size_t i = 0; i < n_act; ++i) {
                    dlogit[i] = advantage * ((i == ts.chosen ? 1.0 : 0.0) - ts.dist.probs[i]);
                }
                if (cfg.entropy_coef != 0.0) {
                    double ent = 0.0;
                    for (double p : ts.dist.probs) ent -= p * std::log(p);
                    for (std::size_t i = 0; i < n_act; ++i) {
                        const double p = ts.dist.probs[i];
                        dlogit[i] += cfg.entropy_coef * (-p * (std::log(p) + ent));
                    }
                }
                backward_state(theta, ts.entity, query.rel, ts.dist, dlogit, grads);
            }
        }
    }

    const double scale = lr / static_cast<double>(n_traj);
    auto apply = [&](std::span<double> param, std::span<const double> grad) {
        for (std::size_t i = 0; i < param.size(); ++i) param[i] += scale * grad[i];
        if (!all_finite(param))
            throw std::runtime_error("reinforce_update: non-finite parameter update");
    };
    apply(theta.entity.data, grads.entity.data);
    apply(theta.relation.data, grads.relation.data);
    apply(theta.w1.data, grads.w1.data);
    apply(theta.b1, grads.b1);
    apply(theta.w2, grads.w2);

    const double mean_reward = reward_sum / static_cast<double>(n_traj);
    state.baseline = (1.0 - state.update_tau) * state.baseline +
                     state.update_tau * mean_reward;
    return {mean_reward, n_traj};
}

std::string format_path(const KnowledgeGraph& g, const ReasoningPath& path) {
    std::ostringstream os;
    os << g.entity_vocab().name(path.source);
    for (const PathStep& s : path.steps)
        os << " -[" << g.relation_name(s.rel) << "]-> " << g.entity_vocab().name(s.dst);
    os << " | prior=" << path.prior_weight()
       << " | polarity=" << (path.positive ? '+' : '-');
    return os.str();
}

}  // namespace lrgcn
