#include "lrgcn/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "lrgcn/rng.hpp"

namespace lrgcn {

namespace {

constexpr double kLeakySlope = 0.01;
constexpr double kAttnShiftEps = 1e-6;
constexpr double kProbClamp = 1e-7;

double stable_sigmoid(double x) {
    double p;
    if (x >= 0.0) {
        p = 1.0 / (1.0 + std::exp(-x));
    } else {
        const double e = std::exp(x);
        p = e / (1.0 + e);
    }
    // Keep the open-interval contract even for saturated scores.
    if (p >= 1.0) p = std::nextafter(1.0, 0.0);
    if (p <= 0.0) p = std::numeric_limits<double>::min();
    return p;
}

void compose(CompositionOp op, std::span<const double> ent, std::span<const double> rel,
             std::span<double> out) {
    if (op == CompositionOp::Multiply) {
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = ent[k] * rel[k];
    } else {
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = ent[k] - rel[k];
    }
}

// Composite-relation attention with all intermediates kept for backward.
struct CompositeCache {
    RelationId query_rel = 0;
    std::vector<RelationId> body;
    std::vector<double> z;      // raw attention logits
    std::vector<double> y;      // LeakyReLU(z)
    std::size_t min_idx = 0;    // argmin of y (first on ties)
    double denom = 0.0;         // sum of shifted numerators
    std::vector<double> alpha;  // normalized weights
    std::vector<double> emb;    // output embedding
};

CompositeCache composite_forward(const Matrix& h_rel, std::span<const double> w_attn,
                                 RelationId query_rel, std::span<const RelationId> body) {
    if (body.empty())
        throw std::runtime_error("composite_relation_embedding: empty body");
    const std::size_t d = h_rel.cols;
    const std::size_t i = body.size();
    CompositeCache c;
    c.query_rel = query_rel;
    c.body.assign(body.begin(), body.end());
    c.z.resize(i);
    c.y.resize(i);
    c.alpha.resize(i);
    c.emb.assign(d, 0.0);

    const double* hq = h_rel.row(query_rel);
    for (std::size_t j = 0; j < i; ++j) {
        const double* hj = h_rel.row(body[j]);
        double z = 0.0;
        for (std::size_t k = 0; k < d; ++k) z += w_attn[k] * hq[k];
        for (std::size_t k = 0; k < d; ++k) z += w_attn[d + k] * hj[k];
        c.z[j] = z;
        c.y[j] = z > 0.0 ? z : kLeakySlope * z;
    }
    c.min_idx = static_cast<std::size_t>(
        std::min_element(c.y.begin(), c.y.end()) - c.y.begin());
    const double y_min = c.y[c.min_idx];
    double denom = 0.0;
    for (std::size_t j = 0; j < i; ++j) denom += c.y[j] - y_min + kAttnShiftEps;
    c.denom = denom;
    for (std::size_t j = 0; j < i; ++j) c.alpha[j] = (c.y[j] - y_min + kAttnShiftEps) / denom;
    for (std::size_t j = 0; j < i; ++j)
        axpy(c.alpha[j], h_rel.row_span(body[j]), c.emb);
    return c;
}

// Gradient sinks shared by every loss term; resolved into parameter
// gradients by encode_backward at the end of the batch.
struct BackwardAcc {
    Matrix dh_ent;
    Matrix dh_rel;
    std::vector<double> dw_attn;
};

void composite_backward(const Matrix& h_rel, std::span<const double> w_attn,
                        const CompositeCache& c, std::span<const double> demb,
                        BackwardAcc& acc) {
    const std::size_t d = h_rel.cols;
    const std::size_t i = c.body.size();
    std::vector<double> dalpha(i);
    for (std::size_t j = 0; j < i; ++j) {
        dalpha[j] = dot(demb, h_rel.row_span(c.body[j]));
        axpy(c.alpha[j], demb, acc.dh_rel.row_span(c.body[j]));
    }
    double mix = 0.0;
    for (std::size_t j = 0; j < i; ++j) mix += dalpha[j] * c.alpha[j];
    std::vector<double> dy(i);
    double dn_sum = 0.0;
    for (std::size_t j = 0; j < i; ++j) {
        const double dn = (dalpha[j] - mix) / c.denom;
        dy[j] = dn;
        dn_sum += dn;
    }
    dy[c.min_idx] -= dn_sum;

    const double* hq = h_rel.row(c.query_rel);
    for (std::size_t j = 0; j < i; ++j) {
        const double dz = dy[j] * (c.z[j] > 0.0 ? 1.0 : kLeakySlope);
        if (dz == 0.0) continue;
        const double* hj = h_rel.row(c.body[j]);
        double* dq = acc.dh_rel.row(c.query_rel);
        double* dj = acc.dh_rel.row(c.body[j]);
        for (std::size_t k = 0; k < d; ++k) {
            acc.dw_attn[k] += dz * hq[k];
            acc.dw_attn[d + k] += dz * hj[k];
            dq[k] += dz * w_attn[k];
            dj[k] += dz * w_attn[d + k];
        }
    }
}

// Backpropagates dL/d score (one value per entity) through the trilinear
// scorer. Returns dL/d rel_emb in drel; entity sinks go straight to acc.
void trilinear_backward(const Encoded& enc, EntityId src, std::span<const double> rel_emb,
                        std::span<const double> dscore, BackwardAcc& acc,
                        std::span<double> drel) {
    const std::size_t d = enc.h_ent.cols;
    const double* hs = enc.h_ent.row(src);
    std::vector<double> hsq(d), dhs(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) hsq[k] = hs[k] * rel_emb[k];
    for (std::size_t o = 0; o < enc.h_ent.rows; ++o) {
        const double ds = dscore[o];
        if (ds == 0.0) continue;
        const double* ho = enc.h_ent.row(o);
        double* dho = acc.dh_ent.row(o);
        for (std::size_t k = 0; k < d; ++k) {
            dho[k] += ds * hsq[k];
            drel[k] += ds * hs[k] * ho[k];
            dhs[k] += ds * rel_emb[k] * ho[k];
        }
    }
    axpy(1.0, {dhs.data(), d}, acc.dh_ent.row_span(src));
}

// dL/d score for one label_loss instance scaled by `scale`.
std::vector<double> bce_dscore(const QueryScore& qs, EntityId gold,
                               double label_smoothing, double scale) {
    const std::size_t n = qs.probs.size();
    std::vector<double> ds(n);
    const double off = label_smoothing / static_cast<double>(n);
    for (std::size_t o = 0; o < n; ++o) {
        const double t = (o == gold ? 1.0 - label_smoothing : 0.0) + off;
        const double p = qs.probs[o];
        if (p <= kProbClamp || p >= 1.0 - kProbClamp) {
            ds[o] = 0.0;  // clamp region: flat
            continue;
        }
        const double dldp = -(t / p - (1.0 - t) / (1.0 - p)) / static_cast<double>(n);
        ds[o] = scale * dldp * p * (1.0 - p);
    }
    return ds;
}

double entropy_of_renormalized(const QueryScore& qs) {
    double s = 0.0;
    for (double p : qs.probs) s += clamp_prob(p, kProbClamp);
    double acc = 0.0;
    for (double p : qs.probs) {
        const double q = clamp_prob(p, kProbClamp) / s;
        acc += q * std::log(q);
    }
    return acc;
}

void check_finite_block(std::span<const double> v, const char* name) {
    if (!all_finite(v))
        throw std::runtime_error(std::string("non-finite gradient in block ") + name);
}

}  // namespace

PredictorParams PredictorParams::init(std::size_t n_entities, std::size_t n_relations_aug,
                                      std::size_t dim, CompositionOp comp,
                                      std::uint64_t seed) {
    if (dim < 1) throw std::runtime_error("predictor dim must be >= 1");
    PredictorParams p;
    p.dim = dim;
    p.comp = comp;
    p.entity = Matrix(n_entities, dim);
    p.relation = Matrix(n_relations_aug, dim);
    p.w_comp = Matrix(dim, dim);
    p.w_self = Matrix(dim, dim);
    p.w_rel = Matrix(dim, dim);
    p.w_attn.assign(2 * dim, 0.0);
    Rng rng(derive_seed(seed, "predictor-init"));
    p.entity.xavier_init(rng, dim, dim);
    p.relation.xavier_init(rng, dim, dim);
    p.w_comp.xavier_init(rng, dim, dim);
    p.w_self.xavier_init(rng, dim, dim);
    p.w_rel.xavier_init(rng, dim, dim);
    const double a = std::sqrt(6.0 / static_cast<double>(2 * dim + 1));
    for (double& v : p.w_attn) v = rng.next_uniform(-a, a);
    return p;
}

PredictorGrads PredictorGrads::zeros_like(const PredictorParams& p) {
    PredictorGrads g;
    g.entity = Matrix(p.entity.rows, p.entity.cols);
    g.relation = Matrix(p.relation.rows, p.relation.cols);
    g.w_comp = Matrix(p.w_comp.rows, p.w_comp.cols);
    g.w_self = Matrix(p.w_self.rows, p.w_self.cols);
    g.w_rel = Matrix(p.w_rel.rows, p.w_rel.cols);
    g.w_attn.assign(p.w_attn.size(), 0.0);
    return g;
}

void PredictorGrads::zero() {
    entity.zero();
    relation.zero();
    w_comp.zero();
    w_self.zero();
    w_rel.zero();
    std::fill(w_attn.begin(), w_attn.end(), 0.0);
}

Encoded encode(const KnowledgeGraph& g, const PredictorParams& p) {
    if (p.entity.rows != g.num_entities() || p.relation.rows != g.num_relations_aug() ||
        p.entity.cols != p.dim)
        throw std::runtime_error("encode: graph/parameter dimension mismatch");
    const std::size_t d = p.dim;
    Encoded enc;
    enc.h_ent = Matrix(g.num_entities(), d);
    enc.h_rel = Matrix(g.num_relations_aug(), d);

    for (std::size_t r = 0; r < g.num_relations_aug(); ++r)
        matvec(p.w_rel, p.relation.row_span(r), enc.h_rel.row_span(r));

    std::vector<double> mean_c(d), c(d), a(d);
    for (std::size_t v = 0; v < g.num_entities(); ++v) {
        auto edges = g.neighbors(static_cast<EntityId>(v));
        matvec(p.w_self, p.entity.row_span(v), {a.data(), d});
        if (!edges.empty()) {
            std::fill(mean_c.begin(), mean_c.end(), 0.0);
            for (const Edge& e : edges) {
                // Outgoing edge (r^, u) mirrors incoming edge (u, inverse(r^)).
                const RelationId r_in = g.inverse(e.rel);
                compose(p.comp, p.entity.row_span(e.dst), p.relation.row_span(r_in),
                        {c.data(), d});
                axpy(1.0, {c.data(), d}, {mean_c.data(), d});
            }
            const double inv_n = 1.0 / static_cast<double>(edges.size());
            for (double& x : mean_c) x *= inv_n;
            matvec(p.w_comp, {mean_c.data(), d}, {c.data(), d});
            axpy(1.0, {c.data(), d}, {a.data(), d});
        }
        double* h = enc.h_ent.row(v);
        for (std::size_t k = 0; k < d; ++k) h[k] = std::tanh(a[k]);
    }
    return enc;
}

QueryScore forward_encoded(const Encoded& enc, EntityId src,
                           std::span<const double> rel_emb) {
    if (src >= enc.h_ent.rows) throw std::out_of_range("forward: entity id out of range");
    if (rel_emb.size() != enc.h_ent.cols)
        throw std::runtime_error("forward: relation embedding dimension mismatch");
    const std::size_t d = enc.h_ent.cols;
    QueryScore qs;
    qs.source = src;
    qs.scores.resize(enc.h_ent.rows);
    qs.probs.resize(enc.h_ent.rows);
    const double* hs = enc.h_ent.row(src);
    std::vector<double> hsq(d);
    for (std::size_t k = 0; k < d; ++k) hsq[k] = hs[k] * rel_emb[k];
    for (std::size_t o = 0; o < enc.h_ent.rows; ++o) {
        const double s = dot({hsq.data(), d}, enc.h_ent.row_span(o));
        qs.scores[o] = s;
        qs.probs[o] = stable_sigmoid(s);
    }
    return qs;
}

QueryScore forward(const KnowledgeGraph& g, const PredictorParams& p, EntityId src,
                   RelationId rel) {
    if (rel >= g.num_relations_aug())
        throw std::out_of_range("forward: relation id out of range");
    Encoded enc = encode(g, p);
    QueryScore qs = forward_encoded(enc, src, enc.h_rel.row_span(rel));
    qs.rel = rel;
    return qs;
}

QueryScore forward_with_relation_embedding(const KnowledgeGraph& g,
                                           const PredictorParams& p, EntityId src,
                                           std::span<const double> rel_emb) {
    Encoded enc = encode(g, p);
    return forward_encoded(enc, src, rel_emb);
}

std::vector<double> composite_relation_embedding(const PredictorParams& p,
                                                 RelationId query_rel,
                                                 std::span<const RelationId> body) {
    // Relation encodings do not depend on the graph: h_r = W_rel rho_r.
    Matrix h_rel(p.relation.rows, p.dim);
    auto need = [&](RelationId r) {
        if (r >= p.relation.rows)
            throw std::out_of_range("composite: relation id out of range");
        matvec(p.w_rel, p.relation.row_span(r), h_rel.row_span(r));
    };
    need(query_rel);
    for (RelationId r : body) need(r);
    return composite_forward(h_rel, p.w_attn, query_rel, body).emb;
}

double label_loss(const QueryScore& score, EntityId gold, double label_smoothing) {
    const std::size_t n = score.probs.size();
    if (gold >= n) throw std::out_of_range("label_loss: gold id out of range");
    const double off = label_smoothing / static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t o = 0; o < n; ++o) {
        const double t = (o == gold ? 1.0 - label_smoothing : 0.0) + off;
        const double p = clamp_prob(score.probs[o], kProbClamp);
        acc += t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    }
    return -acc / static_cast<double>(n);
}

double den_loss(const KnowledgeGraph& g, const PredictorParams& p,
                std::span<const VirtualTriple> virtual_triples, double label_smoothing) {
    if (virtual_triples.empty()) return 0.0;
    Encoded enc = encode(g, p);
    double acc = 0.0;
    for (const VirtualTriple& vt : virtual_triples) {
        const auto emb = composite_forward(enc.h_rel, p.w_attn, vt.query_rel, vt.body).emb;
        const QueryScore qs = forward_encoded(enc, vt.source, emb);
        acc += label_loss(qs, vt.target, label_smoothing);
    }
    return acc / static_cast<double>(virtual_triples.size());
}

double elbo_loss(const KnowledgeGraph& g, const PredictorParams& p,
                 std::span<const EStepTarget> targets, double lambda) {
    if (targets.empty()) return 0.0;
    Encoded enc = encode(g, p);
    double acc = 0.0;
    for (const EStepTarget& t : targets) {
        if (t.weight < 0.0) throw std::runtime_error("elbo_loss: negative weight");
        const QueryScore qs = forward_encoded(enc, t.src, enc.h_rel.row_span(t.rel));
        acc += t.weight * -std::log(clamp_prob(qs.probs[t.gold], kProbClamp));
        if (lambda != 0.0) acc += lambda * entropy_of_renormalized(qs);
    }
    return acc;
}

LossBreakdown combined_loss(const KnowledgeGraph& g, const PredictorParams& p,
                            const LossSpec& spec) {
    LossBreakdown b;
    if (!spec.labels.empty()) {
        Encoded enc = encode(g, p);
        for (const LabelTarget& lt : spec.labels) {
            const QueryScore qs = forward_encoded(enc, lt.src, enc.h_rel.row_span(lt.rel));
            b.label += label_loss(qs, lt.gold, spec.label_smoothing);
        }
        b.label /= static_cast<double>(spec.labels.size());
    }
    b.den = den_loss(g, p, spec.virtual_triples, spec.label_smoothing);
    b.elbo = elbo_loss(g, p, spec.estep_targets, spec.lambda);
    b.total = b.label + spec.beta * b.den + spec.gamma * b.elbo;
    return b;
}

namespace {

// Resolves accumulated dL/dh sinks into parameter-table gradients.
void encode_backward(const KnowledgeGraph& g, const PredictorParams& p, const Encoded& enc,
                     const BackwardAcc& acc, PredictorGrads& grads) {
    const std::size_t d = p.dim;
    std::vector<double> da(d), tmp(d), mean_c(d), c(d), dmean(d);

    for (std::size_t v = 0; v < g.num_entities(); ++v) {
        const double* dh = acc.dh_ent.row(v);
        bool any = false;
        for (std::size_t k = 0; k < d; ++k)
            if (dh[k] != 0.0) { any = true; break; }
        if (!any) continue;
        const double* h = enc.h_ent.row(v);
        for (std::size_t k = 0; k < d; ++k) da[k] = dh[k] * (1.0 - h[k] * h[k]);

        add_outer(grads.w_self, {da.data(), d}, p.entity.row_span(v));
        matvec_t(p.w_self, {da.data(), d}, {tmp.data(), d});
        axpy(1.0, {tmp.data(), d}, grads.entity.row_span(v));

        auto edges = g.neighbors(static_cast<EntityId>(v));
        if (edges.empty()) continue;
        const double inv_n = 1.0 / static_cast<double>(edges.size());
        std::fill(mean_c.begin(), mean_c.end(), 0.0);
        for (const Edge& e : edges) {
            const RelationId r_in = g.inverse(e.rel);
            compose(p.comp, p.entity.row_span(e.dst), p.relation.row_span(r_in),
                    {c.data(), d});
            axpy(inv_n, {c.data(), d}, {mean_c.data(), d});
        }
        add_outer(grads.w_comp, {da.data(), d}, {mean_c.data(), d});
        matvec_t(p.w_comp, {da.data(), d}, {dmean.data(), d});
        for (double& x : dmean) x *= inv_n;
        for (const Edge& e : edges) {
            const RelationId r_in = g.inverse(e.rel);
            double* de = grads.entity.row(e.dst);
            double* dr = grads.relation.row(r_in);
            if (p.comp == CompositionOp::Multiply) {
                const double* rho = p.relation.row(r_in);
                const double* ent = p.entity.row(e.dst);
                for (std::size_t k = 0; k < d; ++k) {
                    de[k] += dmean[k] * rho[k];
                    dr[k] += dmean[k] * ent[k];
                }
            } else {
                for (std::size_t k = 0; k < d; ++k) {
                    de[k] += dmean[k];
                    dr[k] -= dmean[k];
                }
            }
        }
    }

    for (std::size_t r = 0; r < g.num_relations_aug(); ++r) {
        const double* dh = acc.dh_rel.row(r);
        bool any = false;
        for (std::size_t k = 0; k < d; ++k)
            if (dh[k] != 0.0) { any = true; break; }
        if (!any) continue;
        add_outer(grads.w_rel, acc.dh_rel.row_span(r), p.relation.row_span(r));
        matvec_t(p.w_rel, acc.dh_rel.row_span(r), {tmp.data(), d});
        axpy(1.0, {tmp.data(), d}, grads.relation.row_span(r));
    }

    axpy(1.0, {acc.dw_attn.data(), acc.dw_attn.size()}, {grads.w_attn.data(), grads.w_attn.size()});
}

}  // namespace

LossBreakdown combined_loss_and_gradients(const KnowledgeGraph& g,
                                          const PredictorParams& p, const LossSpec& spec,
                                          PredictorGrads& grads) {
    grads.zero();
    const std::size_t d = p.dim;
    Encoded enc = encode(g, p);
    BackwardAcc acc;
    acc.dh_ent = Matrix(enc.h_ent.rows, d);
    acc.dh_rel = Matrix(enc.h_rel.rows, d);
    acc.dw_attn.assign(2 * d, 0.0);

    LossBreakdown b;
    std::vector<double> drel(d);

    if (!spec.labels.empty()) {
        const double scale = 1.0 / static_cast<double>(spec.labels.size());
        for (const LabelTarget& lt : spec.labels) {
            const QueryScore qs = forward_encoded(enc, lt.src, enc.h_rel.row_span(lt.rel));
            b.label += label_loss(qs, lt.gold, spec.label_smoothing) * scale;
            const auto ds = bce_dscore(qs, lt.gold, spec.label_smoothing, scale);
            std::fill(drel.begin(), drel.end(), 0.0);
            trilinear_backward(enc, lt.src, enc.h_rel.row_span(lt.rel), ds, acc,
                               {drel.data(), d});
            axpy(1.0, {drel.data(), d}, acc.dh_rel.row_span(lt.rel));
        }
    }

    if (!spec.virtual_triples.empty()) {
        const double scale =
            spec.beta / static_cast<double>(spec.virtual_triples.size());
        for (const VirtualTriple& vt : spec.virtual_triples) {
            const CompositeCache cc =
                composite_forward(enc.h_rel, p.w_attn, vt.query_rel, vt.body);
            const QueryScore qs = forward_encoded(enc, vt.source, cc.emb);
            b.den += label_loss(qs, vt.target, spec.label_smoothing) /
                     static_cast<double>(spec.virtual_triples.size());
            if (spec.beta != 0.0) {
                const auto ds = bce_dscore(qs, vt.target, spec.label_smoothing, scale);
                std::fill(drel.begin(), drel.end(), 0.0);
                trilinear_backward(enc, vt.source, cc.emb, ds, acc, {drel.data(), d});
                composite_backward(enc.h_rel, p.w_attn, cc, drel, acc);
            }
        }
    }

    if (!spec.estep_targets.empty()) {
        for (const EStepTarget& t : spec.estep_targets) {
            if (t.weight < 0.0) throw std::runtime_error("elbo_loss: negative weight");
            const QueryScore qs = forward_encoded(enc, t.src, enc.h_rel.row_span(t.rel));
            const double p_gold = clamp_prob(qs.probs[t.gold], kProbClamp);
            b.elbo += t.weight * -std::log(p_gold);
            if (spec.lambda != 0.0) b.elbo += spec.lambda * entropy_of_renormalized(qs);
            if (spec.gamma == 0.0) continue;

            const std::size_t n = qs.probs.size();
            std::vector<double> dp(n, 0.0);
            if (qs.probs[t.gold] > kProbClamp && qs.probs[t.gold] < 1.0 - kProbClamp)
                dp[t.gold] += spec.gamma * t.weight * (-1.0 / p_gold);
            if (spec.lambda != 0.0) {
                double s = 0.0;
                for (double pr : qs.probs) s += clamp_prob(pr, kProbClamp);
                double f = 0.0;
                for (double pr : qs.probs) {
                    const double q = clamp_prob(pr, kProbClamp) / s;
                    f += q * std::log(q);
                }
                for (std::size_t o = 0; o < n; ++o) {
                    if (qs.probs[o] <= kProbClamp || qs.probs[o] >= 1.0 - kProbClamp)
                        continue;
                    const double q = clamp_prob(qs.probs[o], kProbClamp) / s;
                    dp[o] += spec.gamma * spec.lambda * (std::log(q) - f) / s;
                }
            }
            std::vector<double> ds(n);
            for (std::size_t o = 0; o < n; ++o)
                ds[o] = dp[o] * qs.probs[o] * (1.0 - qs.probs[o]);
            std::fill(drel.begin(), drel.end(), 0.0);
            trilinear_backward(enc, t.src, enc.h_rel.row_span(t.rel), ds, acc,
                               {drel.data(), d});
            axpy(1.0, {drel.data(), d}, acc.dh_rel.row_span(t.rel));
        }
    }

    encode_backward(g, p, enc, acc, grads);

    check_finite_block(grads.entity.data, "entity table");
    check_finite_block(grads.relation.data, "relation table");
    check_finite_block(grads.w_comp.data, "w_comp");
    check_finite_block(grads.w_self.data, "w_self");
    check_finite_block(grads.w_rel.data, "w_rel");
    check_finite_block(grads.w_attn, "w_attn");

    b.total = b.label + spec.beta * b.den + spec.gamma * b.elbo;
    return b;
}

namespace {
void sgd_apply(std::span<double> param, std::span<const double> grad, double lr,
               const char* name) {
    if (param.size() != grad.size())
        throw std::runtime_error(std::string("sgd_step: shape mismatch in ") + name);
    for (std::size_t i = 0; i < param.size(); ++i) param[i] -= lr * grad[i];
    if (!all_finite(param))
        throw std::runtime_error(std::string("sgd_step: non-finite update in ") + name);
}
}  // namespace

void sgd_step(PredictorParams& p, const PredictorGrads& grads, double lr) {
    sgd_apply(p.entity.data, grads.entity.data, lr, "entity table");
    sgd_apply(p.relation.data, grads.relation.data, lr, "relation table");
    sgd_apply(p.w_comp.data, grads.w_comp.data, lr, "w_comp");
    sgd_apply(p.w_self.data, grads.w_self.data, lr, "w_self");
    sgd_apply(p.w_rel.data, grads.w_rel.data, lr, "w_rel");
    sgd_apply(p.w_attn, grads.w_attn, lr, "w_attn");
}

void sgd_step(PredictorParams& p, const PredictorGrads& grads, double lr, SgdState& state) {
    if (state.momentum == 0.0) {
        sgd_step(p, grads, lr);
        return;
    }
    if (state.velocity.entity.data.empty()) state.velocity = PredictorGrads::zeros_like(p);
    auto blend = [&](std::span<double> vel, std::span<const double> g) {
        for (std::size_t i = 0; i < vel.size(); ++i)
            vel[i] = state.momentum * vel[i] + g[i];
    };
    blend(state.velocity.entity.data, grads.entity.data);
    blend(state.velocity.relation.data, grads.relation.data);
    blend(state.velocity.w_comp.data, grads.w_comp.data);
    blend(state.velocity.w_self.data, grads.w_self.data);
    blend(state.velocity.w_rel.data, grads.w_rel.data);
    blend(state.velocity.w_attn, grads.w_attn);
    sgd_step(p, state.velocity, lr);
}

}  // namespace lrgcn
