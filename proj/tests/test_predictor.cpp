#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>

#include "lrgcn/checkpoint.hpp"
#include "lrgcn/kg.hpp"
#include "lrgcn/predictor.hpp"
#include "lrgcn/rng.hpp"
#include "support/oracles.hpp"
#include "support/synth.hpp"

using namespace lrgcn;

namespace {

KnowledgeGraph toy_graph() {
    return KnowledgeGraph::build(
        {{"A", "r1", "B"}, {"B", "r2", "C"}, {"C", "r1", "D"}, {"A", "r2", "D"}});
}

PredictorParams random_params(const KnowledgeGraph& g, std::size_t dim, std::uint64_t seed,
                              CompositionOp op = CompositionOp::Multiply) {
    return PredictorParams::init(g.num_entities(), g.num_relations_aug(), dim, op, seed);
}

// Straight-line recomputation of the encoder formula from the triple list,
// independent of the adjacency index and the library's loops.
Matrix oracle_encode_entities(const KnowledgeGraph& g, const PredictorParams& p) {
    const std::size_t d = p.dim;
    Matrix h(g.num_entities(), d);
    for (EntityId v = 0; v < g.num_entities(); ++v) {
        // Incoming augmented edges (u, r, v) straight from the triples.
        std::vector<std::pair<EntityId, RelationId>> incoming;
        for (const Triple& t : g.triples()) {
            if (t.tail == v) incoming.push_back({t.head, t.rel});
            if (t.head == v) incoming.push_back({t.tail, g.inverse(t.rel)});
        }
        std::vector<double> acc(d, 0.0);
        for (auto [u, r] : incoming) {
            std::vector<double> c(d);
            for (std::size_t k = 0; k < d; ++k) {
                c[k] = p.comp == CompositionOp::Multiply
                           ? p.entity.at(u, k) * p.relation.at(r, k)
                           : p.entity.at(u, k) - p.relation.at(r, k);
            }
            std::vector<double> m(d, 0.0);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t k = 0; k < d; ++k) m[i] += p.w_comp.at(i, k) * c[k];
            for (std::size_t k = 0; k < d; ++k) acc[k] += m[k];
        }
        for (std::size_t k = 0; k < d; ++k) {
            double self = 0.0;
            for (std::size_t j = 0; j < d; ++j) self += p.w_self.at(k, j) * p.entity.at(v, j);
            const double msg = incoming.empty() ? 0.0 : acc[k] / double(incoming.size());
            h.at(v, k) = std::tanh(msg + self);
        }
    }
    return h;
}

}  // namespace

TEST_CASE("encode: zero parameters propagate to all-zero encodings") {
    auto g = toy_graph();
    auto p = random_params(g, 6, 1);
    p.entity.zero();
    p.relation.zero();
    p.w_comp.zero();
    p.w_self.zero();
    p.w_rel.zero();
    auto enc = encode(g, p);
    for (double v : enc.h_ent.data) CHECK(v == 0.0);
    for (double v : enc.h_rel.data) CHECK(v == 0.0);
}

TEST_CASE("encode: identity self transform with zeroed messages gives tanh(e_v)") {
    auto g = toy_graph();
    auto p = random_params(g, 5, 2);
    p.w_comp.zero();  // kill the message term, leaving only the self term
    p.w_self.zero();
    for (std::size_t k = 0; k < 5; ++k) p.w_self.at(k, k) = 1.0;
    auto enc = encode(g, p);
    for (EntityId v = 0; v < g.num_entities(); ++v)
        for (std::size_t k = 0; k < 5; ++k)
            CHECK(enc.h_ent.at(v, k) == doctest::Approx(std::tanh(p.entity.at(v, k))));
}

TEST_CASE("encode matches the straight-line oracle on a toy graph") {
    auto g = toy_graph();
    for (auto op : {CompositionOp::Multiply, CompositionOp::Subtract}) {
        auto p = random_params(g, 7, 3, op);
        auto enc = encode(g, p);
        auto want = oracle_encode_entities(g, p);
        for (std::size_t i = 0; i < want.data.size(); ++i)
            CHECK(enc.h_ent.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
    }
}

TEST_CASE("forward: all-zero encodings score 0.5 everywhere, in-range everywhere") {
    auto g = toy_graph();
    auto p = random_params(g, 4, 4);
    p.entity.zero();
    auto qs0 = forward(g, p, 0, 0);
    REQUIRE(qs0.probs.size() == g.num_entities());
    // Zero entity table makes h_ent = tanh(W_self * 0) = 0 -> scores 0.
    for (double pr : qs0.probs) CHECK(pr == doctest::Approx(0.5));

    auto p2 = random_params(g, 4, 5);
    auto qs = forward(g, p2, 1, 2);
    for (double pr : qs.probs) {
        CHECK(pr > 0.0);
        CHECK(pr < 1.0);
    }
}

TEST_CASE("forward: overfitting a single triple drives the gold probability up") {
    auto g = KnowledgeGraph::build({{"A", "r1", "B"}, {"C", "r2", "C"}});
    auto p = random_params(g, 8, 6);
    LossSpec spec;
    spec.labels = {{*g.entity_vocab().find("A"), 0, *g.entity_vocab().find("B")}};
    auto grads = PredictorGrads::zeros_like(p);
    for (int step = 0; step < 200; ++step) {
        combined_loss_and_gradients(g, p, spec, grads);
        sgd_step(p, grads, 0.5);
    }
    auto qs = forward(g, p, *g.entity_vocab().find("A"), 0);
    CHECK(qs.probs[*g.entity_vocab().find("B")] > 0.9);
}

TEST_CASE("forward_with_relation_embedding") {
    auto g = toy_graph();
    auto p = random_params(g, 6, 7);
    auto enc = encode(g, p);
    SUBCASE("substituting the encoded query relation reproduces forward") {
        auto direct = forward(g, p, 2, 1);
        std::vector<double> h_rel(enc.h_rel.row(1), enc.h_rel.row(1) + 6);
        auto subst = forward_with_relation_embedding(g, p, 2, h_rel);
        for (std::size_t o = 0; o < direct.probs.size(); ++o)
            CHECK(direct.probs[o] == doctest::Approx(subst.probs[o]));
    }
    SUBCASE("zero relation embedding gives 0.5 everywhere") {
        std::vector<double> zero(6, 0.0);
        auto qs = forward_with_relation_embedding(g, p, 0, zero);
        for (double pr : qs.probs) CHECK(pr == doctest::Approx(0.5));
    }
    SUBCASE("composite embedding scores match a hand-rolled trilinear product") {
        std::vector<RelationId> body{0, 3};
        auto emb = composite_relation_embedding(p, 1, body);
        auto qs = forward_with_relation_embedding(g, p, 0, emb);
        for (EntityId o = 0; o < g.num_entities(); ++o) {
            double s = 0.0;
            for (std::size_t k = 0; k < 6; ++k)
                s += enc.h_ent.at(0, k) * emb[k] * enc.h_ent.at(o, k);
            CHECK(qs.scores[o] == doctest::Approx(s).epsilon(1e-12));
        }
    }
}

TEST_CASE("composite relation embedding") {
    auto g = toy_graph();
    auto p = random_params(g, 5, 8);
    auto enc = encode(g, p);
    SUBCASE("single body relation passes through") {
        auto emb = composite_relation_embedding(p, 0, std::vector<RelationId>{2});
        for (std::size_t k = 0; k < 5; ++k)
            CHECK(emb[k] == doctest::Approx(enc.h_rel.at(2, k)));
    }
    SUBCASE("identical body relations average to the shared encoding") {
        auto emb = composite_relation_embedding(p, 0, std::vector<RelationId>{2, 2, 2});
        for (std::size_t k = 0; k < 5; ++k)
            CHECK(emb[k] == doctest::Approx(enc.h_rel.at(2, k)));
    }
    SUBCASE("three distinct relations: weights from an independent normalization") {
        std::vector<RelationId> body{0, 1, 3};
        // Recompute the shifted LeakyReLU normalization by hand.
        std::vector<double> y;
        for (RelationId r : body) {
            double z = 0.0;
            for (std::size_t k = 0; k < 5; ++k) {
                z += p.w_attn[k] * enc.h_rel.at(1, k);
                z += p.w_attn[5 + k] * enc.h_rel.at(r, k);
            }
            y.push_back(z > 0 ? z : 0.01 * z);
        }
        const double y_min = *std::min_element(y.begin(), y.end());
        double denom = 0.0;
        for (double v : y) denom += v - y_min + 1e-6;
        std::vector<double> want(5, 0.0);
        double alpha_sum = 0.0;
        for (std::size_t j = 0; j < body.size(); ++j) {
            const double a = (y[j] - y_min + 1e-6) / denom;
            alpha_sum += a;
            for (std::size_t k = 0; k < 5; ++k) want[k] += a * enc.h_rel.at(body[j], k);
        }
        CHECK(alpha_sum == doctest::Approx(1.0).epsilon(1e-9));
        auto emb = composite_relation_embedding(p, 1, body);
        for (std::size_t k = 0; k < 5; ++k)
            CHECK(emb[k] == doctest::Approx(want[k]).epsilon(1e-12));
    }
    SUBCASE("empty body is an error") {
        CHECK_THROWS(composite_relation_embedding(p, 0, std::vector<RelationId>{}));
    }
}

TEST_CASE("attention weights sum to one and stay nonnegative over random draws") {
    auto g = toy_graph();
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        auto p = random_params(g, 4, rng.next_u64());
        auto enc = encode(g, p);
        const std::size_t len = 1 + rng.next_index(4);
        std::vector<RelationId> body;
        for (std::size_t i = 0; i < len; ++i)
            body.push_back(static_cast<RelationId>(rng.next_index(g.num_relations_aug())));
        const auto rq = static_cast<RelationId>(rng.next_index(g.num_relations_aug()));

        // Independent recomputation of the shifted-LeakyReLU weights.
        std::vector<double> y;
        for (RelationId r : body) {
            double z = 0.0;
            for (std::size_t k = 0; k < 4; ++k) {
                z += p.w_attn[k] * enc.h_rel.at(rq, k);
                z += p.w_attn[4 + k] * enc.h_rel.at(r, k);
            }
            y.push_back(z > 0 ? z : 0.01 * z);
        }
        const double y_min = *std::min_element(y.begin(), y.end());
        double denom = 0.0, sum = 0.0;
        for (double v : y) denom += v - y_min + 1e-6;
        std::vector<double> want(4, 0.0);
        for (std::size_t j = 0; j < body.size(); ++j) {
            const double a = (y[j] - y_min + 1e-6) / denom;
            CHECK(a >= 0.0);
            sum += a;
            for (std::size_t k = 0; k < 4; ++k) want[k] += a * enc.h_rel.at(body[j], k);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        auto emb = composite_relation_embedding(p, rq, body);
        for (std::size_t k = 0; k < 4; ++k)
            CHECK(emb[k] == doctest::Approx(want[k]).epsilon(1e-12));
    }
}

TEST_CASE("label loss") {
    SUBCASE("uniform 0.5 over four entities costs ln 2") {
        QueryScore qs;
        qs.probs = {0.5, 0.5, 0.5, 0.5};
        CHECK(label_loss(qs, 2, 0.0) == doctest::Approx(std::log(2.0)));
    }
    SUBCASE("probabilities at the (unsmoothed) targets cost ~0") {
        QueryScore qs;
        qs.probs = {1e-12, 1.0 - 1e-12, 1e-12};
        CHECK(label_loss(qs, 1, 0.0) == doctest::Approx(0.0).epsilon(1e-5));
    }
    SUBCASE("probabilities at the smoothed targets cost the target entropy") {
        const double eps = 0.1;
        const std::size_t n = 4;
        QueryScore qs;
        qs.probs.assign(n, eps / n);
        qs.probs[1] = 1.0 - eps + eps / n;
        double want = 0.0;
        for (std::size_t o = 0; o < n; ++o) {
            const double t = qs.probs[o];
            want -= (t * std::log(t) + (1 - t) * std::log(1 - t)) / n;
        }
        CHECK(label_loss(qs, 1, eps) == doctest::Approx(want).epsilon(1e-9));
    }
    SUBCASE("vanishing gold probability is clamped to a large finite loss") {
        QueryScore qs;
        qs.probs = {1e-300, 0.5};
        const double loss = label_loss(qs, 0, 0.0);
        CHECK(std::isfinite(loss));
        CHECK(loss > 3.0);  // dominated by -log(1e-7)/2
    }
}

TEST_CASE("den loss") {
    auto g = toy_graph();
    auto p = random_params(g, 5, 11);
    SUBCASE("empty list is zero") { CHECK(den_loss(g, p, {}, 0.0) == 0.0); }
    SUBCASE("duplicating a virtual triple does not change the mean") {
        VirtualTriple vt{0, 1, {0, 2}, 3};
        std::vector<VirtualTriple> once{vt}, twice{vt, vt};
        CHECK(den_loss(g, p, once, 0.1) == doctest::Approx(den_loss(g, p, twice, 0.1)));
    }
    SUBCASE("two virtual triples average the two BCE terms") {
        VirtualTriple v1{0, 1, {0, 2}, 3};
        VirtualTriple v2{2, 0, {1}, 1};
        auto term = [&](const VirtualTriple& vt) {
            auto emb = composite_relation_embedding(p, vt.query_rel, vt.body);
            auto qs = forward_with_relation_embedding(g, p, vt.source, emb);
            return label_loss(qs, vt.target, 0.1);
        };
        const double want = 0.5 * (term(v1) + term(v2));
        std::vector<VirtualTriple> both{v1, v2};
        CHECK(den_loss(g, p, both, 0.1) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("elbo loss") {
    auto g = toy_graph();
    auto p = random_params(g, 5, 12);
    SUBCASE("single unit-weight target at lambda 0 is the gold NLL") {
        std::vector<EStepTarget> ts{{0, 1, 2, 1.0}};
        auto qs = forward(g, p, 0, 1);
        CHECK(elbo_loss(g, p, ts, 0.0) ==
              doctest::Approx(-std::log(qs.probs[2])).epsilon(1e-12));
    }
    SUBCASE("all-zero weights at lambda 0 vanish") {
        std::vector<EStepTarget> ts{{0, 1, 2, 0.0}, {1, 0, 3, 0.0}};
        CHECK(elbo_loss(g, p, ts, 0.0) == 0.0);
    }
    SUBCASE("negative weight rejected") {
        std::vector<EStepTarget> ts{{0, 1, 2, -0.5}};
        CHECK_THROWS(elbo_loss(g, p, ts, 0.0));
    }
    SUBCASE("weighted targets with entropy match a straight-line recomputation") {
        std::vector<EStepTarget> ts{{0, 1, 2, 0.7}, {1, 2, 3, 0.3}};
        const double lambda = 0.001;
        double want = 0.0;
        for (const auto& t : ts) {
            auto qs = forward(g, p, t.src, t.rel);
            want += t.weight * -std::log(std::clamp(qs.probs[t.gold], 1e-7, 1.0 - 1e-7));
            double s = 0.0;
            for (double pr : qs.probs) s += std::clamp(pr, 1e-7, 1.0 - 1e-7);
            for (double pr : qs.probs) {
                const double q = std::clamp(pr, 1e-7, 1.0 - 1e-7) / s;
                want += lambda * q * std::log(q);
            }
        }
        CHECK(elbo_loss(g, p, ts, lambda) == doctest::Approx(want).epsilon(1e-12));
    }
    SUBCASE("raising the gold probability lowers the loss (monotone NLL)") {
        std::vector<EStepTarget> ts{{0, 1, 2, 1.0}};
        auto before_qs = forward(g, p, 0, 1);
        const double before = elbo_loss(g, p, ts, 0.0);
        LossSpec spec;
        spec.estep_targets = ts;
        spec.gamma = 1.0;
        auto grads = PredictorGrads::zeros_like(p);
        combined_loss_and_gradients(g, p, spec, grads);
        sgd_step(p, grads, 0.1);
        auto after_qs = forward(g, p, 0, 1);
        REQUIRE(after_qs.probs[2] > before_qs.probs[2]);
        CHECK(elbo_loss(g, p, ts, 0.0) < before);
    }
}

TEST_CASE("gradients: finite differences over each loss and their combination") {
    auto g = toy_graph();
    SUBCASE("label loss only") {
        auto p = random_params(g, 4, 21);
        LossSpec spec;
        spec.labels = {{0, 0, 2}, {1, 3, 0}};
        spec.label_smoothing = 0.1;
        CHECK(oracle::max_grad_rel_err(g, p, spec) < 1e-4);
    }
    SUBCASE("den loss only") {
        auto p = random_params(g, 4, 22);
        LossSpec spec;
        spec.virtual_triples = {{0, 1, {0, 2}, 3}, {1, 0, {3, 1, 2}, 2}};
        spec.beta = 0.8;
        CHECK(oracle::max_grad_rel_err(g, p, spec) < 1e-4);
    }
    SUBCASE("elbo loss only, with entropy term") {
        auto p = random_params(g, 4, 23);
        LossSpec spec;
        spec.estep_targets = {{0, 1, 2, 0.6}, {2, 2, 1, 0.25}};
        spec.gamma = 1.3;
        spec.lambda = 0.01;
        CHECK(oracle::max_grad_rel_err(g, p, spec) < 1e-4);
    }
    SUBCASE("combined loss, subtraction composition") {
        auto p = random_params(g, 4, 24, CompositionOp::Subtract);
        LossSpec spec;
        spec.labels = {{0, 0, 2}, {3, 2, 1}};
        spec.virtual_triples = {{0, 1, {0, 2}, 3}};
        spec.estep_targets = {{1, 3, 2, 0.4}};
        spec.beta = 0.7;
        spec.gamma = 0.9;
        spec.lambda = 0.01;
        spec.label_smoothing = 0.1;
        CHECK(oracle::max_grad_rel_err(g, p, spec) < 1e-4);
    }
}

TEST_CASE("gradients: untouched parameter blocks stay zero") {
    auto g = toy_graph();
    auto p = random_params(g, 4, 25);
    LossSpec spec;
    spec.labels = {{0, 0, 2}};
    auto grads = PredictorGrads::zeros_like(p);
    combined_loss_and_gradients(g, p, spec, grads);
    // No virtual triples means no path into the attention parameters.
    for (double v : grads.w_attn) CHECK(v == 0.0);
}

TEST_CASE("gradients: contribution is linear in the loss weight") {
    auto g = toy_graph();
    auto p = random_params(g, 4, 26);
    LossSpec spec;
    spec.labels = {{0, 0, 2}};
    spec.estep_targets = {{1, 2, 3, 0.5}};
    auto at_gamma = [&](double gamma) {
        spec.gamma = gamma;
        auto grads = PredictorGrads::zeros_like(p);
        combined_loss_and_gradients(g, p, spec, grads);
        return grads;
    };
    auto g0 = at_gamma(0.0), g1 = at_gamma(1.0), g2 = at_gamma(2.0);
    for (std::size_t i = 0; i < g0.entity.data.size(); ++i) {
        const double delta1 = g1.entity.data[i] - g0.entity.data[i];
        const double delta2 = g2.entity.data[i] - g1.entity.data[i];
        CHECK(delta1 == doctest::Approx(delta2).epsilon(1e-9));
    }
}

TEST_CASE("forward probabilities are equivariant under entity relabeling") {
    auto g1 = KnowledgeGraph::build(
        {{"A", "r1", "B"}, {"B", "r2", "C"}, {"C", "r1", "D"}, {"A", "r2", "D"}});
    // Same triples, reordered so first-seen ids permute: C=0, D=1, A=2, B=3.
    auto g2 = KnowledgeGraph::build(
        {{"C", "r1", "D"}, {"A", "r2", "D"}, {"B", "r2", "C"}, {"A", "r1", "B"}});
    const EntityId perm[4] = {2, 3, 0, 1};  // g1 id -> g2 id (A B C D)
    REQUIRE(*g2.entity_vocab().find("A") == perm[0]);
    REQUIRE(*g2.entity_vocab().find("D") == perm[3]);

    auto p1 = random_params(g1, 5, 31);
    auto p2 = p1;
    for (EntityId e = 0; e < 4; ++e)
        for (std::size_t k = 0; k < 5; ++k) p2.entity.at(perm[e], k) = p1.entity.at(e, k);

    for (RelationId rel : {RelationId{0}, RelationId{1}, g1.inverse(0)}) {
        auto qa = forward(g1, p1, 0, rel);
        auto qb = forward(g2, p2, perm[0], rel);
        for (EntityId o = 0; o < 4; ++o)
            CHECK(qa.probs[o] == doctest::Approx(qb.probs[perm[o]]).epsilon(1e-9));
    }
}

TEST_CASE("sgd step") {
    auto g = toy_graph();
    auto p = random_params(g, 4, 41);
    auto before = p;
    auto grads = PredictorGrads::zeros_like(p);
    SUBCASE("zero gradient leaves parameters unchanged") {
        sgd_step(p, grads, 0.5);
        CHECK(p.entity.data == before.entity.data);
    }
    SUBCASE("zero learning rate leaves parameters unchanged") {
        LossSpec spec;
        spec.labels = {{0, 0, 2}};
        combined_loss_and_gradients(g, p, spec, grads);
        sgd_step(p, grads, 0.0);
        CHECK(p.entity.data == before.entity.data);
    }
    SUBCASE("one step decreases the loss") {
        LossSpec spec;
        spec.labels = {{0, 0, 2}, {1, 1, 3}};
        const double before_loss = combined_loss(g, p, spec).total;
        combined_loss_and_gradients(g, p, spec, grads);
        sgd_step(p, grads, 0.05);
        CHECK(combined_loss(g, p, spec).total < before_loss);
    }
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    auto g = toy_graph();
    Checkpoint ckpt;
    ckpt.predictor = random_params(g, 6, 55);
    ckpt.policy = PolicyParams::init(g.num_entities(), g.num_relations_aug(), 4, 8, 77);
    ckpt.seed = 123456789;
    ckpt.has_rules = true;
    ckpt.rules.get_or_insert({{0, 1}, 2}, 0.5).weight = 0.625;
    ckpt.rules.get_or_insert({{3}, 1}, 0.5).update_count = 42;

    auto dir = synth::temp_dir("ckpt");
    save_checkpoint(dir / "a.ckpt", ckpt);
    auto back = load_checkpoint(dir / "a.ckpt");

    CHECK(back.seed == ckpt.seed);
    CHECK(std::memcmp(back.predictor.entity.data.data(), ckpt.predictor.entity.data.data(),
                      ckpt.predictor.entity.data.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(back.predictor.w_attn.data(), ckpt.predictor.w_attn.data(),
                      ckpt.predictor.w_attn.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(back.policy.w1.data.data(), ckpt.policy.w1.data.data(),
                      ckpt.policy.w1.data.size() * sizeof(double)) == 0);
    REQUIRE(back.rules.size() == 2);
    CHECK(back.rules.at(0).weight == 0.625);
    CHECK(back.rules.at(1).update_count == 42);

    // Second save of the loaded state is byte-identical.
    save_checkpoint(dir / "b.ckpt", back);
    std::ifstream fa(dir / "a.ckpt", std::ios::binary), fb(dir / "b.ckpt", std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(fa)), {});
    std::string sb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(sa == sb);
    std::filesystem::remove_all(dir);
}
