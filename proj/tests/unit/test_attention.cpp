#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hgfnd/attention.hpp"
#include "hgfnd/error.hpp"
#include "hgfnd/model.hpp"
#include "fixtures.hpp"
#include "oracle.hpp"

#include <omp.h>
#include <sstream>

using namespace hgfnd;

namespace {

Matrix<double> rows(std::initializer_list<std::initializer_list<double>> values) {
    Matrix<double> m(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(values.begin()->size()));
    Eigen::Index r = 0;
    for (const auto& row : values) {
        Eigen::Index c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

AttentionLayerParams<double> random_layer(std::size_t d, std::mt19937_64& rng) {
    AttentionLayerParams<double> p;
    p.w1 = glorot_uniform<double>(d, d, rng);
    p.w2 = glorot_uniform<double>(d, d, rng);
    p.a1 = glorot_uniform<double>(1, d, rng);
    p.a2 = glorot_uniform<double>(1, 2 * d, rng);
    return p;
}

double sum_range(const std::vector<double>& v, std::size_t a, std::size_t b) {
    double s = 0;
    for (std::size_t k = a; k < b; ++k) s += v[k];
    return s;
}

} // namespace

TEST_CASE("node-level attention, trivial cases") {
    auto p = AttentionLayerParams<double>::zeros(2);
    p.w1 = rows({{1, 0}, {0, 1}});
    p.a1 = rows({{0.3, -0.7}});
    const Hypergraph single(2, {{0, HyperedgeKind::User, "a", {1}}});
    const auto one = hyperedge_step(p, rows({{1, 2}, {3, 4}}), single);
    CHECK(one.alpha == std::vector<double>{1.0});
    CHECK(one.states(0, 0) == 3.0);

    const Hypergraph pair(2, {{0, HyperedgeKind::User, "a", {0, 1}}});
    const auto same = hyperedge_step(p, rows({{1, 2}, {1, 2}}), pair);
    CHECK(same.alpha[0] == 0.5);
    CHECK(same.alpha[1] == 0.5);
}

TEST_CASE("node-level attention, hand-computed three-member hyperedge") {
    auto p = AttentionLayerParams<double>::zeros(2);
    p.w1 = rows({{1, 1}, {0, 1}});
    p.a1 = rows({{1, 2}});
    // projections: a (1,0)->(1,1), b (0,1)->(0,1), c (-1,0)->(-1,-1)
    // scores: 1+2 = 3, 0+2 = 2, 0.01*(-1) + 2*0.01*(-1) = -0.03
    const Hypergraph h(3, {{0, HyperedgeKind::User, "x", {0, 1, 2}}});
    const auto step = hyperedge_step(p, rows({{1, 0}, {0, 1}, {-1, 0}}), h);
    const double z = std::exp(3.0) + std::exp(2.0) + std::exp(-0.03);
    const double a = std::exp(3.0) / z, b = std::exp(2.0) / z, c = std::exp(-0.03) / z;
    CHECK(step.alpha[0] == doctest::Approx(a).epsilon(1e-14));
    CHECK(step.alpha[1] == doctest::Approx(b).epsilon(1e-14));
    CHECK(step.alpha[2] == doctest::Approx(c).epsilon(1e-14));
    CHECK(step.states(0, 0) == doctest::Approx(a - c).epsilon(1e-14));
    CHECK(step.states(0, 1) == doctest::Approx(a + b - c).epsilon(1e-14));
}

TEST_CASE("hyperedge-level attention, hand-computed cases") {
    auto p = AttentionLayerParams<double>::zeros(2);
    p.w2 = rows({{0, 1}, {1, 0}});
    p.a2 = rows({{1, -1, 5, 5}});
    // node 0 in hyperedges 0, 1, 2; node 1 only in hyperedge 1; node 2 isolated
    const Hypergraph h(3, {{0, HyperedgeKind::User, "a", {0}},
                           {0, HyperedgeKind::User, "b", {0, 1}},
                           {0, HyperedgeKind::Time, "c", {0}}});
    // projected (swap): (2,1), (3,0), (2,2); scores 1, 3, 0
    const auto step = node_step(p, rows({{1, 2}, {0, 3}, {2, 2}}), h);
    const double z = std::exp(1.0) + std::exp(3.0) + 1.0;
    const double b0 = std::exp(1.0) / z, b1 = std::exp(3.0) / z, b2 = 1.0 / z;
    CHECK(step.beta[0] == doctest::Approx(b0).epsilon(1e-14));
    CHECK(step.beta[1] == doctest::Approx(b1).epsilon(1e-14));
    CHECK(step.beta[2] == doctest::Approx(b2).epsilon(1e-14));
    CHECK(step.states(0, 0) == doctest::Approx(2 * b0 + 3 * b1 + 2 * b2).epsilon(1e-14));
    CHECK(step.states(0, 1) == doctest::Approx(b0 + 2 * b2).epsilon(1e-14));
    CHECK(step.beta[3] == 1.0);
    CHECK(step.states(1, 0) == 3.0);
    CHECK(step.states.row(2).isZero(0.0));

    const auto tie = node_step(p, rows({{1, 2}, {1, 2}, {1, 2}}), h);
    CHECK(tie.beta[0] == doctest::Approx(1.0 / 3).epsilon(1e-15));
    const Hypergraph two(1, {{0, HyperedgeKind::User, "a", {0}}, {0, HyperedgeKind::User, "b", {0}}});
    const auto half = node_step(p, rows({{4, -1}, {4, -1}}), two);
    CHECK(half.beta[0] == 0.5);
    CHECK(half.beta[1] == 0.5);
}

TEST_CASE("attention normalisation on random hypergraphs") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng() % 50, m = rng() % 81, d = 1 + rng() % 6;
        const Hypergraph h = fixtures::random_hypergraph(rng, n, m);
        Matrix<double> states = glorot_uniform<double>(n, d, rng) * 3.0;
        for (int layer = 0; layer < 2; ++layer) {
            const auto c = attention_layer_forward(random_layer(d, rng), states, h);
            for (std::size_t j = 0; j < h.n_edges(); ++j) {
                CHECK(std::abs(sum_range(c.edge.alpha, h.edge_offsets()[j], h.edge_offsets()[j + 1]) - 1.0) < 1e-6);
            }
            for (std::size_t i = 0; i < n; ++i) {
                if (h.degree(i) == 0) {
                    CHECK(c.node.states.row(i).isZero(0.0));
                    continue;
                }
                CHECK(std::abs(sum_range(c.node.beta, h.node_offsets()[i], h.node_offsets()[i + 1]) - 1.0) < 1e-6);
            }
            states = c.node.states;
        }
    }
}

TEST_CASE("the node half of the hyperedge-level score only shifts each softmax") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + rng() % 10, d = 1 + rng() % 4;
        const Hypergraph h = fixtures::random_hypergraph(rng, n, 1 + rng() % 8);
        auto p = random_layer(d, rng);
        const Matrix<double> v = glorot_uniform<double>(n, d, rng);
        const auto ours = attention_layer_forward(p, v, h);
        const auto ref = oracle::attention_layer(p, oracle::to_mat(v), oracle::member_lists(h), n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t t = 0; t < ref.beta[i].size(); ++t) {
                CHECK(std::abs(ours.node.beta[h.node_offsets()[i] + t] - ref.beta[i][t]) < 1e-9);
            }
        }
    }
}

TEST_CASE("permutation invariance and locality") {
    std::mt19937_64 rng(23);
    const std::size_t n = 9, d = 3;
    const Hypergraph h(n, {{0, HyperedgeKind::User, "a", {0, 1, 2}},
                           {0, HyperedgeKind::User, "b", {2, 3}},
                           {0, HyperedgeKind::Time, "c", {3, 4, 5}},
                           {0, HyperedgeKind::Entity, "d", {6, 7}},
                           {0, HyperedgeKind::Entity, "e", {1, 3}}});
    const auto l1 = random_layer(d, rng), l2 = random_layer(d, rng);
    const Matrix<double> v = glorot_uniform<double>(n, d, rng);
    const auto two_layers = [&](const Hypergraph& g, const Matrix<double>& x) {
        return attention_layer_forward(l2, attention_layer_forward(l1, x, g).node.states, g).node.states;
    };
    const Matrix<double> ref = two_layers(h, v);

    // reordering hyperedges permutes each node's incident list
    std::vector<Hyperedge> edges = h.edges();
    std::reverse(edges.begin(), edges.end());
    CHECK((two_layers(Hypergraph(n, edges), v) - ref).cwiseAbs().maxCoeff() < 1e-12);

    // relabelling nodes permutes member lists and output rows
    const std::vector<NodeId> perm{4, 8, 0, 2, 7, 1, 3, 6, 5}; // old i -> new perm[i]
    std::vector<Hyperedge> relabelled = h.edges();
    Matrix<double> pv(n, d);
    for (auto& e : relabelled) {
        for (auto& m : e.members) m = perm[m];
        std::sort(e.members.begin(), e.members.end());
    }
    for (std::size_t i = 0; i < n; ++i) pv.row(perm[i]) = v.row(i);
    const Matrix<double> out = two_layers(Hypergraph(n, relabelled), pv);
    for (std::size_t i = 0; i < n; ++i) CHECK((out.row(perm[i]) - ref.row(i)).cwiseAbs().maxCoeff() < 1e-12);

    // node 0 reaches 1,2 (one hop) and 3 (two hops); 4..8 are farther away
    Matrix<double> changed = v;
    changed.row(5).setConstant(9.0);
    changed.row(6).setConstant(-4.0);
    changed.row(8).setConstant(2.0);
    CHECK((two_layers(h, changed).row(0) - ref.row(0)).cwiseAbs().maxCoeff() == 0.0);
    Matrix<double> near = v;
    near.row(3) *= -3.0;
    CHECK((two_layers(h, near).row(0) - ref.row(0)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("model forward equals the scalar oracle on small hypergraphs") {
    std::mt19937_64 rng(31);
    std::size_t cases = 0, live = 0;
    for (std::size_t n = 3; n <= 6; ++n) {
        for (std::size_t m = 0; m <= 5; ++m) {
            for (int rep = 0; rep < 4; ++rep) {
                const Dataset d = fixtures::small_dataset(n, 3, rng());
                const Hypergraph h = fixtures::random_hypergraph(rng, n, m);
                const auto params = ModelParams<double>::initialize(ModelDims{3, 3, 2}, rng());
                const auto logits = forward(params, d, h, false).logits;
                const auto ref = oracle::logits(params, d, h);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t c = 0; c < 2; ++c) CHECK(std::abs(logits(i, c) - ref[i][c]) < 1e-6);
                ++cases;
                live += logits.cwiseAbs().maxCoeff() > 1e-3;
            }
        }
    }
    CHECK(cases == 96);
    MESSAGE(live << " of " << cases << " cases have non-zero logits");
    CHECK(live * 2 > cases);
}

TEST_CASE("forward and predict behaviour") {
    const Dataset d = fixtures::small_dataset(10, 4, 2);
    std::mt19937_64 rng(1);
    const Hypergraph h = fixtures::random_hypergraph(rng, 10, 6, 2);
    auto params = ModelParams<double>::initialize(ModelDims{4, 5, 2}, 3);

    const auto a = forward(params, d, h, false);
    const auto b = forward(params, d, h, false);
    CHECK(a.logits == b.logits);
    const auto t1 = forward(params, d, h, true, 7);
    const auto t2 = forward(params, d, h, true, 7);
    CHECK(t1.logits == t2.logits);
    CHECK(t1.logits != a.logits);

    REQUIRE(a.snapshot.alpha.size() == 2);
    CHECK(a.snapshot.alpha[1].size() == h.n_incidences());
    std::ostringstream csv;
    a.snapshot.write_csv(csv, h);
    const std::string text = csv.str();
    CHECK(text.rfind("layer,level,i,j,coefficient\n", 0) == 0);
    CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == 1 + 4 * h.n_incidences());

    params.head_weight.setZero();
    params.head_bias.setZero();
    const auto zero = forward(params, d, h, false);
    CHECK(zero.logits.isZero(0.0));
    const auto pz = predict(zero.logits);
    CHECK(pz.probabilities(0, 0) == 0.5);
    CHECK(pz.labels[0] == kFake);

    CHECK_THROWS_AS(forward(params, d, Hypergraph(11, {}), false), ValidationError);

    Matrix<double> z(2, 2);
    z << -10, 10, 3, 3;
    const auto p = predict(z);
    CHECK(p.labels == std::vector<int>{1, 0});
    CHECK(p.probabilities(0, 1) > 0.9999);
    const Matrix<double> r = glorot_uniform<double>(50, 2, rng) * 40.0;
    const auto pr = predict(r);
    for (Eigen::Index i = 0; i < 50; ++i) CHECK(std::abs(pr.probabilities.row(i).sum() - 1.0) < 1e-9);
}

TEST_CASE("thread count does not change results") {
    const Dataset d = fixtures::small_dataset(40, 4, 8);
    std::mt19937_64 rng(2);
    const Hypergraph h = fixtures::random_hypergraph(rng, 40, 30, 2);
    const auto params = ModelParams<double>::initialize(ModelDims{4, 6, 2}, 5);
    const auto inputs = ModelInputs<double>::prepare(d, h, 16);
    Matrix<double> d_logits = glorot_uniform<double>(40, 2, rng);
    omp_set_num_threads(1);
    const auto p1 = model_forward(params, inputs);
    const auto g1 = model_backward(params, inputs, p1, d_logits);
    omp_set_num_threads(4);
    const auto p4 = model_forward(params, inputs);
    const auto g4 = model_backward(params, inputs, p4, d_logits);
    CHECK(p1.logits == p4.logits);
    std::vector<Matrix<double>> a, b;
    g1.visit([&](const std::string&, const Matrix<double>& m) { a.push_back(m); });
    g4.visit([&](const std::string&, const Matrix<double>& m) { b.push_back(m); });
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
}
