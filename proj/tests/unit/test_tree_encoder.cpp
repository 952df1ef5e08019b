#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hgfnd/model.hpp"
#include "hgfnd/synthetic.hpp"
#include "hgfnd/tree_encoder.hpp"
#include "oracle.hpp"

#include <numeric>

using namespace hgfnd;

namespace {

Matrix<double> mat2(double a, double b, double c, double d) {
    Matrix<double> m(2, 2);
    m << a, b, c, d;
    return m;
}

PropagationTree star(const std::vector<std::array<float, 2>>& feats, const std::vector<std::uint32_t>& leaf_order) {
    PropagationTree t;
    t.nodes.assign(feats.size(), Engagement{"u", 0});
    t.features.resize(static_cast<Eigen::Index>(feats.size()), 2);
    for (std::size_t v = 0; v < feats.size(); ++v) t.features.row(v) << feats[v][0], feats[v][1];
    for (std::uint32_t leaf : leaf_order) t.edges.emplace_back(0, leaf);
    return t;
}

Dataset small_dataset(std::size_t n, std::size_t f, std::uint64_t seed) {
    SyntheticConfig c;
    c.n_news = n;
    c.n_users = 4;
    c.feature_dim = f;
    c.max_tree_size = 9;
    c.seed = seed;
    c.split_fractions = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    return generate_synthetic(c);
}

// Items reordered so that new item k is old item perm[k].
Dataset permuted(const Dataset& d, const std::vector<NodeId>& perm) {
    Dataset out = d;
    for (std::size_t k = 0; k < perm.size(); ++k) {
        out.items[k] = d.items[perm[k]];
        out.items[k].id = static_cast<NodeId>(k);
        out.trees[k] = d.trees[perm[k]];
        out.trees[k].news_id = static_cast<NodeId>(k);
        out.news_features.row(static_cast<Eigen::Index>(k)) = d.news_features.row(perm[k]);
    }
    out.splits = {};
    return out;
}

} // namespace

TEST_CASE("single-node tree: the neighbour term is zero") {
    auto p = TreeEncoderParams<double>::zeros(2, 2);
    p.sage1_self = Matrix<double>::Identity(2, 2);
    p.sage2_self = Matrix<double>::Identity(2, 2);
    p.sage1_nbr = mat2(5, 6, 7, 8); // irrelevant without neighbours
    p.sage2_nbr = mat2(-1, 2, 3, -4);
    PropagationTree t;
    t.nodes = {{"u", 0}};
    t.features.resize(1, 2);
    t.features << 0.75f, 2.0f;
    const Vector<double> root = encode_tree(p, t);
    CHECK(root[0] == 0.75);
    CHECK(root[1] == 2.0);
}

TEST_CASE("star tree matches a pencil-and-paper two-layer mean aggregation") {
    auto p = TreeEncoderParams<double>::zeros(2, 2);
    p.sage1_self = mat2(1, 0, 0, 1);
    p.sage1_nbr = mat2(0, 1, 1, 0);
    p.sage2_self = mat2(1, 1, 0, 1);
    p.sage2_nbr = mat2(0.5, 0, 0, -1);
    // root (1,0); leaves (0,1), (1,1), (2,0)
    // layer 1: root (5/3, 1); leaves (0,2), (1,2), (2,1)
    // layer 2 root: (5/3, 8/3) + (1, 5/3) * nbr = (5/3 + 1/2, 8/3 - 5/3) = (13/6, 1)
    const std::vector<std::array<float, 2>> feats{{1, 0}, {0, 1}, {1, 1}, {2, 0}};
    const Vector<double> root = encode_tree(p, star(feats, {1, 2, 3}));
    CHECK(root[0] == doctest::Approx(13.0 / 6.0).epsilon(1e-12));
    CHECK(root[1] == doctest::Approx(1.0).epsilon(1e-12));
    const Vector<double> shuffled = encode_tree(p, star(feats, {3, 1, 2}));
    CHECK(shuffled[0] == doctest::Approx(root[0]).epsilon(1e-14));
    CHECK(shuffled[1] == doctest::Approx(root[1]).epsilon(1e-14));
}

TEST_CASE("zero features and zero parameters give zero embeddings") {
    Dataset d = small_dataset(12, 3, 1);
    d.news_features.setZero();
    for (auto& t : d.trees) t.features.setZero();
    const auto p = TreeEncoderParams<double>::zeros(3, 4);
    const Matrix<double> v0 = initial_node_embeddings(p, d, 5);
    CHECK(v0.rows() == 12);
    CHECK(v0.cols() == 4);
    CHECK(v0.isZero(0.0));
}

TEST_CASE("initial embeddings equal the scalar oracle") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
        const Dataset d = small_dataset(seed == 1 ? 3 : 20, 5, seed);
        const auto params = ModelParams<double>::initialize(ModelDims{5, 4, 2}, seed).tree;
        const Matrix<double> v0 = initial_node_embeddings(params, d, 7);
        const oracle::Mat ref = oracle::initial_embeddings(params, d);
        REQUIRE(ref.size() == static_cast<std::size_t>(v0.rows()));
        for (std::size_t i = 0; i < ref.size(); ++i)
            for (std::size_t c = 0; c < ref[i].size(); ++c) CHECK(v0(i, c) == doctest::Approx(ref[i][c]).epsilon(1e-12));
        // and the per-tree wrapper agrees with the oracle root
        const Vector<double> root = encode_tree(params, d.trees[1]);
        const oracle::Vec ref_root = oracle::tree_root(params, d.trees[1]);
        for (std::size_t c = 0; c < ref_root.size(); ++c) CHECK(root[c] == doctest::Approx(ref_root[c]).epsilon(1e-12));
    }
}

TEST_CASE("batching, permutation equivariance and finiteness") {
    const Dataset d = small_dataset(37, 6, 9);
    const auto params = ModelParams<double>::initialize(ModelDims{6, 8, 2}, 4).tree;
    const Matrix<double> ref = initial_node_embeddings(params, d, 128);
    CHECK(ref.allFinite());
    for (std::size_t batch : {1u, 2u, 5u, 36u, 37u}) {
        const Matrix<double> v = initial_node_embeddings(params, d, batch);
        CHECK(((v - ref).cwiseAbs().maxCoeff()) <= 1e-12 * (1.0 + ref.cwiseAbs().maxCoeff()));
    }
    const auto fparams = ModelParams<float>::initialize(ModelDims{6, 8, 2}, 4).tree;
    const Matrix<float> f1 = initial_node_embeddings(fparams, d, 3), f2 = initial_node_embeddings(fparams, d, 128);
    CHECK(((f1 - f2).cwiseAbs().maxCoeff()) <= 1e-6f * (1.0f + f2.cwiseAbs().maxCoeff()));

    std::vector<NodeId> perm(d.size());
    std::iota(perm.begin(), perm.end(), NodeId{0});
    std::mt19937_64 rng(3);
    std::shuffle(perm.begin(), perm.end(), rng);
    const Matrix<double> shuffled = initial_node_embeddings(params, permuted(d, perm), 4);
    for (std::size_t k = 0; k < perm.size(); ++k) {
        CHECK(((shuffled.row(k) - ref.row(perm[k])).cwiseAbs().maxCoeff()) <= 1e-12);
    }
}

TEST_CASE("encoder backward matches central differences") {
    const Dataset d = small_dataset(6, 3, 21);
    const auto params = ModelParams<double>::initialize(ModelDims{3, 3, 1}, 21).tree;
    const auto forest = make_forest<double>(d, 4);
    const Matrix<double> x = d.news_features.cast<double>();
    std::mt19937_64 rng(2);
    const Matrix<double> weights = glorot_uniform<double>(6, 3, rng); // scalar = sum(v0 .* weights)

    TreeEncoderCache<double> cache;
    tree_encoder_forward<double>(params, forest, x, nullptr, &cache);
    auto grads = TreeEncoderParams<double>::zeros(3, 3);
    tree_encoder_backward(params, forest, x, cache, weights, grads);

    auto probe = params;
    std::vector<Matrix<double>*> g;
    grads.visit("", [&](const std::string&, Matrix<double>& m) { g.push_back(&m); });
    std::size_t k = 0;
    probe.visit("", [&](const std::string& name, Matrix<double>& m) {
        const Matrix<double>& gm = *g[k++];
        for (Eigen::Index e = 0; e < m.size(); ++e) {
            const double o = m.data()[e];
            m.data()[e] = o + 1e-6;
            const double up = (tree_encoder_forward<double>(probe, forest, x, nullptr, nullptr).array() * weights.array()).sum();
            m.data()[e] = o - 1e-6;
            const double down = (tree_encoder_forward<double>(probe, forest, x, nullptr, nullptr).array() * weights.array()).sum();
            m.data()[e] = o;
            const double fd = (up - down) / 2e-6;
            INFO(name << "[" << e << "]");
            CHECK(gm.data()[e] == doctest::Approx(fd).epsilon(1e-5).scale(1e-6));
        }
    });
}
