#include "hgfnd/tree_encoder.hpp"

#include "hgfnd/error.hpp"

namespace hgfnd {

MeanAggregator::MeanAggregator(std::size_t n_nodes,
                               const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges) {
    std::vector<std::size_t> degree(n_nodes, 0);
    for (const auto& [a, b] : edges) {
        ++degree[a];
        ++degree[b];
    }
    offsets_.assign(n_nodes + 1, 0);
    for (std::size_t v = 0; v < n_nodes; ++v) offsets_[v + 1] = offsets_[v] + degree[v];
    neighbors_.resize(offsets_.back());
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (const auto& [a, b] : edges) {
        neighbors_[fill[a]++] = b;
        neighbors_[fill[b]++] = a;
    }
}

template <typename Real>
TreeEncoderParams<Real> TreeEncoderParams<Real>::zeros(std::size_t input_dim, std::size_t hidden_dim) {
    const auto f = static_cast<Eigen::Index>(input_dim);
    const auto h = static_cast<Eigen::Index>(hidden_dim);
    TreeEncoderParams p;
    p.input_weight = Matrix<Real>::Zero(f, h);
    p.input_bias = Matrix<Real>::Zero(1, h);
    p.sage1_self = Matrix<Real>::Zero(f, h);
    p.sage1_nbr = Matrix<Real>::Zero(f, h);
    p.sage2_self = Matrix<Real>::Zero(h, h);
    p.sage2_nbr = Matrix<Real>::Zero(h, h);
    p.proj_weight = Matrix<Real>::Zero(2 * h, h);
    p.proj_bias = Matrix<Real>::Zero(1, h);
    return p;
}

template <typename Real>
Forest<Real> make_forest(const Dataset& dataset, std::size_t batch_size) {
    if (batch_size == 0) throw ValidationError("batch size must be positive");
    if (dataset.trees.size() != dataset.size()) {
        throw IntegrityError("every news item needs a propagation tree");
    }
    Forest<Real> forest;
    forest.n_news = dataset.size();
    for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
        const std::size_t stop = std::min(dataset.size(), start + batch_size);
        TreeBatch<Real> batch;
        std::size_t rows = 0;
        for (std::size_t i = start; i < stop; ++i) rows += dataset.trees[i].size();
        batch.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dataset.feature_dim));
        std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
        std::size_t offset = 0;
        for (std::size_t i = start; i < stop; ++i) {
            const auto& tree = dataset.trees[i];
            if (tree.news_id != i) throw IntegrityError("tree order does not follow news ids");
            batch.news.push_back(static_cast<NodeId>(i));
            batch.roots.push_back(offset);
            batch.features.middleRows(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(tree.size())) =
                tree.features.template cast<Real>();
            for (const auto& [p, c] : tree.edges) {
                edges.emplace_back(static_cast<std::uint32_t>(offset + p), static_cast<std::uint32_t>(offset + c));
            }
            offset += tree.size();
        }
        batch.aggregator = MeanAggregator(rows, edges);
        forest.batches.push_back(std::move(batch));
    }
    return forest;
}

template <typename Real>
Matrix<Real> encode_roots(const TreeEncoderParams<Real>& params, const Forest<Real>& forest,
                          TreeEncoderCache<Real>* cache) {
    Matrix<Real> roots(static_cast<Eigen::Index>(forest.n_news), params.sage2_self.cols());
    if (cache) cache->batches.clear();
    for (const auto& batch : forest.batches) {
        typename TreeEncoderCache<Real>::Batch b;
        b.hidden1 = sage_forward(batch.aggregator, batch.features, params.sage1_self, params.sage1_nbr, b.pre1);
        const Matrix<Real> hidden2 = sage_forward(batch.aggregator, b.hidden1, params.sage2_self, params.sage2_nbr, b.pre2);
        for (std::size_t t = 0; t < batch.news.size(); ++t) {
            roots.row(batch.news[t]) = hidden2.row(static_cast<Eigen::Index>(batch.roots[t]));
        }
        if (cache) cache->batches.push_back(std::move(b));
    }
    return roots;
}

template <typename Real>
Vector<Real> encode_tree(const TreeEncoderParams<Real>& params, const PropagationTree& tree) {
    Forest<Real> forest;
    forest.n_news = 1;
    TreeBatch<Real> batch;
    batch.news = {0};
    batch.roots = {0};
    batch.features = tree.features.template cast<Real>();
    batch.aggregator = MeanAggregator(tree.size(), tree.edges);
    forest.batches.push_back(std::move(batch));
    return encode_roots(params, forest).row(0).transpose();
}

template <typename Real>
Matrix<Real> tree_encoder_forward(const TreeEncoderParams<Real>& params, const Forest<Real>& forest,
                                  const Matrix<Real>& news_features, const Matrix<Real>* dropout,
                                  TreeEncoderCache<Real>* cache) {
    if (static_cast<std::size_t>(news_features.rows()) != forest.n_news) {
        throw ShapeError("news feature rows differ from the number of trees");
    }
    TreeEncoderCache<Real> local;
    TreeEncoderCache<Real>& c = cache ? *cache : local;
    const Eigen::Index h = params.input_weight.cols();
    c.roots = encode_roots(params, forest, &c);
    c.input_linear = news_features * params.input_weight;
    c.input_linear.rowwise() += params.input_bias.row(0);
    c.concat_pre.resize(news_features.rows(), 2 * h);
    c.concat_pre.leftCols(h) = c.input_linear;
    c.concat_pre.rightCols(h) = c.roots;
    c.concat_out = relu(c.concat_pre);
    if (dropout) {
        c.dropout = *dropout;
        c.concat_out.array() *= dropout->array();
    } else {
        c.dropout.resize(0, 0);
    }
    Matrix<Real> v0 = c.concat_out * params.proj_weight;
    v0.rowwise() += params.proj_bias.row(0);
    return v0;
}

template <typename Real>
void tree_encoder_backward(const TreeEncoderParams<Real>& params, const Forest<Real>& forest,
                           const Matrix<Real>& news_features, const TreeEncoderCache<Real>& cache,
                           const Matrix<Real>& d_v0, TreeEncoderParams<Real>& grads) {
    const Eigen::Index h = params.input_weight.cols();
    grads.proj_weight.noalias() += cache.concat_out.transpose() * d_v0;
    grads.proj_bias += d_v0.colwise().sum();
    Matrix<Real> d_concat = d_v0 * params.proj_weight.transpose();
    if (cache.dropout.size() > 0) d_concat.array() *= cache.dropout.array();
    const Matrix<Real> d_pre = relu_backward(cache.concat_pre, d_concat);

    const Matrix<Real> d_input = d_pre.leftCols(h);
    grads.input_weight.noalias() += news_features.transpose() * d_input;
    grads.input_bias += d_input.colwise().sum();

    const Matrix<Real> d_roots = d_pre.rightCols(h);
    for (std::size_t b = 0; b < forest.batches.size(); ++b) {
        const auto& batch = forest.batches[b];
        const auto& cb = cache.batches[b];
        Matrix<Real> d_hidden2 = Matrix<Real>::Zero(cb.pre2.rows(), cb.pre2.cols());
        for (std::size_t t = 0; t < batch.news.size(); ++t) {
            d_hidden2.row(static_cast<Eigen::Index>(batch.roots[t])) = d_roots.row(batch.news[t]);
        }
        const Matrix<Real> d_hidden1 = sage_backward(batch.aggregator, cb.hidden1, params.sage2_self, params.sage2_nbr,
                                                     cb.pre2, d_hidden2, grads.sage2_self, grads.sage2_nbr, true);
        sage_backward(batch.aggregator, batch.features, params.sage1_self, params.sage1_nbr, cb.pre1, d_hidden1,
                      grads.sage1_self, grads.sage1_nbr, false);
    }
}

template <typename Real>
Matrix<Real> initial_node_embeddings(const TreeEncoderParams<Real>& params, const Dataset& dataset,
                                     std::size_t batch_size) {
    const Forest<Real> forest = make_forest<Real>(dataset, batch_size);
    const Matrix<Real> x = dataset.news_features.cast<Real>();
    return tree_encoder_forward<Real>(params, forest, x, nullptr, nullptr);
}

#define HGFND_INSTANTIATE(Real)                                                                                       \
    template struct TreeEncoderParams<Real>;                                                                          \
    template Forest<Real> make_forest<Real>(const Dataset&, std::size_t);                                             \
    template Matrix<Real> encode_roots<Real>(const TreeEncoderParams<Real>&, const Forest<Real>&,                     \
                                             TreeEncoderCache<Real>*);                                                \
    template Vector<Real> encode_tree<Real>(const TreeEncoderParams<Real>&, const PropagationTree&);                  \
    template Matrix<Real> tree_encoder_forward<Real>(const TreeEncoderParams<Real>&, const Forest<Real>&,             \
                                                     const Matrix<Real>&, const Matrix<Real>*, TreeEncoderCache<Real>*); \
    template void tree_encoder_backward<Real>(const TreeEncoderParams<Real>&, const Forest<Real>&,                    \
                                              const Matrix<Real>&, const TreeEncoderCache<Real>&, const Matrix<Real>&, \
                                              TreeEncoderParams<Real>&);                                              \
    template Matrix<Real> initial_node_embeddings<Real>(const TreeEncoderParams<Real>&, const Dataset&, std::size_t);

HGFND_INSTANTIATE(float)
HGFND_INSTANTIATE(double)
HGFND_INSTANTIATE(long double)
#undef HGFND_INSTANTIATE

} // namespace hgfnd
