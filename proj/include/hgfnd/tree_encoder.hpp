#pragma once

#include "hgfnd/dataset.hpp"
#include "hgfnd/tensor.hpp"

#include <string>
#include <utility>
#include <vector>

namespace hgfnd {

/// Row-normalised adjacency of an undirected graph: apply(Y) replaces each row
/// by the mean of its neighbours' rows (zero for isolated rows).
class MeanAggregator {
public:
    MeanAggregator() = default;
    MeanAggregator(std::size_t n_nodes, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges);

    std::size_t size() const { return offsets_.size() - 1; }
    std::size_t degree(std::size_t v) const { return offsets_[v + 1] - offsets_[v]; }

    template <typename Real>
    Matrix<Real> apply(const Matrix<Real>& y) const {
        Matrix<Real> out = Matrix<Real>::Zero(y.rows(), y.cols());
        for (std::size_t v = 0; v < size(); ++v) {
            const std::size_t deg = degree(v);
            if (deg == 0) continue;
            auto row = out.row(static_cast<Eigen::Index>(v));
            for (std::size_t p = offsets_[v]; p < offsets_[v + 1]; ++p) row += y.row(neighbors_[p]);
            row /= static_cast<Real>(deg);
        }
        return out;
    }

    /// Transpose of apply(); the adjacency is symmetric, so this is a gather too.
    template <typename Real>
    Matrix<Real> apply_transpose(const Matrix<Real>& g) const {
        Matrix<Real> out = Matrix<Real>::Zero(g.rows(), g.cols());
        for (std::size_t v = 0; v < size(); ++v) {
            auto row = out.row(static_cast<Eigen::Index>(v));
            for (std::size_t p = offsets_[v]; p < offsets_[v + 1]; ++p) {
                const std::uint32_t u = neighbors_[p];
                row += g.row(u) / static_cast<Real>(degree(u));
            }
        }
        return out;
    }

private:
    std::vector<std::size_t> offsets_{0};
    std::vector<std::uint32_t> neighbors_;
};

/// Mean-aggregation message passing layer:
///   out = relu(x * w_self + mean_neighbours(x) * w_nbr)
/// `pre` receives the pre-activation for the backward pass.
template <typename Real>
Matrix<Real> sage_forward(const MeanAggregator& agg, const Matrix<Real>& x, const Matrix<Real>& w_self,
                          const Matrix<Real>& w_nbr, Matrix<Real>& pre) {
    pre = x * w_self + agg.apply<Real>(x * w_nbr);
    return relu(pre);
}

/// Accumulates weight gradients and returns d/dx (empty when `want_input_grad` is false).
template <typename Real>
Matrix<Real> sage_backward(const MeanAggregator& agg, const Matrix<Real>& x, const Matrix<Real>& w_self,
                           const Matrix<Real>& w_nbr, const Matrix<Real>& pre, const Matrix<Real>& d_out,
                           Matrix<Real>& g_self, Matrix<Real>& g_nbr, bool want_input_grad) {
    const Matrix<Real> d_pre = relu_backward(pre, d_out);
    const Matrix<Real> d_agg = agg.apply_transpose<Real>(d_pre);
    g_self.noalias() += x.transpose() * d_pre;
    g_nbr.noalias() += x.transpose() * d_agg;
    if (!want_input_grad) return {};
    Matrix<Real> dx = d_pre * w_self.transpose();
    dx.noalias() += d_agg * w_nbr.transpose();
    return dx;
}

/// Weights of the propagation-tree encoder and of the skip-connection projection.
template <typename Real>
struct TreeEncoderParams {
    Matrix<Real> input_weight; // F x h, maps the raw news feature to width h
    Matrix<Real> input_bias;   // 1 x h
    Matrix<Real> sage1_self;   // F x h
    Matrix<Real> sage1_nbr;    // F x h
    Matrix<Real> sage2_self;   // h x h
    Matrix<Real> sage2_nbr;    // h x h
    Matrix<Real> proj_weight;  // 2h x d
    Matrix<Real> proj_bias;    // 1 x d

    static TreeEncoderParams zeros(std::size_t input_dim, std::size_t hidden_dim);

    template <typename Fn>
    void visit(const std::string& prefix, Fn&& fn) {
        fn(prefix + "input_weight", input_weight);
        fn(prefix + "input_bias", input_bias);
        fn(prefix + "sage1_self", sage1_self);
        fn(prefix + "sage1_nbr", sage1_nbr);
        fn(prefix + "sage2_self", sage2_self);
        fn(prefix + "sage2_nbr", sage2_nbr);
        fn(prefix + "proj_weight", proj_weight);
        fn(prefix + "proj_bias", proj_bias);
    }
    template <typename Fn>
    void visit(const std::string& prefix, Fn&& fn) const {
        const_cast<TreeEncoderParams*>(this)->visit(prefix, [&](const std::string& name, Matrix<Real>& m) {
            fn(name, static_cast<const Matrix<Real>&>(m));
        });
    }
};

/// A group of trees stacked into one block-diagonal graph.
template <typename Real>
struct TreeBatch {
    std::vector<NodeId> news;       // news id of each tree in the batch
    std::vector<std::size_t> roots; // row of each tree's root in `features`
    Matrix<Real> features;
    MeanAggregator aggregator;
};

template <typename Real>
struct Forest {
    std::size_t n_news = 0;
    std::vector<TreeBatch<Real>> batches;
};

/// Groups the dataset's trees, in news order, into batches of `batch_size` trees.
template <typename Real>
Forest<Real> make_forest(const Dataset& dataset, std::size_t batch_size);

template <typename Real>
struct TreeEncoderCache {
    struct Batch {
        Matrix<Real> pre1, hidden1, pre2;
    };
    std::vector<Batch> batches;
    Matrix<Real> roots;        // N x h, root representation of every tree
    Matrix<Real> input_linear; // N x h
    Matrix<Real> concat_pre;   // N x 2h, before relu
    Matrix<Real> concat_out;   // N x 2h, after relu and dropout
    Matrix<Real> dropout;      // N x 2h, empty when dropout is off
};

/// Root representation after two mean-aggregation rounds over each tree, N x h.
template <typename Real>
Matrix<Real> encode_roots(const TreeEncoderParams<Real>& params, const Forest<Real>& forest,
                          TreeEncoderCache<Real>* cache = nullptr);

/// Single-tree convenience wrapper around encode_roots.
template <typename Real>
Vector<Real> encode_tree(const TreeEncoderParams<Real>& params, const PropagationTree& tree);

/// v0 = relu([x * input_weight + input_bias, root]) (dropout) * proj_weight + proj_bias, N x d.
template <typename Real>
Matrix<Real> tree_encoder_forward(const TreeEncoderParams<Real>& params, const Forest<Real>& forest,
                                  const Matrix<Real>& news_features, const Matrix<Real>* dropout,
                                  TreeEncoderCache<Real>* cache);

template <typename Real>
void tree_encoder_backward(const TreeEncoderParams<Real>& params, const Forest<Real>& forest,
                           const Matrix<Real>& news_features, const TreeEncoderCache<Real>& cache,
                           const Matrix<Real>& d_v0, TreeEncoderParams<Real>& grads);

/// initial_node_embeddings without dropout, for a whole dataset.
template <typename Real>
Matrix<Real> initial_node_embeddings(const TreeEncoderParams<Real>& params, const Dataset& dataset,
                                     std::size_t batch_size);

} // namespace hgfnd
