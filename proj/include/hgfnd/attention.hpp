#pragma once

#include "hgfnd/hypergraph.hpp"
#include "hgfnd/tensor.hpp"

#include <string>
#include <vector>

namespace hgfnd {

/// One dual-level attention layer. Row-vector convention: a node state v is a
/// 1 x d row and its projection is v * w1.
template <typename Real>
struct AttentionLayerParams {
    Matrix<Real> w1; // d x d, node projection
    Matrix<Real> w2; // d x d, hyperedge projection
    Matrix<Real> a1; // 1 x d, node-level context vector
    Matrix<Real> a2; // 1 x 2d, hyperedge-level context vector over [w2 e ; w1 v]

    static AttentionLayerParams zeros(std::size_t hidden_dim);

    template <typename Fn>
    void visit(const std::string& prefix, Fn&& fn) {
        fn(prefix + "w1", w1);
        fn(prefix + "w2", w2);
        fn(prefix + "a1", a1);
        fn(prefix + "a2", a2);
    }
};

/// Node-level attention: members -> hyperedge representation.
template <typename Real>
struct HyperedgeStep {
    Matrix<Real> projected;   // N x d, node states * w1
    Vector<Real> node_scores; // N, a1 . LeakyReLU(projected row)
    std::vector<Real> alpha;  // one per incidence, hyperedge-major order
    Matrix<Real> pre;         // M x d, sum_k alpha_jk * projected_k
    Matrix<Real> states;      // M x d, relu(pre)
};

/// Hyperedge-level attention: incident hyperedges -> node representation.
template <typename Real>
struct NodeStep {
    Matrix<Real> projected;   // M x d, hyperedge states * w2
    Vector<Real> edge_scores; // M, a2[:d] . LeakyReLU(projected row)
    std::vector<Real> beta;   // one per incidence, node-major order
    Matrix<Real> pre;         // N x d
    Matrix<Real> states;      // N x d, relu(pre); zero rows for isolated nodes
};

template <typename Real>
HyperedgeStep<Real> hyperedge_step(const AttentionLayerParams<Real>& params, const Matrix<Real>& node_states,
                                   const Hypergraph& h);

/// The score of pair (i, j) is a2 . LeakyReLU([w2 e_j ; w1 v_i]). Its node half
/// a2[d:] . LeakyReLU(w1 v_i) is the same for every hyperedge incident to i and
/// cancels in node i's softmax, so only the hyperedge half is evaluated and the
/// previous node states are not needed.
template <typename Real>
NodeStep<Real> node_step(const AttentionLayerParams<Real>& params, const Matrix<Real>& hyperedge_states,
                         const Hypergraph& h);

template <typename Real>
struct AttentionLayerCache {
    Matrix<Real> input;
    HyperedgeStep<Real> edge;
    NodeStep<Real> node;
};

template <typename Real>
AttentionLayerCache<Real> attention_layer_forward(const AttentionLayerParams<Real>& params, Matrix<Real> input,
                                                  const Hypergraph& h);

/// Accumulates parameter gradients into `grads` and returns d/d(input).
template <typename Real>
Matrix<Real> attention_layer_backward(const AttentionLayerParams<Real>& params, const AttentionLayerCache<Real>& cache,
                                      const Hypergraph& h, const Matrix<Real>& d_out,
                                      AttentionLayerParams<Real>& grads);

} // namespace hgfnd
