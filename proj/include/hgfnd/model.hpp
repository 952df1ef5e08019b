#pragma once

#include "hgfnd/attention.hpp"
#include "hgfnd/dataset.hpp"
#include "hgfnd/hypergraph.hpp"
#include "hgfnd/tree_encoder.hpp"

#include <iosfwd>
#include <random>

namespace hgfnd {

struct ModelDims {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 128;
    std::size_t layers = 2;

    bool operator==(const ModelDims&) const = default;
};

/// Every trainable tensor: tree encoder + projection, the attention stack, and
/// the classification head (logits = v^L * head_weight + head_bias).
template <typename Real>
struct ModelParams {
    TreeEncoderParams<Real> tree;
    std::vector<AttentionLayerParams<Real>> layers;
    Matrix<Real> head_weight; // d x 2
    Matrix<Real> head_bias;   // 1 x 2

    static ModelParams zeros(const ModelDims& dims);
    /// Glorot-uniform matrices and context vectors, zero biases.
    static ModelParams initialize(const ModelDims& dims, std::uint64_t seed);

    ModelDims dims() const;
    std::size_t parameter_count() const;

    /// Calls fn(name, tensor) for every tensor in a fixed order.
    template <typename Fn>
    void visit(Fn&& fn) {
        tree.visit("tree.", fn);
        for (std::size_t l = 0; l < layers.size(); ++l) layers[l].visit("layer" + std::to_string(l) + ".", fn);
        fn(std::string("head.weight"), head_weight);
        fn(std::string("head.bias"), head_bias);
    }
    template <typename Fn>
    void visit(Fn&& fn) const {
        const_cast<ModelParams*>(this)->visit(
            [&](const std::string& name, Matrix<Real>& m) { fn(name, static_cast<const Matrix<Real>&>(m)); });
    }

    template <typename Other>
    ModelParams<Other> cast() const;
};

/// Per-dataset model inputs converted to the working precision once.
template <typename Real>
struct ModelInputs {
    Matrix<Real> news_features;
    Forest<Real> forest;
    const Hypergraph* hypergraph = nullptr;

    static ModelInputs prepare(const Dataset& dataset, const Hypergraph& h, std::size_t batch_size);
};

/// Attention coefficients of every layer. alpha[l] is in hyperedge-major
/// incidence order, beta[l] in node-major order (see Hypergraph offsets).
struct AttentionSnapshot {
    std::vector<std::vector<double>> alpha;
    std::vector<std::vector<double>> beta;

    /// CSV "layer,level,i,j,coefficient": i is always a node and j a hyperedge;
    /// level is "node" for alpha and "hyperedge" for beta. Layers count from 1.
    void write_csv(std::ostream& out, const Hypergraph& h) const;
};

template <typename Real>
struct ForwardPass {
    TreeEncoderCache<Real> tree;
    Matrix<Real> initial;                      // v0
    std::vector<AttentionLayerCache<Real>> layers;
    std::vector<Matrix<Real>> dropout;         // mask applied to the input of layer l >= 1
    Matrix<Real> logits;                       // N x 2

    const Matrix<Real>& final_states() const { return layers.back().node.states; }
    const Matrix<Real>& final_hyperedge_states() const { return layers.back().edge.states; }
    AttentionSnapshot snapshot() const;
};

/// Full forward pass. With `rng` set, dropout at `dropout_rate` is applied to
/// the skip-connection concatenation and between attention layers.
template <typename Real>
ForwardPass<Real> model_forward(const ModelParams<Real>& params, const ModelInputs<Real>& inputs,
                                double dropout_rate = 0.0, std::mt19937_64* rng = nullptr);

/// Reverse-mode gradients of a scalar whose gradient w.r.t. the logits is
/// `d_logits`, through the exact computation recorded in `pass`.
template <typename Real>
ModelParams<Real> model_backward(const ModelParams<Real>& params, const ModelInputs<Real>& inputs,
                                 const ForwardPass<Real>& pass, const Matrix<Real>& d_logits);

template <typename Real>
struct ForwardResult {
    Matrix<Real> logits;
    AttentionSnapshot snapshot;
};

/// Convenience forward over a dataset. In train mode dropout (0.3 by default)
/// is sampled from `seed`; otherwise the pass is deterministic.
template <typename Real>
ForwardResult<Real> forward(const ModelParams<Real>& params, const Dataset& dataset, const Hypergraph& h,
                            bool train_mode, std::uint64_t seed = 0, double dropout_rate = 0.3,
                            std::size_t batch_size = 128);

struct Prediction {
    std::vector<int> labels;
    Matrix<double> probabilities; // N x 2, rows sum to 1
};

/// Row-wise softmax; argmax with ties going to label 0.
template <typename Real>
Prediction predict(const Matrix<Real>& logits);

} // namespace hgfnd
