#include "hgfnd/attention.hpp"

#include "hgfnd/error.hpp"

#include <algorithm>
#include <cmath>

namespace hgfnd {

template <typename Real>
AttentionLayerParams<Real> AttentionLayerParams<Real>::zeros(std::size_t hidden_dim) {
    const auto d = static_cast<Eigen::Index>(hidden_dim);
    return {Matrix<Real>::Zero(d, d), Matrix<Real>::Zero(d, d), Matrix<Real>::Zero(1, d), Matrix<Real>::Zero(1, 2 * d)};
}

namespace {

// Softmax of scores[index[k]] for k in [begin, end), written to out[begin..end).
template <typename Real, typename IndexFn>
void grouped_softmax(const Vector<Real>& scores, std::size_t begin, std::size_t end, IndexFn index,
                     std::vector<Real>& out) {
    if (begin == end) return;
    Real peak = scores[index(begin)];
    for (std::size_t p = begin + 1; p < end; ++p) peak = std::max(peak, scores[index(p)]);
    Real total = 0;
    for (std::size_t p = begin; p < end; ++p) {
        out[p] = std::exp(scores[index(p)] - peak);
        total += out[p];
    }
    for (std::size_t p = begin; p < end; ++p) out[p] /= total;
}

} // namespace

template <typename Real>
HyperedgeStep<Real> hyperedge_step(const AttentionLayerParams<Real>& params, const Matrix<Real>& node_states,
                                   const Hypergraph& h) {
    if (static_cast<std::size_t>(node_states.rows()) != h.n_nodes()) {
        throw ShapeError("node state rows differ from hypergraph size");
    }
    HyperedgeStep<Real> s;
    s.projected = node_states * params.w1;
    s.node_scores = leaky_relu(s.projected) * params.a1.transpose();
    s.alpha.assign(h.n_incidences(), Real(0));
    s.pre = Matrix<Real>::Zero(static_cast<Eigen::Index>(h.n_edges()), s.projected.cols());
    const auto offsets = h.edge_offsets();
    const auto m = static_cast<std::ptrdiff_t>(h.n_edges());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < m; ++j) {
        const auto members = h.members(static_cast<std::size_t>(j));
        const std::size_t base = offsets[static_cast<std::size_t>(j)];
        grouped_softmax<Real>(s.node_scores, base, base + members.size(),
                              [&](std::size_t q) { return members[q - base]; }, s.alpha);
        auto row = s.pre.row(j);
        for (std::size_t k = 0; k < members.size(); ++k) row += s.alpha[base + k] * s.projected.row(members[k]);
    }
    s.states = relu(s.pre);
    return s;
}

template <typename Real>
NodeStep<Real> node_step(const AttentionLayerParams<Real>& params, const Matrix<Real>& hyperedge_states,
                         const Hypergraph& h) {
    if (static_cast<std::size_t>(hyperedge_states.rows()) != h.n_edges()) {
        throw ShapeError("hyperedge state rows differ from hyperedge count");
    }
    const Eigen::Index d = params.w2.cols();
    NodeStep<Real> s;
    s.projected = hyperedge_states * params.w2;
    s.edge_scores = leaky_relu(s.projected) * params.a2.leftCols(d).transpose();
    s.beta.assign(h.n_incidences(), Real(0));
    s.pre = Matrix<Real>::Zero(static_cast<Eigen::Index>(h.n_nodes()), d);
    const auto offsets = h.node_offsets();
    const auto n = static_cast<std::ptrdiff_t>(h.n_nodes());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto incident = h.incident(static_cast<std::size_t>(i));
        const std::size_t base = offsets[static_cast<std::size_t>(i)];
        grouped_softmax<Real>(s.edge_scores, base, base + incident.size(),
                              [&](std::size_t p) { return incident[p - base]; }, s.beta);
        auto row = s.pre.row(i);
        for (std::size_t k = 0; k < incident.size(); ++k) row += s.beta[base + k] * s.projected.row(incident[k]);
    }
    s.states = relu(s.pre);
    return s;
}

template <typename Real>
AttentionLayerCache<Real> attention_layer_forward(const AttentionLayerParams<Real>& params, Matrix<Real> input,
                                                  const Hypergraph& h) {
    AttentionLayerCache<Real> c;
    c.input = std::move(input);
    c.edge = hyperedge_step(params, c.input, h);
    c.node = node_step(params, c.edge.states, h);
    return c;
}

template <typename Real>
Matrix<Real> attention_layer_backward(const AttentionLayerParams<Real>& params, const AttentionLayerCache<Real>& c,
                                      const Hypergraph& h, const Matrix<Real>& d_out,
                                      AttentionLayerParams<Real>& grads) {
    const Eigen::Index d = params.w1.cols();
    const auto n = static_cast<std::ptrdiff_t>(h.n_nodes());
    const auto m = static_cast<std::ptrdiff_t>(h.n_edges());
    const auto node_off = h.node_offsets();
    const auto edge_off = h.edge_offsets();
    const auto n2e = h.node_to_edge_position();
    const auto e2n = h.edge_to_node_position();

    // Hyperedge-level attention.
    const Matrix<Real> d_node_pre = relu_backward(c.node.pre, d_out);
    std::vector<Real> d_edge_score_pair(h.n_incidences(), Real(0)); // node-major
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto incident = h.incident(static_cast<std::size_t>(i));
        const std::size_t base = node_off[static_cast<std::size_t>(i)];
        Real weighted = 0;
        std::vector<Real> d_beta(incident.size());
        for (std::size_t k = 0; k < incident.size(); ++k) {
            d_beta[k] = d_node_pre.row(i).dot(c.node.projected.row(incident[k]));
            weighted += c.node.beta[base + k] * d_beta[k];
        }
        for (std::size_t k = 0; k < incident.size(); ++k) {
            d_edge_score_pair[base + k] = c.node.beta[base + k] * (d_beta[k] - weighted);
        }
    }
    Matrix<Real> d_edge_proj = Matrix<Real>::Zero(m, d);
    Vector<Real> d_edge_score = Vector<Real>::Zero(m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < m; ++j) {
        const auto members = h.members(static_cast<std::size_t>(j));
        const std::size_t base = edge_off[static_cast<std::size_t>(j)];
        auto row = d_edge_proj.row(j);
        for (std::size_t k = 0; k < members.size(); ++k) {
            const std::size_t p = e2n[base + k];
            row += c.node.beta[p] * d_node_pre.row(members[k]);
            d_edge_score[j] += d_edge_score_pair[p];
        }
    }
    const Matrix<Real> edge_act = leaky_relu(c.node.projected);
    grads.a2.leftCols(d) += d_edge_score.transpose() * edge_act;
    const Matrix<Real> d_edge_act = d_edge_score * params.a2.leftCols(d);
    d_edge_proj += leaky_relu_backward(c.node.projected, d_edge_act);
    grads.w2.noalias() += c.edge.states.transpose() * d_edge_proj;
    const Matrix<Real> d_edge_states = d_edge_proj * params.w2.transpose();

    // Node-level attention.
    const Matrix<Real> d_edge_pre = relu_backward(c.edge.pre, d_edge_states);
    std::vector<Real> d_node_score_pair(h.n_incidences(), Real(0)); // hyperedge-major
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < m; ++j) {
        const auto members = h.members(static_cast<std::size_t>(j));
        const std::size_t base = edge_off[static_cast<std::size_t>(j)];
        Real weighted = 0;
        std::vector<Real> d_alpha(members.size());
        for (std::size_t k = 0; k < members.size(); ++k) {
            d_alpha[k] = d_edge_pre.row(j).dot(c.edge.projected.row(members[k]));
            weighted += c.edge.alpha[base + k] * d_alpha[k];
        }
        for (std::size_t k = 0; k < members.size(); ++k) {
            d_node_score_pair[base + k] = c.edge.alpha[base + k] * (d_alpha[k] - weighted);
        }
    }
    Matrix<Real> d_node_proj = Matrix<Real>::Zero(n, d);
    Vector<Real> d_node_score = Vector<Real>::Zero(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto incident = h.incident(static_cast<std::size_t>(i));
        const std::size_t base = node_off[static_cast<std::size_t>(i)];
        auto row = d_node_proj.row(i);
        for (std::size_t k = 0; k < incident.size(); ++k) {
            const std::size_t q = n2e[base + k];
            row += c.edge.alpha[q] * d_edge_pre.row(incident[k]);
            d_node_score[i] += d_node_score_pair[q];
        }
    }
    const Matrix<Real> node_act = leaky_relu(c.edge.projected);
    grads.a1 += d_node_score.transpose() * node_act;
    const Matrix<Real> d_node_act = d_node_score * params.a1;
    d_node_proj += leaky_relu_backward(c.edge.projected, d_node_act);
    grads.w1.noalias() += c.input.transpose() * d_node_proj;
    return d_node_proj * params.w1.transpose();
}

#define HGFND_INSTANTIATE(Real)                                                                                       \
    template struct AttentionLayerParams<Real>;                                                                       \
    template HyperedgeStep<Real> hyperedge_step<Real>(const AttentionLayerParams<Real>&, const Matrix<Real>&,         \
                                                      const Hypergraph&);                                             \
    template NodeStep<Real> node_step<Real>(const AttentionLayerParams<Real>&, const Matrix<Real>&, const Hypergraph&); \
    template AttentionLayerCache<Real> attention_layer_forward<Real>(const AttentionLayerParams<Real>&, Matrix<Real>,  \
                                                                     const Hypergraph&);                              \
    template Matrix<Real> attention_layer_backward<Real>(const AttentionLayerParams<Real>&,                           \
                                                         const AttentionLayerCache<Real>&, const Hypergraph&,          \
                                                         const Matrix<Real>&, AttentionLayerParams<Real>&);

HGFND_INSTANTIATE(float)
HGFND_INSTANTIATE(double)
HGFND_INSTANTIATE(long double)
#undef HGFND_INSTANTIATE

} // namespace hgfnd
