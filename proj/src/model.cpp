#include "hgfnd/model.hpp"

#include "hgfnd/error.hpp"

#include <ostream>

namespace hgfnd {

Precision parse_precision(std::string_view text) {
    if (text == "f32") return Precision::F32;
    if (text == "f64") return Precision::F64;
    throw ValidationError("precision must be f32 or f64, got '" + std::string(text) + "'");
}

std::string_view to_string(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }

template <typename Real>
ModelParams<Real> ModelParams<Real>::zeros(const ModelDims& dims) {
    if (dims.input_dim == 0 || dims.hidden_dim == 0 || dims.layers == 0) {
        throw ValidationError("model dimensions must be positive");
    }
    ModelParams p;
    p.tree = TreeEncoderParams<Real>::zeros(dims.input_dim, dims.hidden_dim);
    p.layers.assign(dims.layers, AttentionLayerParams<Real>::zeros(dims.hidden_dim));
    p.head_weight = Matrix<Real>::Zero(static_cast<Eigen::Index>(dims.hidden_dim), 2);
    p.head_bias = Matrix<Real>::Zero(1, 2);
    return p;
}

template <typename Real>
ModelParams<Real> ModelParams<Real>::initialize(const ModelDims& dims, std::uint64_t seed) {
    ModelParams p = zeros(dims);
    std::mt19937_64 rng(seed);
    p.visit([&](const std::string& name, Matrix<Real>& m) {
        if (name.ends_with("bias")) return;
        // Context vectors are treated as (length x 1) matrices for the fan computation.
        const bool vector = m.rows() == 1;
        m = vector ? glorot_uniform<Real>(m.cols(), 1, rng).transpose() : glorot_uniform<Real>(m.rows(), m.cols(), rng);
    });
    return p;
}

template <typename Real>
ModelDims ModelParams<Real>::dims() const {
    return ModelDims{static_cast<std::size_t>(tree.input_weight.rows()), static_cast<std::size_t>(tree.input_weight.cols()),
                     layers.size()};
}

template <typename Real>
std::size_t ModelParams<Real>::parameter_count() const {
    std::size_t count = 0;
    visit([&](const std::string&, const Matrix<Real>& m) { count += static_cast<std::size_t>(m.size()); });
    return count;
}

template <typename Real>
template <typename Other>
ModelParams<Other> ModelParams<Real>::cast() const {
    ModelParams<Other> out = ModelParams<Other>::zeros(dims());
    std::vector<const Matrix<Real>*> src;
    visit([&](const std::string&, const Matrix<Real>& m) { src.push_back(&m); });
    std::size_t k = 0;
    out.visit([&](const std::string&, Matrix<Other>& m) { m = src[k++]->template cast<Other>(); });
    return out;
}

template <typename Real>
ModelInputs<Real> ModelInputs<Real>::prepare(const Dataset& dataset, const Hypergraph& h, std::size_t batch_size) {
    if (h.n_nodes() != dataset.size()) {
        throw ValidationError("hypergraph has " + std::to_string(h.n_nodes()) + " nodes but the dataset has " +
                              std::to_string(dataset.size()) + " news items");
    }
    ModelInputs in;
    in.news_features = dataset.news_features.cast<Real>();
    in.forest = make_forest<Real>(dataset, batch_size);
    in.hypergraph = &h;
    return in;
}

void AttentionSnapshot::write_csv(std::ostream& out, const Hypergraph& h) const {
    out << "layer,level,i,j,coefficient\n";
    out.precision(17);
    for (std::size_t l = 0; l < alpha.size(); ++l) {
        for (std::size_t j = 0; j < h.n_edges(); ++j) {
            const auto members = h.members(j);
            for (std::size_t k = 0; k < members.size(); ++k) {
                out << l + 1 << ",node," << members[k] << ',' << j << ',' << alpha[l][h.edge_offsets()[j] + k] << '\n';
            }
        }
        for (std::size_t i = 0; i < h.n_nodes(); ++i) {
            const auto incident = h.incident(i);
            for (std::size_t k = 0; k < incident.size(); ++k) {
                out << l + 1 << ",hyperedge," << i << ',' << incident[k] << ','
                    << beta[l][h.node_offsets()[i] + k] << '\n';
            }
        }
    }
}

template <typename Real>
AttentionSnapshot ForwardPass<Real>::snapshot() const {
    AttentionSnapshot s;
    for (const auto& layer : layers) {
        s.alpha.emplace_back(layer.edge.alpha.begin(), layer.edge.alpha.end());
        s.beta.emplace_back(layer.node.beta.begin(), layer.node.beta.end());
    }
    return s;
}

template <typename Real>
ForwardPass<Real> model_forward(const ModelParams<Real>& params, const ModelInputs<Real>& inputs, double dropout_rate,
                                std::mt19937_64* rng) {
    if (!inputs.hypergraph) throw ValidationError("model inputs have no hypergraph");
    if (inputs.news_features.cols() != params.tree.input_weight.rows()) {
        throw ShapeError("feature width " + std::to_string(inputs.news_features.cols()) +
                         " differs from the model input width " + std::to_string(params.tree.input_weight.rows()));
    }
    const Hypergraph& h = *inputs.hypergraph;
    const bool drop = rng != nullptr && dropout_rate > 0.0;
    ForwardPass<Real> pass;
    Matrix<Real> concat_mask;
    if (drop) {
        concat_mask = dropout_mask<Real>(inputs.news_features.rows(), 2 * params.tree.input_weight.cols(), dropout_rate, *rng);
    }
    pass.initial = tree_encoder_forward(params.tree, inputs.forest, inputs.news_features, drop ? &concat_mask : nullptr,
                                        &pass.tree);
    Matrix<Real> state = pass.initial;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        if (l > 0 && drop) {
            pass.dropout.push_back(dropout_mask<Real>(state.rows(), state.cols(), dropout_rate, *rng));
            state.array() *= pass.dropout.back().array();
        } else if (l > 0) {
            pass.dropout.emplace_back();
        }
        pass.layers.push_back(attention_layer_forward(params.layers[l], std::move(state), h));
        state = pass.layers.back().node.states;
    }
    pass.logits = state * params.head_weight;
    pass.logits.rowwise() += params.head_bias.row(0);
    return pass;
}

template <typename Real>
ModelParams<Real> model_backward(const ModelParams<Real>& params, const ModelInputs<Real>& inputs,
                                 const ForwardPass<Real>& pass, const Matrix<Real>& d_logits) {
    const Hypergraph& h = *inputs.hypergraph;
    ModelParams<Real> g = ModelParams<Real>::zeros(params.dims());
    g.head_weight.noalias() += pass.final_states().transpose() * d_logits;
    g.head_bias += d_logits.colwise().sum();
    Matrix<Real> d_state = d_logits * params.head_weight.transpose();
    for (std::size_t l = params.layers.size(); l-- > 0;) {
        d_state = attention_layer_backward(params.layers[l], pass.layers[l], h, d_state, g.layers[l]);
        if (l > 0 && pass.dropout[l - 1].size() > 0) d_state.array() *= pass.dropout[l - 1].array();
    }
    tree_encoder_backward(params.tree, inputs.forest, inputs.news_features, pass.tree, d_state, g.tree);
    return g;
}

template <typename Real>
ForwardResult<Real> forward(const ModelParams<Real>& params, const Dataset& dataset, const Hypergraph& h,
                            bool train_mode, std::uint64_t seed, double dropout_rate, std::size_t batch_size) {
    const auto inputs = ModelInputs<Real>::prepare(dataset, h, batch_size);
    std::mt19937_64 rng(seed);
    auto pass = model_forward(params, inputs, train_mode ? dropout_rate : 0.0, train_mode ? &rng : nullptr);
    return {std::move(pass.logits), pass.snapshot()};
}

template <typename Real>
Prediction predict(const Matrix<Real>& logits) {
    Prediction p;
    p.labels.resize(static_cast<std::size_t>(logits.rows()));
    p.probabilities.resize(logits.rows(), 2);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double z0 = static_cast<double>(logits(i, 0));
        const double z1 = static_cast<double>(logits(i, 1));
        const double peak = std::max(z0, z1);
        const double e0 = std::exp(z0 - peak);
        const double e1 = std::exp(z1 - peak);
        p.probabilities(i, 0) = e0 / (e0 + e1);
        p.probabilities(i, 1) = e1 / (e0 + e1);
        p.labels[static_cast<std::size_t>(i)] = z1 > z0 ? kTrue : kFake;
    }
    return p;
}

#define HGFND_INSTANTIATE(Real)                                                                                       \
    template struct ModelParams<Real>;                                                                                \
    template struct ModelInputs<Real>;                                                                                \
    template struct ForwardPass<Real>;                                                                                \
    template ForwardPass<Real> model_forward<Real>(const ModelParams<Real>&, const ModelInputs<Real>&, double,        \
                                                   std::mt19937_64*);                                                 \
    template ModelParams<Real> model_backward<Real>(const ModelParams<Real>&, const ModelInputs<Real>&,               \
                                                    const ForwardPass<Real>&, const Matrix<Real>&);                   \
    template ForwardResult<Real> forward<Real>(const ModelParams<Real>&, const Dataset&, const Hypergraph&, bool,     \
                                               std::uint64_t, double, std::size_t);                                   \
    template Prediction predict<Real>(const Matrix<Real>&);

HGFND_INSTANTIATE(float)
HGFND_INSTANTIATE(double)
HGFND_INSTANTIATE(long double)
#undef HGFND_INSTANTIATE

template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;
template ModelParams<long double> ModelParams<double>::cast<long double>() const;

} // namespace hgfnd
