#pragma once

#include "hgfnd/metrics.hpp"
#include "hgfnd/model.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>

namespace hgfnd {

struct TrainConfig {
    std::size_t hidden_dim = 128;
    std::size_t layers = 2;
    std::size_t batch_size = 128;
    double learning_rate = 1e-3;
    double dropout = 0.3;
    std::size_t max_epochs = 200;
    std::size_t patience = 20;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    Precision precision = Precision::F32;

    void validate() const;

    /// Line-oriented "key = value"; '#' starts a comment. Unknown keys are errors.
    static TrainConfig parse(std::istream& in);
    static TrainConfig load(const std::filesystem::path& path);
    void write(std::ostream& out) const;
};

/// Mean binary cross-entropy over `mask` with p1 = softmax(row)[1],
/// probabilities clamped to [1e-12, 1 - 1e-12]. Computed in double.
template <typename Real>
double loss(const Matrix<Real>& logits, const std::vector<int>& labels, const std::vector<NodeId>& mask);

/// d loss / d logits, scaled by `scale`: row i in the mask gets (p - onehot(y)) / |mask|.
template <typename Real>
Matrix<Real> loss_gradient(const Matrix<Real>& logits, const std::vector<int>& labels,
                           const std::vector<NodeId>& mask, double scale = 1.0);

template <typename Real>
struct LossAndGradient {
    double loss = 0.0;
    ModelParams<Real> gradients;
};

/// Deterministic (dropout-free) loss and exact gradients w.r.t. every parameter.
/// Throws NumericError naming the first tensor with a non-finite entry.
template <typename Real>
LossAndGradient<Real> backward(const ModelParams<Real>& params, const ModelInputs<Real>& inputs,
                               const std::vector<int>& labels, const std::vector<NodeId>& mask,
                               double loss_scale = 1.0);

/// Adam over any parameter set exposing visit(fn(name, Matrix<Real>&)).
template <typename Real>
class Adam {
public:
    template <typename Params>
    Adam(const Params& like, double learning_rate, double beta1, double beta2, double epsilon)
        : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(epsilon) {
        like.visit([&](const std::string&, const Matrix<Real>& m) {
            m_.push_back(Matrix<Real>::Zero(m.rows(), m.cols()));
            v_.push_back(Matrix<Real>::Zero(m.rows(), m.cols()));
        });
    }

    template <typename Params>
    void step(Params& params, const Params& grads) {
        ++t_;
        std::vector<const Matrix<Real>*> g;
        grads.visit([&](const std::string&, const Matrix<Real>& m) { g.push_back(&m); });
        const Real b1 = static_cast<Real>(b1_);
        const Real b2 = static_cast<Real>(b2_);
        const Real c1 = static_cast<Real>(1.0 - std::pow(b1_, static_cast<double>(t_)));
        const Real c2 = static_cast<Real>(1.0 - std::pow(b2_, static_cast<double>(t_)));
        const Real lr = static_cast<Real>(lr_);
        const Real eps = static_cast<Real>(eps_);
        std::size_t k = 0;
        params.visit([&](const std::string&, Matrix<Real>& p) {
            auto m = m_[k].array();
            auto v = v_[k].array();
            const auto gk = g[k]->array();
            m = b1 * m + (Real(1) - b1) * gk;
            v = b2 * v + (Real(1) - b2) * gk.square();
            p.array() -= lr * (m / c1) / ((v / c2).sqrt() + eps);
            ++k;
        });
    }

    std::size_t steps() const { return t_; }

private:
    std::vector<Matrix<Real>> m_, v_;
    double lr_, b1_, b2_, eps_;
    std::size_t t_ = 0;
};

struct EpochRecord {
    std::size_t epoch = 0; // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double val_f1 = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    Metrics validation;
    Metrics test;
    double seconds = 0.0;
    AttentionSnapshot attention;

    void write_json(std::ostream& out) const;
};

template <typename Real>
struct TrainResult {
    ModelParams<Real> params;
    TrainReport report;
};

/// Called after every optimizer step with the epoch number and current parameters.
template <typename Real>
using EpochCallback = std::function<void(std::size_t, const ModelParams<Real>&)>;

/// Full-graph transductive training with Adam and early stopping on validation
/// accuracy (ties broken by lower validation loss). Returns the best-val params.
template <typename Real>
TrainResult<Real> train(const TrainConfig& config, const Dataset& dataset, const Hypergraph& h,
                        const EpochCallback<Real>& on_epoch = {});

/// Same, starting from the given parameters instead of a fresh initialisation.
template <typename Real>
TrainResult<Real> train_from(const TrainConfig& config, ModelParams<Real> initial, const Dataset& dataset,
                             const Hypergraph& h, const EpochCallback<Real>& on_epoch = {});

/// Deterministic forward, argmax predictions compared against the split's labels.
template <typename Real>
Metrics evaluate(const ModelParams<Real>& params, const Dataset& dataset, const Hypergraph& h,
                 const std::vector<NodeId>& split, std::size_t batch_size = 128);

struct GradCheckEntry {
    std::string tensor;
    std::size_t checked = 0;
    double max_relative_error = 0.0;
    double max_abs_analytic = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> tensors;
    double tolerance = 1e-4;

    double max_relative_error() const;
    bool passed() const;
    std::vector<std::string> failures() const;
};

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    std::size_t full_check_limit = 64; // tensors with at most this many entries are checked exhaustively
    std::size_t samples = 50;          // entries sampled from larger tensors
    std::uint64_t seed = 0;
    /// Applied to the analytic gradients before comparison (planted-bug testing).
    std::function<void(ModelParams<double>&)> tamper;
};

GradCheckReport grad_check(const ModelParams<double>& params, const Dataset& dataset, const Hypergraph& h,
                           const GradCheckOptions& options = {});

/// A small random dataset and hypergraph with every node in at least one hyperedge,
/// used by the gradcheck command.
struct GradCheckFixture {
    Dataset dataset;
    Hypergraph hypergraph;
};
GradCheckFixture make_grad_check_fixture(std::size_t n_news, std::size_t n_edges, std::size_t feature_dim,
                                         std::uint64_t seed);

} // namespace hgfnd
