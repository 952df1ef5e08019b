#include "hgfnd/training.hpp"

#include "hgfnd/error.hpp"
#include "hgfnd/synthetic.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace hgfnd {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream in(value);
    T out{};
    in >> out;
    if (!in || !(in >> std::ws).eof()) throw FormatError("config: bad value '" + value + "' for " + key);
    return out;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
    if (!value.empty() && value.front() == '-') throw FormatError("config: " + key + " must be non-negative");
    return parse_number<std::size_t>(key, value);
}

void require_labelled(const std::vector<int>& labels, const std::vector<NodeId>& ids, const char* what) {
    for (NodeId id : ids) {
        if (id >= labels.size()) throw ValidationError(std::string(what) + " references unknown news id " + std::to_string(id));
        if (labels[id] < 0) throw ValidationError(std::string(what) + " contains unlabelled news " + std::to_string(id));
    }
}

/// Numerically stable p1 = softmax(z0, z1)[1].
double prob_true(double z0, double z1) { return 1.0 / (1.0 + std::exp(z0 - z1)); }

template <typename Real>
void check_finite(const ModelParams<Real>& grads) {
    grads.visit([](const std::string& name, const Matrix<Real>& m) {
        if (!m.allFinite()) throw NumericError("non-finite gradient in " + name);
    });
}

template <typename Real>
std::vector<int> argmax_labels(const Matrix<Real>& logits) {
    return predict(logits).labels;
}

template <typename Real>
Metrics split_metrics(const std::vector<int>& predicted, const std::vector<int>& labels, const std::vector<NodeId>& ids) {
    std::vector<int> p, a;
    p.reserve(ids.size());
    a.reserve(ids.size());
    for (NodeId id : ids) {
        p.push_back(predicted[id]);
        a.push_back(labels[id]);
    }
    return Metrics::from_predictions(p, a);
}

nlohmann::json metrics_json(const Metrics& m) {
    return {{"accuracy", m.accuracy}, {"f1_macro", m.f1_macro}, {"f1_fake", m.f1_fake}, {"f1_true", m.f1_true},
            {"tp", m.tp},             {"fp", m.fp},             {"tn", m.tn},           {"fn", m.fn}};
}

} // namespace

void TrainConfig::validate() const {
    if (hidden_dim == 0 || layers == 0 || batch_size == 0 || max_epochs == 0 || patience == 0) {
        throw ValidationError("train config: hidden_dim, layers, batch_size, max_epochs and patience must be positive");
    }
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ValidationError("train config: learning_rate must be >= 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("train config: dropout must lie in [0, 1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("train config: Adam betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ValidationError("train config: epsilon must be positive");
}

TrainConfig TrainConfig::parse(std::istream& in) {
    TrainConfig c;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw FormatError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        if (key == "hidden_dim") c.hidden_dim = parse_count(key, value);
        else if (key == "layers") c.layers = parse_count(key, value);
        else if (key == "batch_size") c.batch_size = parse_count(key, value);
        else if (key == "learning_rate") c.learning_rate = parse_number<double>(key, value);
        else if (key == "dropout") c.dropout = parse_number<double>(key, value);
        else if (key == "max_epochs") c.max_epochs = parse_count(key, value);
        else if (key == "patience") c.patience = parse_count(key, value);
        else if (key == "beta1") c.beta1 = parse_number<double>(key, value);
        else if (key == "beta2") c.beta2 = parse_number<double>(key, value);
        else if (key == "epsilon") c.epsilon = parse_number<double>(key, value);
        else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
        else if (key == "precision") c.precision = parse_precision(value);
        else throw FormatError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config " + path.string());
    return parse(in);
}

void TrainConfig::write(std::ostream& out) const {
    out << "hidden_dim = " << hidden_dim << "\nlayers = " << layers << "\nbatch_size = " << batch_size
        << "\nlearning_rate = " << learning_rate << "\ndropout = " << dropout << "\nmax_epochs = " << max_epochs
        << "\npatience = " << patience << "\nbeta1 = " << beta1 << "\nbeta2 = " << beta2 << "\nepsilon = " << epsilon
        << "\nseed = " << seed << "\nprecision = " << to_string(precision) << '\n';
}

template <typename Real>
double loss(const Matrix<Real>& logits, const std::vector<int>& labels, const std::vector<NodeId>& mask) {
    if (mask.empty()) throw ValidationError("loss over an empty mask");
    require_labelled(labels, mask, "loss mask");
    double total = 0.0;
    for (NodeId i : mask) {
        const double p1 = std::clamp(prob_true(logits(i, 0), logits(i, 1)), 1e-12, 1.0 - 1e-12);
        total -= labels[i] == kTrue ? std::log(p1) : std::log(1.0 - p1);
    }
    return total / static_cast<double>(mask.size());
}

template <typename Real>
Matrix<Real> loss_gradient(const Matrix<Real>& logits, const std::vector<int>& labels, const std::vector<NodeId>& mask,
                           double scale) {
    if (mask.empty()) throw ValidationError("loss over an empty mask");
    require_labelled(labels, mask, "loss mask");
    Matrix<Real> g = Matrix<Real>::Zero(logits.rows(), 2);
    const double w = scale / static_cast<double>(mask.size());
    for (NodeId i : mask) {
        const double p1 = prob_true(logits(i, 0), logits(i, 1));
        const double r = (p1 - (labels[i] == kTrue ? 1.0 : 0.0)) * w;
        g(i, 0) = static_cast<Real>(-r);
        g(i, 1) = static_cast<Real>(r);
    }
    return g;
}

template <typename Real>
LossAndGradient<Real> backward(const ModelParams<Real>& params, const ModelInputs<Real>& inputs,
                               const std::vector<int>& labels, const std::vector<NodeId>& mask, double loss_scale) {
    const auto pass = model_forward(params, inputs);
    LossAndGradient<Real> out;
    out.loss = loss_scale * loss(pass.logits, labels, mask);
    out.gradients = model_backward(params, inputs, pass, loss_gradient(pass.logits, labels, mask, loss_scale));
    check_finite(out.gradients);
    return out;
}

void TrainReport::write_json(std::ostream& out) const {
    nlohmann::json j;
    j["best_epoch"] = best_epoch;
    j["seconds"] = seconds;
    j["validation"] = metrics_json(validation);
    j["test"] = metrics_json(test);
    auto& rows = j["epochs"] = nlohmann::json::array();
    for (const auto& e : epochs) {
        rows.push_back({{"epoch", e.epoch},
                        {"train_loss", e.train_loss},
                        {"val_loss", e.val_loss},
                        {"val_accuracy", e.val_accuracy},
                        {"val_f1", e.val_f1}});
    }
    out << j.dump(2) << '\n';
}

template <typename Real>
TrainResult<Real> train_from(const TrainConfig& config, ModelParams<Real> params, const Dataset& dataset,
                             const Hypergraph& h, const EpochCallback<Real>& on_epoch) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const Splits& s = dataset.splits;
    if (s.train.empty() || s.val.empty()) throw ValidationError("training needs non-empty train and val splits");
    const std::vector<int> labels = dataset.labels_or(-1);
    require_labelled(labels, s.train, "train split");
    require_labelled(labels, s.val, "val split");
    require_labelled(labels, s.test, "test split");

    const auto inputs = ModelInputs<Real>::prepare(dataset, h, config.batch_size);
    if (params.dims().input_dim != dataset.feature_dim) throw ShapeError("model input width differs from the dataset");
    Adam<Real> adam(params, config.learning_rate, config.beta1, config.beta2, config.epsilon);
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

    TrainResult<Real> result;
    ModelParams<Real> best = params;
    double best_acc = -1.0;
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto pass = model_forward(params, inputs, config.dropout, &rng);
        const double train_loss = loss(pass.logits, labels, s.train);
        if (!std::isfinite(train_loss)) throw NumericError("training diverged at epoch " + std::to_string(epoch));
        const auto grads = model_backward(params, inputs, pass, loss_gradient(pass.logits, labels, s.train));
        check_finite(grads);
        adam.step(params, grads);
        if (on_epoch) on_epoch(epoch, params);

        const auto eval = model_forward(params, inputs);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_loss;
        rec.val_loss = loss(eval.logits, labels, s.val);
        const Metrics vm = split_metrics<Real>(argmax_labels(eval.logits), labels, s.val);
        rec.val_accuracy = vm.accuracy;
        rec.val_f1 = vm.f1_macro;
        result.report.epochs.push_back(rec);

        if (rec.val_accuracy > best_acc || (rec.val_accuracy == best_acc && rec.val_loss < best_loss)) {
            best_acc = rec.val_accuracy;
            best_loss = rec.val_loss;
            best = params;
            result.report.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }

    const auto final_pass = model_forward(best, inputs);
    const auto predicted = argmax_labels(final_pass.logits);
    result.report.validation = split_metrics<Real>(predicted, labels, s.val);
    if (!s.test.empty()) result.report.test = split_metrics<Real>(predicted, labels, s.test);
    result.report.attention = final_pass.snapshot();
    result.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.params = std::move(best);
    return result;
}

template <typename Real>
TrainResult<Real> train(const TrainConfig& config, const Dataset& dataset, const Hypergraph& h,
                        const EpochCallback<Real>& on_epoch) {
    config.validate();
    const ModelDims dims{dataset.feature_dim, config.hidden_dim, config.layers};
    return train_from(config, ModelParams<Real>::initialize(dims, config.seed), dataset, h, on_epoch);
}

template <typename Real>
Metrics evaluate(const ModelParams<Real>& params, const Dataset& dataset, const Hypergraph& h,
                 const std::vector<NodeId>& split, std::size_t batch_size) {
    if (split.empty()) throw ValidationError("cannot evaluate an empty split");
    const std::vector<int> labels = dataset.labels_or(-1);
    require_labelled(labels, split, "evaluated split");
    const auto inputs = ModelInputs<Real>::prepare(dataset, h, batch_size);
    return split_metrics<Real>(argmax_labels(model_forward(params, inputs).logits), labels, split);
}

double GradCheckReport::max_relative_error() const {
    double worst = 0.0;
    for (const auto& t : tensors) worst = std::max(worst, t.max_relative_error);
    return worst;
}

bool GradCheckReport::passed() const { return failures().empty(); }

std::vector<std::string> GradCheckReport::failures() const {
    std::vector<std::string> out;
    for (const auto& t : tensors) {
        if (!(t.max_relative_error < tolerance)) out.push_back(t.tensor);
    }
    return out;
}

GradCheckReport grad_check(const ModelParams<double>& params, const Dataset& dataset, const Hypergraph& h,
                           const GradCheckOptions& options) {
    const auto inputs = ModelInputs<double>::prepare(dataset, h, 128);
    const std::vector<int> labels = dataset.labels_or(-1);
    std::vector<NodeId> mask;
    for (NodeId i = 0; i < labels.size(); ++i) {
        if (labels[i] >= 0) mask.push_back(i);
    }
    auto analytic = backward(params, inputs, labels, mask).gradients;
    if (options.tamper) options.tamper(analytic);

    std::vector<std::pair<std::string, const Matrix<double>*>> grads;
    analytic.visit([&](const std::string& name, const Matrix<double>& m) { grads.emplace_back(name, &m); });

    // The finite-difference reference is evaluated in extended precision so that
    // rounding in the loss does not swamp gradients of order 1e-8 at step 1e-5.
    const auto wide_inputs = ModelInputs<long double>::prepare(dataset, h, 128);
    const auto wide_loss = [&](const ModelParams<long double>& p) {
        const auto logits = model_forward(p, wide_inputs).logits;
        long double total = 0.0L;
        for (NodeId i : mask) {
            const long double p1 = std::clamp(1.0L / (1.0L + std::exp(logits(i, 0) - logits(i, 1))), 1e-12L, 1.0L - 1e-12L);
            total -= labels[i] == kTrue ? std::log(p1) : std::log(1.0L - p1);
        }
        return total / static_cast<long double>(mask.size());
    };

    GradCheckReport report;
    report.tolerance = options.tolerance;
    ModelParams<long double> probe = params.cast<long double>();
    const long double step = options.step;
    std::mt19937_64 rng(options.seed);
    std::size_t k = 0;
    probe.visit([&](const std::string& name, Matrix<long double>& p) {
        const Matrix<double>& g = *grads[k++].second;
        std::vector<Eigen::Index> entries(static_cast<std::size_t>(p.size()));
        std::iota(entries.begin(), entries.end(), Eigen::Index{0});
        if (entries.size() > options.full_check_limit) {
            std::shuffle(entries.begin(), entries.end(), rng);
            entries.resize(std::min(options.samples, entries.size()));
            std::sort(entries.begin(), entries.end());
        }
        GradCheckEntry entry;
        entry.tensor = name;
        for (Eigen::Index e : entries) {
            const long double original = p.data()[e];
            p.data()[e] = original + step;
            const long double up = wide_loss(probe);
            p.data()[e] = original - step;
            const long double down = wide_loss(probe);
            p.data()[e] = original;
            const double fd = static_cast<double>((up - down) / (2.0L * step));
            const double an = g.data()[e];
            const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-8});
            entry.max_relative_error = std::max(entry.max_relative_error, rel);
            entry.max_abs_analytic = std::max(entry.max_abs_analytic, std::abs(an));
            ++entry.checked;
        }
        report.tensors.push_back(entry);
    });
    return report;
}

GradCheckFixture make_grad_check_fixture(std::size_t n_news, std::size_t n_edges, std::size_t feature_dim,
                                         std::uint64_t seed) {
    if (n_news < 5 || n_edges == 0) throw ValidationError("grad-check fixture needs at least 5 news and one hyperedge");
    SyntheticConfig sc;
    sc.n_news = n_news;
    sc.n_users = 4;
    sc.feature_dim = feature_dim;
    sc.max_tree_size = 5;
    sc.seed = seed;
    sc.split_fractions = {0.4, 0.2, 0.4};
    GradCheckFixture f;
    f.dataset = generate_synthetic(sc);

    // Random hyperedges of size 2-3; the first ones cover every node so none is isolated.
    std::mt19937_64 rng(seed + 17);
    std::vector<NodeId> order(n_news);
    std::iota(order.begin(), order.end(), NodeId{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<NodeId>> sets(n_edges);
    for (std::size_t k = 0; k < n_news; ++k) sets[k % n_edges].push_back(order[k]);
    std::uniform_int_distribution<NodeId> node(0, static_cast<NodeId>(n_news - 1));
    std::vector<Hyperedge> edges;
    for (std::size_t j = 0; j < n_edges; ++j) {
        auto& m = sets[j];
        while (m.size() < 2 || (m.size() < 3 && rng() % 2 == 0)) {
            const NodeId v = node(rng);
            if (std::find(m.begin(), m.end(), v) == m.end()) m.push_back(v);
        }
        std::sort(m.begin(), m.end());
        edges.push_back(Hyperedge{static_cast<std::uint32_t>(j), HyperedgeKind::User, "u" + std::to_string(j), m});
    }
    f.hypergraph = Hypergraph(n_news, std::move(edges));
    return f;
}

#define HGFND_INSTANTIATE(Real)                                                                                       \
    template double loss<Real>(const Matrix<Real>&, const std::vector<int>&, const std::vector<NodeId>&);            \
    template Matrix<Real> loss_gradient<Real>(const Matrix<Real>&, const std::vector<int>&,                          \
                                              const std::vector<NodeId>&, double);                                   \
    template LossAndGradient<Real> backward<Real>(const ModelParams<Real>&, const ModelInputs<Real>&,                \
                                                  const std::vector<int>&, const std::vector<NodeId>&, double);      \
    template TrainResult<Real> train<Real>(const TrainConfig&, const Dataset&, const Hypergraph&,                    \
                                           const EpochCallback<Real>&);                                               \
    template TrainResult<Real> train_from<Real>(const TrainConfig&, ModelParams<Real>, const Dataset&,               \
                                                const Hypergraph&, const EpochCallback<Real>&);                       \
    template Metrics evaluate<Real>(const ModelParams<Real>&, const Dataset&, const Hypergraph&,                     \
                                    const std::vector<NodeId>&, std::size_t);

HGFND_INSTANTIATE(float)
HGFND_INSTANTIATE(double)
#undef HGFND_INSTANTIATE

} // namespace hgfnd
