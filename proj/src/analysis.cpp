#include "hgfnd/analysis.hpp"

#include "hgfnd/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

namespace hgfnd {

namespace {

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

std::string csv_field(const std::string& v) {
    if (v.find_first_of(",\"\n\r") == std::string::npos) return v;
    std::string out = "\"";
    for (char c : v) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::vector<int> labels_of(const Dataset& d) { return d.labels_or(-1); }

template <typename Real>
struct CliqueParams {
    Matrix<Real> sage1_self, sage1_nbr, sage2_self, sage2_nbr, head_weight, head_bias;

    template <typename Fn>
    void visit(Fn&& fn) {
        fn(std::string("sage1_self"), sage1_self);
        fn(std::string("sage1_nbr"), sage1_nbr);
        fn(std::string("sage2_self"), sage2_self);
        fn(std::string("sage2_nbr"), sage2_nbr);
        fn(std::string("head_weight"), head_weight);
        fn(std::string("head_bias"), head_bias);
    }
    template <typename Fn>
    void visit(Fn&& fn) const {
        const_cast<CliqueParams*>(this)->visit(
            [&](const std::string& name, Matrix<Real>& m) { fn(name, static_cast<const Matrix<Real>&>(m)); });
    }
};

template <typename Real>
struct CliquePass {
    Matrix<Real> pre1, hidden1, mask, dropped, pre2, hidden2, logits;
};

template <typename Real>
CliquePass<Real> clique_forward(const CliqueParams<Real>& p, const MeanAggregator& agg, const Matrix<Real>& x,
                                double dropout, std::mt19937_64* rng) {
    CliquePass<Real> c;
    c.hidden1 = sage_forward(agg, x, p.sage1_self, p.sage1_nbr, c.pre1);
    c.dropped = c.hidden1;
    if (rng && dropout > 0.0) {
        c.mask = dropout_mask<Real>(c.hidden1.rows(), c.hidden1.cols(), dropout, *rng);
        c.dropped.array() *= c.mask.array();
    }
    c.hidden2 = sage_forward(agg, c.dropped, p.sage2_self, p.sage2_nbr, c.pre2);
    c.logits = c.hidden2 * p.head_weight;
    c.logits.rowwise() += p.head_bias.row(0);
    return c;
}

template <typename Real>
CliqueParams<Real> clique_backward(const CliqueParams<Real>& p, const MeanAggregator& agg, const Matrix<Real>& x,
                                   const CliquePass<Real>& c, const Matrix<Real>& d_logits) {
    CliqueParams<Real> g;
    p.visit([&](const std::string& name, const Matrix<Real>& m) {
        Matrix<Real> z = Matrix<Real>::Zero(m.rows(), m.cols());
        if (name == "sage1_self") g.sage1_self = z;
        else if (name == "sage1_nbr") g.sage1_nbr = z;
        else if (name == "sage2_self") g.sage2_self = z;
        else if (name == "sage2_nbr") g.sage2_nbr = z;
        else if (name == "head_weight") g.head_weight = z;
        else g.head_bias = z;
    });
    g.head_weight.noalias() += c.hidden2.transpose() * d_logits;
    g.head_bias += d_logits.colwise().sum();
    const Matrix<Real> d_hidden2 = d_logits * p.head_weight.transpose();
    Matrix<Real> d_dropped =
        sage_backward(agg, c.dropped, p.sage2_self, p.sage2_nbr, c.pre2, d_hidden2, g.sage2_self, g.sage2_nbr, true);
    if (c.mask.size() > 0) d_dropped.array() *= c.mask.array();
    sage_backward(agg, x, p.sage1_self, p.sage1_nbr, c.pre1, d_dropped, g.sage1_self, g.sage1_nbr, false);
    return g;
}

Metrics split_metrics(const std::vector<int>& predicted, const std::vector<int>& labels, const std::vector<NodeId>& ids) {
    std::vector<int> p, a;
    for (NodeId id : ids) {
        p.push_back(predicted[id]);
        a.push_back(labels[id]);
    }
    return Metrics::from_predictions(p, a);
}

template <typename Real>
Metrics baseline_impl(const TrainConfig& config, const Dataset& dataset, const Hypergraph& h) {
    config.validate();
    if (h.n_nodes() != dataset.size()) throw ValidationError("hypergraph and dataset sizes differ");
    const Splits& s = dataset.splits;
    if (s.train.empty() || s.val.empty() || s.test.empty()) throw ValidationError("baseline needs train, val and test splits");
    const auto labels = labels_of(dataset);
    const PlainGraph graph = clique_expansion(h);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges(graph.edges.begin(), graph.edges.end());
    const MeanAggregator agg(dataset.size(), edges);
    const Matrix<Real> x = dataset.news_features.cast<Real>();

    const auto F = static_cast<Eigen::Index>(dataset.feature_dim);
    const auto H = static_cast<Eigen::Index>(config.hidden_dim);
    std::mt19937_64 init(config.seed);
    CliqueParams<Real> p;
    p.sage1_self = glorot_uniform<Real>(F, H, init);
    p.sage1_nbr = glorot_uniform<Real>(F, H, init);
    p.sage2_self = glorot_uniform<Real>(H, H, init);
    p.sage2_nbr = glorot_uniform<Real>(H, H, init);
    p.head_weight = glorot_uniform<Real>(H, 2, init);
    p.head_bias = Matrix<Real>::Zero(1, 2);

    Adam<Real> adam(p, config.learning_rate, config.beta1, config.beta2, config.epsilon);
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    CliqueParams<Real> best = p;
    double best_acc = -1.0, best_loss = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto pass = clique_forward(p, agg, x, config.dropout, &rng);
        const double train_loss = loss(pass.logits, labels, s.train);
        if (!std::isfinite(train_loss)) throw NumericError("baseline diverged at epoch " + std::to_string(epoch));
        adam.step(p, clique_backward(p, agg, x, pass, loss_gradient(pass.logits, labels, s.train)));
        const auto eval = clique_forward<Real>(p, agg, x, 0.0, nullptr);
        const double val_loss = loss(eval.logits, labels, s.val);
        const double val_acc = split_metrics(predict(eval.logits).labels, labels, s.val).accuracy;
        if (val_acc > best_acc || (val_acc == best_acc && val_loss < best_loss)) {
            best_acc = val_acc;
            best_loss = val_loss;
            best = p;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    const auto final_pass = clique_forward<Real>(best, agg, x, 0.0, nullptr);
    return split_metrics(predict(final_pass.logits).labels, labels, s.test);
}

} // namespace

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd r;
    if (values.empty()) throw ValidationError("mean of an empty sample");
    r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - r.mean) * (v - r.mean);
        r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return r;
}

TrainReport train_report(const TrainConfig& config, const Dataset& dataset, const Hypergraph& h) {
    if (config.precision == Precision::F64) return train<double>(config, dataset, h).report;
    return train<float>(config, dataset, h).report;
}

void ExperimentRow::summarize() {
    std::vector<double> acc, macro, fake, tru;
    for (const auto& m : runs) {
        acc.push_back(m.accuracy);
        macro.push_back(m.f1_macro);
        fake.push_back(m.f1_fake);
        tru.push_back(m.f1_true);
    }
    accuracy = mean_std(acc);
    f1_macro = mean_std(macro);
    f1_fake = mean_std(fake);
    f1_true = mean_std(tru);
}

std::vector<HypergraphOptions> ablation_subsets(TimeGranularity granularity) {
    const bool table[7][3] = {{true, true, true},   {true, true, false}, {true, false, true}, {false, true, true},
                              {true, false, false}, {false, true, false}, {false, false, true}};
    std::vector<HypergraphOptions> out;
    for (const auto& row : table) out.push_back(HypergraphOptions{row[0], row[1], row[2], granularity});
    return out;
}

std::vector<ExperimentRow> ablate_hyperedge_types(const TrainConfig& config, const Dataset& dataset,
                                                  const std::vector<std::uint64_t>& seeds,
                                                  TimeGranularity granularity) {
    if (seeds.empty()) throw ValidationError("ablation needs at least one seed");
    std::vector<ExperimentRow> rows;
    for (const auto& options : ablation_subsets(granularity)) {
        const Hypergraph h = build_hypergraph(dataset, options);
        ExperimentRow row;
        row.label = options.kinds_label();
        for (std::uint64_t seed : seeds) {
            TrainConfig c = config;
            c.seed = seed;
            row.runs.push_back(train_report(c, dataset, h).test);
        }
        row.summarize();
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<ExperimentRow> sweep_label_fraction(const TrainConfig& config, const Dataset& dataset,
                                                const std::vector<double>& fractions,
                                                const std::vector<std::uint64_t>& seeds,
                                                const HypergraphOptions& options) {
    if (seeds.empty()) throw ValidationError("sweep needs at least one seed");
    std::vector<ExperimentRow> rows;
    for (double f : fractions) {
        if (!(f > 0.0 && f <= 1.0)) throw ValidationError("label fractions must lie in (0, 1]");
        ExperimentRow row;
        row.label = fmt(f, 2);
        for (std::uint64_t seed : seeds) {
            const Dataset reduced = downsample_train_labels(dataset, f, seed);
            const Hypergraph h = build_hypergraph(reduced, options);
            TrainConfig c = config;
            c.seed = seed;
            row.runs.push_back(train_report(c, reduced, h).test);
        }
        row.summarize();
        rows.push_back(std::move(row));
    }
    return rows;
}

Metrics baseline_clique_gnn(const TrainConfig& config, const Dataset& dataset, const Hypergraph& h) {
    if (config.precision == Precision::F64) return baseline_impl<double>(config, dataset, h);
    return baseline_impl<float>(config, dataset, h);
}

std::vector<CredibilityRecord> credibility_table(const Dataset& dataset, const Hypergraph& h,
                                                 const AttentionSnapshot& snapshot) {
    if (h.n_nodes() != dataset.size()) throw ValidationError("hypergraph and dataset sizes differ");
    if (snapshot.beta.empty()) throw ValidationError("attention snapshot has no layers");
    const auto& beta = snapshot.beta.back();
    if (beta.size() != h.n_incidences()) throw ValidationError("attention snapshot does not match the hypergraph");
    const auto labels = labels_of(dataset);
    const auto offsets = h.edge_offsets();
    const auto to_node = h.edge_to_node_position();

    std::vector<CredibilityRecord> out;
    bool any_user = false;
    for (std::size_t j = 0; j < h.n_edges(); ++j) {
        const Hyperedge& e = h.edge(j);
        if (e.kind != HyperedgeKind::User) continue;
        any_user = true;
        CredibilityRecord r;
        r.user_key = e.key;
        r.hyperedge = static_cast<std::uint32_t>(j);
        const auto members = h.members(j);
        r.n_news = members.size();
        std::size_t trues = 0;
        double beta_sum = 0.0;
        for (std::size_t k = 0; k < members.size(); ++k) {
            beta_sum += beta[to_node[offsets[j] + k]];
            const int y = labels[members[k]];
            if (y < 0) continue;
            ++r.n_labelled;
            if (y == kTrue) ++trues;
        }
        if (r.n_labelled == 0) continue;
        r.credibility = static_cast<double>(trues) / static_cast<double>(r.n_labelled);
        r.mean_beta = beta_sum / static_cast<double>(members.size());
        out.push_back(std::move(r));
    }
    if (!any_user) throw ValidationError("hypergraph has no User hyperedges");
    return out;
}

std::vector<SamplingRow> attention_user_sampling(const std::vector<CredibilityRecord>& records,
                                                 const std::vector<double>& ratios) {
    if (records.empty()) throw ValidationError("no credibility records to sample");
    std::vector<const CredibilityRecord*> order;
    for (const auto& r : records) order.push_back(&r);
    std::sort(order.begin(), order.end(), [](const CredibilityRecord* a, const CredibilityRecord* b) {
        if (a->mean_beta != b->mean_beta) return a->mean_beta > b->mean_beta;
        return a->user_key < b->user_key;
    });
    const std::size_t n = order.size();
    std::vector<SamplingRow> rows;
    for (double ratio : ratios) {
        if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("sampling ratios must lie in (0, 1)");
        SamplingRow row;
        row.ratio = ratio;
        row.sampled = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9)), 1, n);
        std::size_t th = 0, tl = 0, bh = 0, bl = 0;
        for (std::size_t k = 0; k < row.sampled; ++k) {
            const double top = order[k]->credibility;
            const double bottom = order[n - 1 - k]->credibility;
            th += top > 0.9;
            tl += top < 0.1;
            bh += bottom > 0.9;
            bl += bottom < 0.1;
        }
        const double scale = 100.0 / static_cast<double>(row.sampled);
        row.top_high = th * scale;
        row.top_low = tl * scale;
        row.bottom_high = bh * scale;
        row.bottom_low = bl * scale;
        rows.push_back(row);
    }
    return rows;
}

TableFormat parse_table_format(std::string_view text) {
    if (text == "csv") return TableFormat::Csv;
    if (text == "text") return TableFormat::Text;
    throw ValidationError("format must be csv or text, got '" + std::string(text) + "'");
}

void write_table(std::ostream& out, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows, TableFormat format) {
    if (format == TableFormat::Csv) {
        const auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t k = 0; k < cells.size(); ++k) out << (k ? "," : "") << csv_field(cells[k]);
            out << '\n';
        };
        line(header);
        for (const auto& r : rows) line(r);
        return;
    }
    std::vector<std::size_t> width(header.size());
    for (std::size_t k = 0; k < header.size(); ++k) width[k] = header[k].size();
    for (const auto& r : rows) {
        for (std::size_t k = 0; k < r.size() && k < width.size(); ++k) width[k] = std::max(width[k], r[k].size());
    }
    const auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k) {
            if (k) out << "  ";
            if (k == 0) out << std::left;
            else out << std::right;
            out << std::setw(static_cast<int>(width[k])) << cells[k];
        }
        out << std::left << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
}

void write_metrics(std::ostream& out, const Metrics& m, TableFormat format) {
    write_table(out, {"accuracy", "f1_macro", "f1_fake", "f1_true", "tp", "fp", "tn", "fn"},
                {{fmt(m.accuracy), fmt(m.f1_macro), fmt(m.f1_fake), fmt(m.f1_true), std::to_string(m.tp),
                  std::to_string(m.fp), std::to_string(m.tn), std::to_string(m.fn)}},
                format);
}

void write_experiment(std::ostream& out, const std::string& first_column, const std::vector<ExperimentRow>& rows,
                      TableFormat format) {
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows) {
        cells.push_back({r.label, std::to_string(r.runs.size()), fmt(r.accuracy.mean), fmt(r.accuracy.std),
                         fmt(r.f1_macro.mean), fmt(r.f1_macro.std), fmt(r.f1_fake.mean), fmt(r.f1_true.mean)});
    }
    write_table(out, {first_column, "runs", "accuracy_mean", "accuracy_std", "f1_macro_mean", "f1_macro_std",
                      "f1_fake_mean", "f1_true_mean"},
                cells, format);
}

void write_credibility(std::ostream& out, const std::vector<CredibilityRecord>& records, TableFormat format) {
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : records) {
        cells.push_back({r.user_key, std::to_string(r.hyperedge), std::to_string(r.n_news), std::to_string(r.n_labelled),
                         fmt(r.credibility, 6), fmt(r.mean_beta, 10)});
    }
    write_table(out, {"user_key", "hyperedge", "n_news", "n_labelled", "credibility", "mean_beta"}, cells, format);
}

std::vector<CredibilityRecord> read_credibility_csv(std::istream& in) {
    const auto split = [](const std::string& line) {
        std::vector<std::string> cells(1);
        bool quoted = false;
        for (std::size_t k = 0; k < line.size(); ++k) {
            const char c = line[k];
            if (quoted) {
                if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') cells.back() += line[++k];
                else if (c == '"') quoted = false;
                else cells.back() += c;
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                cells.emplace_back();
            } else if (c != '\r') {
                cells.back() += c;
            }
        }
        return cells;
    };
    std::string line;
    if (!std::getline(in, line) || split(line) != std::vector<std::string>{"user_key", "hyperedge", "n_news", "n_labelled",
                                                                          "credibility", "mean_beta"}) {
        throw FormatError("credibility CSV: unexpected header");
    }
    std::vector<CredibilityRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != 6) throw FormatError("credibility CSV line " + std::to_string(line_no) + ": expected 6 fields");
        try {
            CredibilityRecord r;
            r.user_key = cells[0];
            r.hyperedge = static_cast<std::uint32_t>(std::stoul(cells[1]));
            r.n_news = std::stoul(cells[2]);
            r.n_labelled = std::stoul(cells[3]);
            r.credibility = std::stod(cells[4]);
            r.mean_beta = std::stod(cells[5]);
            out.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw FormatError("credibility CSV line " + std::to_string(line_no) + ": bad number");
        }
    }
    return out;
}

void write_sampling(std::ostream& out, const std::vector<SamplingRow>& rows, TableFormat format) {
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows) {
        cells.push_back({fmt(r.ratio, 2), std::to_string(r.sampled), fmt(r.top_high, 2), fmt(r.top_low, 2),
                         fmt(r.bottom_high, 2), fmt(r.bottom_low, 2)});
    }
    write_table(out, {"ratio", "sampled", "top_high_pct", "top_low_pct", "bottom_high_pct", "bottom_low_pct"}, cells,
                format);
}

} // namespace hgfnd
