#include "hgfnd/analysis.hpp"
#include "hgfnd/checkpoint.hpp"
#include "hgfnd/dataset_io.hpp"
#include "hgfnd/error.hpp"
#include "hgfnd/synthetic.hpp"

#include <CLI11.hpp>
#include <omp.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace hgfnd;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string precision = "f32";
    bool precision_set = false;
    int threads = 0;
    std::string format = "csv";
};

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    return out;
}

TrainConfig load_config(const std::string& path, const Globals& g) {
    TrainConfig c = path.empty() ? TrainConfig{} : TrainConfig::load(path);
    if (g.seed_set) c.seed = g.seed;
    if (g.precision_set) c.precision = parse_precision(g.precision);
    c.validate();
    return c;
}

// The checkpoint decides the precision; an explicit --precision must agree.
Precision stored_precision(const std::string& checkpoint, const Globals& g) {
    const Precision p = checkpoint_precision(checkpoint);
    if (g.precision_set && parse_precision(g.precision) != p) {
        throw ValidationError("checkpoint is " + std::string(to_string(p)) + " but --precision " + g.precision +
                              " was requested");
    }
    return p;
}

template <typename Real>
void run_train(const TrainConfig& config, const Dataset& dataset, const Hypergraph& h, const std::string& checkpoint,
               const std::string& report_path, const std::string& attention_path) {
    const auto result = train<Real>(config, dataset, h);
    save_checkpoint(checkpoint, result.params);
    if (!report_path.empty()) {
        auto out = open_out(report_path);
        result.report.write_json(out);
    }
    if (!attention_path.empty()) {
        auto out = open_out(attention_path);
        result.report.attention.write_csv(out, h);
    }
    spdlog::info("best epoch {} of {}, val accuracy {:.4f}, test accuracy {:.4f}", result.report.best_epoch,
                 result.report.epochs.size(), result.report.validation.accuracy, result.report.test.accuracy);
}

template <typename Real>
Metrics run_evaluate(const std::string& checkpoint, const Dataset& dataset, const Hypergraph& h,
                     const std::vector<NodeId>& split) {
    const auto params = load_checkpoint<Real>(std::filesystem::path(checkpoint));
    if (params.dims().input_dim != dataset.feature_dim) {
        throw ShapeError("checkpoint expects " + std::to_string(params.dims().input_dim) + " features, dataset has " +
                         std::to_string(dataset.feature_dim));
    }
    return evaluate(params, dataset, h, split);
}

template <typename Real>
void run_credibility(const std::string& checkpoint, const Dataset& dataset, const Hypergraph& h, std::ostream& out,
                     TableFormat format, const std::string& embeddings, const std::string& attention_path) {
    const auto params = load_checkpoint<Real>(std::filesystem::path(checkpoint));
    const auto inputs = ModelInputs<Real>::prepare(dataset, h, 128);
    const auto pass = model_forward(params, inputs);
    const auto snapshot = pass.snapshot();
    write_credibility(out, credibility_table(dataset, h, snapshot), format);
    if (!embeddings.empty()) write_matrix(std::filesystem::path(embeddings), FeatureMatrix(pass.final_hyperedge_states().template cast<float>()));
    if (!attention_path.empty()) {
        auto a = open_out(attention_path);
        snapshot.write_csv(a, h);
    }
}

std::vector<NodeId> split_ids(const Dataset& d, const std::string& name) {
    if (name == "train") return d.splits.train;
    if (name == "val") return d.splits.val;
    if (name == "test") return d.splits.test;
    throw ValidationError("split must be train, val or test");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hypergraph attention network for fake news detection"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Random seed")->each([&](const std::string&) { g.seed_set = true; });
    app.add_option("--precision", g.precision, "f32 or f64")
        ->check(CLI::IsMember({"f32", "f64"}))
        ->each([&](const std::string&) { g.precision_set = true; });
    app.add_option("--threads", g.threads, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
    app.add_option("--format", g.format, "Table format: csv or text")->check(CLI::IsMember({"csv", "text"}));

    // synth-gen
    auto* synth = app.add_subcommand("synth-gen", "Generate a synthetic dataset directory");
    SyntheticConfig sc;
    std::string synth_out;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--n-news", sc.n_news);
    synth->add_option("--n-users", sc.n_users);
    synth->add_option("--fake-fraction", sc.fake_fraction);
    synth->add_option("--fidelity", sc.user_fidelity);
    synth->add_option("--feature-dim", sc.feature_dim);
    synth->add_option("--signal", sc.signal_strength);
    synth->add_option("--noise", sc.noise_scale);

    // build-hypergraph
    auto* build = app.add_subcommand("build-hypergraph", "Build and serialise the news hypergraph");
    std::string dataset_dir, hypergraph_path, kinds = "user,time,entity", granularity = "day", texts_path;
    build->add_option("--dataset", dataset_dir)->required();
    build->add_option("--kinds", kinds, "Comma-separated subset of user,time,entity");
    build->add_option("--time-granularity", granularity)->check(CLI::IsMember({"day", "hour"}));
    build->add_option("--texts", texts_path, "news_id,text CSV for fallback entity extraction");
    build->add_option("--out", hypergraph_path)->required();

    auto* stats_cmd = app.add_subcommand("stats", "Hypergraph statistics table");
    stats_cmd->add_option("--hypergraph", hypergraph_path)->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a model");
    std::string config_path, checkpoint_path, report_path, attention_path;
    train_cmd->add_option("--dataset", dataset_dir)->required();
    train_cmd->add_option("--hypergraph", hypergraph_path)->required();
    train_cmd->add_option("--config", config_path, "key = value config file");
    train_cmd->add_option("--out-checkpoint", checkpoint_path)->required();
    train_cmd->add_option("--report", report_path, "JSON training report");
    train_cmd->add_option("--attention", attention_path, "Attention coefficients CSV");

    auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on a split");
    std::string split = "test";
    eval_cmd->add_option("--dataset", dataset_dir)->required();
    eval_cmd->add_option("--hypergraph", hypergraph_path)->required();
    eval_cmd->add_option("--checkpoint", checkpoint_path)->required();
    eval_cmd->add_option("--split", split)->check(CLI::IsMember({"train", "val", "test"}));

    auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check on a random small model");
    std::size_t gc_d = 3, gc_n = 5, gc_m = 4, gc_f = 4;
    double gc_tol = 1e-4;
    grad_cmd->add_option("--d", gc_d, "Hidden width");
    grad_cmd->add_option("--n", gc_n, "News nodes");
    grad_cmd->add_option("--m", gc_m, "Hyperedges");
    grad_cmd->add_option("--features", gc_f, "Feature width");
    grad_cmd->add_option("--tolerance", gc_tol);

    auto* ablate_cmd = app.add_subcommand("ablate", "Hyperedge-type ablation (seven subsets)");
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    ablate_cmd->add_option("--dataset", dataset_dir)->required();
    ablate_cmd->add_option("--config", config_path);
    ablate_cmd->add_option("--seeds", seeds)->delimiter(',');
    ablate_cmd->add_option("--time-granularity", granularity)->check(CLI::IsMember({"day", "hour"}));

    auto* sweep_cmd = app.add_subcommand("sweep-labels", "Accuracy versus fraction of training labels");
    std::vector<double> fractions{1.0, 0.75, 0.5, 0.25};
    sweep_cmd->add_option("--dataset", dataset_dir)->required();
    sweep_cmd->add_option("--config", config_path);
    sweep_cmd->add_option("--fractions", fractions)->delimiter(',');
    sweep_cmd->add_option("--seeds", seeds)->delimiter(',');
    sweep_cmd->add_option("--kinds", kinds);
    sweep_cmd->add_option("--time-granularity", granularity)->check(CLI::IsMember({"day", "hour"}));

    auto* clique_cmd = app.add_subcommand("baseline-clique", "Graph baseline on the clique expansion");
    clique_cmd->add_option("--dataset", dataset_dir)->required();
    clique_cmd->add_option("--hypergraph", hypergraph_path)->required();
    clique_cmd->add_option("--config", config_path);

    auto* cred_cmd = app.add_subcommand("credibility", "User-hyperedge credibility and attention table");
    std::string embeddings_path;
    cred_cmd->add_option("--dataset", dataset_dir)->required();
    cred_cmd->add_option("--hypergraph", hypergraph_path)->required();
    cred_cmd->add_option("--checkpoint", checkpoint_path)->required();
    cred_cmd->add_option("--embeddings", embeddings_path, "Write final hyperedge states as an HGFD matrix");
    cred_cmd->add_option("--attention", attention_path, "Write attention coefficients CSV");

    auto* sample_cmd = app.add_subcommand("attention-sample", "Credibility of high/low attention users");
    std::string credibility_path;
    std::vector<double> ratios{0.10, 0.15, 0.20, 0.25};
    sample_cmd->add_option("--credibility", credibility_path, "CSV from the credibility command")->required();
    sample_cmd->add_option("--ratios", ratios)->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (g.threads > 0) omp_set_num_threads(g.threads);
        const TableFormat format = parse_table_format(g.format);
        const TimeGranularity gran = parse_time_granularity(granularity);

        if (*synth) {
            sc.seed = g.seed;
            write_dataset(generate_synthetic(sc), synth_out);
        } else if (*build) {
            Dataset d = load_dataset_dir(dataset_dir);
            if (!texts_path.empty()) {
                for (auto& item : d.items) item.entities.clear();
                for (const auto& [id, text] : read_id_text_csv(texts_path)) {
                    if (id >= d.size()) throw IntegrityError("texts file references unknown news id " + std::to_string(id));
                    for (auto& e : extract_entities(text)) d.items[id].entities.push_back(std::move(e));
                }
            }
            write_hypergraph(std::filesystem::path(hypergraph_path),
                             build_hypergraph(d, HypergraphOptions::parse_kinds(kinds, gran)));
        } else if (*stats_cmd) {
            const auto rows = stats(read_hypergraph(std::filesystem::path(hypergraph_path)));
            if (format == TableFormat::Csv) write_stats_csv(std::cout, rows);
            else write_stats_text(std::cout, rows);
        } else if (*train_cmd) {
            const TrainConfig c = load_config(config_path, g);
            const Dataset d = load_dataset_dir(dataset_dir);
            const Hypergraph h = read_hypergraph(std::filesystem::path(hypergraph_path));
            if (c.precision == Precision::F64) run_train<double>(c, d, h, checkpoint_path, report_path, attention_path);
            else run_train<float>(c, d, h, checkpoint_path, report_path, attention_path);
        } else if (*eval_cmd) {
            const Dataset d = load_dataset_dir(dataset_dir);
            const Hypergraph h = read_hypergraph(std::filesystem::path(hypergraph_path));
            const auto ids = split_ids(d, split);
            const Metrics m = stored_precision(checkpoint_path, g) == Precision::F64
                                  ? run_evaluate<double>(checkpoint_path, d, h, ids)
                                  : run_evaluate<float>(checkpoint_path, d, h, ids);
            write_metrics(std::cout, m, format);
        } else if (*grad_cmd) {
            const auto fixture = make_grad_check_fixture(gc_n, gc_m, gc_f, g.seed);
            const auto params = ModelParams<double>::initialize(ModelDims{gc_f, gc_d, 2}, g.seed);
            GradCheckOptions options;
            options.tolerance = gc_tol;
            options.seed = g.seed;
            const auto report = grad_check(params, fixture.dataset, fixture.hypergraph, options);
            std::vector<std::vector<std::string>> rows;
            for (const auto& t : report.tensors) {
                std::ostringstream err;
                err << std::scientific << t.max_relative_error;
                rows.push_back({t.tensor, std::to_string(t.checked), err.str(),
                                t.max_relative_error < report.tolerance ? "ok" : "FAIL"});
            }
            write_table(std::cout, {"tensor", "checked", "max_relative_error", "status"}, rows, format);
            if (!report.passed()) {
                std::string names;
                for (const auto& f : report.failures()) names += (names.empty() ? "" : ", ") + f;
                std::cerr << "gradient check failed for: " << names << '\n';
                return 1;
            }
        } else if (*ablate_cmd) {
            const TrainConfig c = load_config(config_path, g);
            write_experiment(std::cout, "kinds", ablate_hyperedge_types(c, load_dataset_dir(dataset_dir), seeds, gran), format);
        } else if (*sweep_cmd) {
            const TrainConfig c = load_config(config_path, g);
            write_experiment(std::cout, "fraction",
                             sweep_label_fraction(c, load_dataset_dir(dataset_dir), fractions, seeds,
                                                  HypergraphOptions::parse_kinds(kinds, gran)),
                             format);
        } else if (*clique_cmd) {
            const TrainConfig c = load_config(config_path, g);
            write_metrics(std::cout,
                          baseline_clique_gnn(c, load_dataset_dir(dataset_dir),
                                              read_hypergraph(std::filesystem::path(hypergraph_path))),
                          format);
        } else if (*cred_cmd) {
            const Dataset d = load_dataset_dir(dataset_dir);
            const Hypergraph h = read_hypergraph(std::filesystem::path(hypergraph_path));
            if (stored_precision(checkpoint_path, g) == Precision::F64) {
                run_credibility<double>(checkpoint_path, d, h, std::cout, format, embeddings_path, attention_path);
            } else {
                run_credibility<float>(checkpoint_path, d, h, std::cout, format, embeddings_path, attention_path);
            }
        } else if (*sample_cmd) {
            std::ifstream in(credibility_path);
            if (!in) throw FormatError("cannot open " + credibility_path);
            write_sampling(std::cout, attention_user_sampling(read_credibility_csv(in), ratios), format);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
