#pragma once

#include "hgfnd/metrics.hpp"
#include "hgfnd/training.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace hgfnd {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0; // sample standard deviation, 0 for a single value
};
MeanStd mean_std(const std::vector<double>& values);

/// Trains at config.precision and returns the report; test metrics use the best-val params.
TrainReport train_report(const TrainConfig& config, const Dataset& dataset, const Hypergraph& h);

struct ExperimentRow {
    std::string label;
    std::vector<Metrics> runs; // one per seed
    MeanStd accuracy;
    MeanStd f1_macro;
    MeanStd f1_fake;
    MeanStd f1_true;

    void summarize();
};

/// The seven non-empty kind subsets in the order U T E, U T, U E, T E, U, T, E.
std::vector<HypergraphOptions> ablation_subsets(TimeGranularity granularity);

/// One row per kind subset; every seed trains a fresh model (config.seed = seed)
/// on a hypergraph rebuilt for the subset, evaluated on the test split.
std::vector<ExperimentRow> ablate_hyperedge_types(const TrainConfig& config, const Dataset& dataset,
                                                  const std::vector<std::uint64_t>& seeds,
                                                  TimeGranularity granularity = TimeGranularity::Day);

/// One row per fraction: downsample the training labels, rebuild the hypergraph,
/// train and evaluate on the (untouched) test items.
std::vector<ExperimentRow> sweep_label_fraction(const TrainConfig& config, const Dataset& dataset,
                                                const std::vector<double>& fractions,
                                                const std::vector<std::uint64_t>& seeds,
                                                const HypergraphOptions& options = {});

/// Two mean-aggregation layers over the clique expansion of `h` and a linear head,
/// on raw news features only, trained like the main model.
Metrics baseline_clique_gnn(const TrainConfig& config, const Dataset& dataset, const Hypergraph& h);

struct CredibilityRecord {
    std::string user_key;
    std::uint32_t hyperedge = 0;
    std::size_t n_news = 0;     // members of the hyperedge
    std::size_t n_labelled = 0; // members with a known label
    double credibility = 0.0;   // labelled true members / labelled members
    double mean_beta = 0.0;     // final-layer beta averaged over the members
};

/// One record per User hyperedge with at least one labelled member.
std::vector<CredibilityRecord> credibility_table(const Dataset& dataset, const Hypergraph& h,
                                                 const AttentionSnapshot& snapshot);

struct SamplingRow {
    double ratio = 0.0;
    std::size_t sampled = 0;
    double top_high = 0.0;    // % credibility > 0.9 among the highest-attention records
    double top_low = 0.0;     // % credibility < 0.1 among the highest-attention records
    double bottom_high = 0.0; // % credibility > 0.9 among the lowest-attention records
    double bottom_low = 0.0;  // % credibility < 0.1 among the lowest-attention records
};

/// Records ordered by mean_beta descending (ties: user_key ascending); each
/// ratio r samples ceil(r * n) records, at least one, from either end.
std::vector<SamplingRow> attention_user_sampling(const std::vector<CredibilityRecord>& records,
                                                 const std::vector<double>& ratios);

enum class TableFormat { Csv, Text };
TableFormat parse_table_format(std::string_view text);

/// Writes a header + rows table as CSV (quoted where needed) or aligned text.
void write_table(std::ostream& out, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows, TableFormat format);

void write_metrics(std::ostream& out, const Metrics& m, TableFormat format);
void write_experiment(std::ostream& out, const std::string& first_column, const std::vector<ExperimentRow>& rows,
                      TableFormat format);
void write_credibility(std::ostream& out, const std::vector<CredibilityRecord>& records, TableFormat format);
/// Reads the CSV written by write_credibility.
std::vector<CredibilityRecord> read_credibility_csv(std::istream& in);

void write_sampling(std::ostream& out, const std::vector<SamplingRow>& rows, TableFormat format);

} // namespace hgfnd
