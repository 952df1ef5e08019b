#pragma once

#include "hgfnd/matrix_io.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hgfnd {

using NodeId = std::uint32_t;

inline constexpr int kFake = 0;
inline constexpr int kTrue = 1;

/// One engagement in a propagation tree. Index 0 of a tree is the news post itself.
struct Engagement {
    std::string user;
    std::int64_t timestamp = 0; // seconds since the Unix epoch, UTC
};

struct PropagationTree {
    NodeId news_id = 0;
    std::vector<Engagement> nodes;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges; // parent -> child
    FeatureMatrix features;                                     // nodes.size() x F

    std::size_t size() const { return nodes.size(); }

    /// Throws ValidationError unless this is a rooted tree at node 0 with
    /// monotone timestamps and `feature_dim`-wide node features.
    void validate(std::size_t feature_dim) const;
};

struct NewsItem {
    NodeId id = 0;
    NodeId source_id = 0; // id in the dataset this one was derived from
    std::optional<int> label;
    std::vector<std::string> entities;
};

struct Splits {
    std::vector<NodeId> train;
    std::vector<NodeId> val;
    std::vector<NodeId> test;
};

/// News items with their content features, propagation trees and splits.
/// Row i of `news_features`, `items[i]` and `trees[i]` all describe news i.
struct Dataset {
    std::size_t feature_dim = 0;
    FeatureMatrix news_features;
    std::vector<NewsItem> items;
    std::vector<PropagationTree> trees;
    Splits splits;

    std::size_t size() const { return items.size(); }
    std::vector<int> labels_or(int missing) const;

    /// Checks every type invariant; throws IntegrityError / ValidationError.
    void validate() const;
};

/// Stratified train/val/test split of the labelled items. Split sizes are
/// floor(fraction * n_labelled) for train and val; test takes the remainder.
Dataset make_splits(Dataset dataset, const std::array<double, 3>& fractions, std::uint64_t seed);

/// Keeps ceil(keep_fraction * |train|) training items (stratified by label) and
/// removes the other training items, with their trees, from the dataset.
/// Remaining items are re-indexed densely; `source_id` keeps the old id.
Dataset downsample_train_labels(const Dataset& dataset, double keep_fraction, std::uint64_t seed);

/// Returns the dataset restricted to `keep` (sorted ascending), re-indexed densely.
Dataset select_items(const Dataset& dataset, const std::vector<NodeId>& keep);

/// Splits `total` across classes with `counts` in proportion, largest remainder
/// first (ties toward the lower class index).
std::vector<std::size_t> apportion(std::size_t total, const std::vector<std::size_t>& counts);

} // namespace hgfnd
