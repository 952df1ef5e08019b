#pragma once

#include "hgfnd/dataset.hpp"

#include <cstdint>

namespace hgfnd {

/// Generator settings for a planted-credibility news dataset.
///
/// Each user leans fake or true. Every engagement on a news item is made by a
/// user of the item's class with probability `user_fidelity`, otherwise by a
/// user of the other class. Content features are the class mean (the two means
/// are `signal_strength` apart) plus isotropic Gaussian noise of `noise_scale`.
/// Timestamps and entities carry no label information.
struct SyntheticConfig {
    std::size_t n_news = 200;
    std::size_t n_users = 40;
    double fake_fraction = 0.5;
    double user_fidelity = 0.95;
    std::size_t feature_dim = 16;
    double signal_strength = 1.0;
    double noise_scale = 1.0;
    std::uint64_t seed = 0;

    std::size_t min_tree_size = 2;
    std::size_t max_tree_size = 30;
    std::int64_t start_time = 1577836800; // 2020-01-01T00:00:00Z
    std::int64_t time_window_days = 30;
    double mean_reply_delay_s = 7200.0;
    std::size_t entity_pool = 40;
    std::size_t max_entities_per_news = 3;
    std::array<double, 3> split_fractions{0.2, 0.1, 0.7};

    void validate() const;
};

Dataset generate_synthetic(const SyntheticConfig& config);

/// Fraction of majority-label members averaged over hyperedges built from the
/// user ids of each tree (members without labels are ignored).
double mean_user_purity(const Dataset& dataset);

} // namespace hgfnd
