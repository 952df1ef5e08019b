#pragma once

#include "hgfnd/hypergraph.hpp"
#include "hgfnd/synthetic.hpp"

#include <algorithm>
#include <random>

namespace fixtures {

/// Random hypergraph on n nodes with m hyperedges; members drawn with
/// probability 1/3 each, at least `min_size` per hyperedge.
inline hgfnd::Hypergraph random_hypergraph(std::mt19937_64& rng, std::size_t n, std::size_t m, std::size_t min_size = 1) {
    std::vector<hgfnd::Hyperedge> edges;
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<hgfnd::NodeId> members;
        for (hgfnd::NodeId v = 0; v < n; ++v)
            if (rng() % 3 == 0) members.push_back(v);
        while (members.size() < std::min(min_size, n)) {
            const auto v = static_cast<hgfnd::NodeId>(rng() % n);
            if (std::find(members.begin(), members.end(), v) == members.end()) members.push_back(v);
        }
        if (members.empty()) members.push_back(static_cast<hgfnd::NodeId>(rng() % n));
        std::sort(members.begin(), members.end());
        edges.push_back({0, static_cast<hgfnd::HyperedgeKind>(j % 3), "k" + std::to_string(j), members});
    }
    return hgfnd::Hypergraph(n, edges);
}

/// Small synthetic dataset with short trees; n >= 3.
inline hgfnd::Dataset small_dataset(std::size_t n, std::size_t f, std::uint64_t seed, std::size_t max_tree = 6) {
    hgfnd::SyntheticConfig c;
    c.n_news = n;
    c.n_users = 4;
    c.feature_dim = f;
    c.max_tree_size = max_tree;
    c.seed = seed;
    c.split_fractions = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    return hgfnd::generate_synthetic(c);
}

} // namespace fixtures
