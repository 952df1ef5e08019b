#include "hgfnd/dataset.hpp"

#include "hgfnd/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

namespace hgfnd {

void PropagationTree::validate(std::size_t feature_dim) const {
    const std::size_t n = nodes.size();
    const std::string where = "tree of news " + std::to_string(news_id) + ": ";
    if (n == 0) {
        throw ValidationError(where + "no nodes (the root is required)");
    }
    if (edges.size() != n - 1) {
        throw ValidationError(where + "edge count " + std::to_string(edges.size()) +
                              " != node count - 1");
    }
    std::vector<std::int64_t> parent(n, -1);
    for (const auto& [p, c] : edges) {
        if (p >= n || c >= n) {
            throw ValidationError(where + "edge endpoint out of range");
        }
        if (c == 0) {
            throw ValidationError(where + "the root cannot have a parent");
        }
        if (parent[c] != -1) {
            throw ValidationError(where + "node " + std::to_string(c) + " has two parents");
        }
        parent[c] = p;
    }
    // Every node must reach the root by following parents (no cycles).
    std::vector<char> state(n, 0); // 0 unknown, 1 on path, 2 reaches root
    state[0] = 2;
    for (std::size_t start = 1; start < n; ++start) {
        std::vector<std::size_t> path;
        std::size_t v = start;
        while (state[v] == 0) {
            state[v] = 1;
            path.push_back(v);
            v = static_cast<std::size_t>(parent[v]);
        }
        if (state[v] == 1) {
            throw ValidationError(where + "cycle in parent links");
        }
        for (std::size_t u : path) state[u] = 2;
    }
    for (std::size_t c = 1; c < n; ++c) {
        if (nodes[c].timestamp < nodes[static_cast<std::size_t>(parent[c])].timestamp) {
            throw ValidationError(where + "node " + std::to_string(c) +
                                  " is timestamped before its parent");
        }
    }
    if (static_cast<std::size_t>(features.rows()) != n ||
        static_cast<std::size_t>(features.cols()) != feature_dim) {
        throw ValidationError(where + "feature matrix shape does not match nodes x F");
    }
}

std::vector<int> Dataset::labels_or(int missing) const {
    std::vector<int> out(items.size(), missing);
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].label) out[i] = *items[i].label;
    }
    return out;
}

void Dataset::validate() const {
    const std::size_t n = items.size();
    if (static_cast<std::size_t>(news_features.rows()) != n ||
        static_cast<std::size_t>(news_features.cols()) != feature_dim) {
        throw ValidationError("news feature matrix shape does not match N x F");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (items[i].id != i) {
            throw ValidationError("item ids must be dense indices");
        }
        if (items[i].label && *items[i].label != kFake && *items[i].label != kTrue) {
            throw ValidationError("label of news " + std::to_string(i) + " is not 0 or 1");
        }
    }
    if (trees.size() != n) {
        throw IntegrityError("expected one propagation tree per news item (" + std::to_string(n) +
                             "), found " + std::to_string(trees.size()));
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (trees[i].news_id != i) {
            throw IntegrityError("tree order does not follow news ids");
        }
        trees[i].validate(feature_dim);
    }

    std::vector<int> owner(n, -1);
    auto claim = [&](const std::vector<NodeId>& ids, int split, bool needs_label) {
        for (NodeId id : ids) {
            if (id >= n) {
                throw IntegrityError("split references unknown news id " + std::to_string(id));
            }
            if (owner[id] != -1) {
                throw ValidationError("news " + std::to_string(id) + " appears in two splits");
            }
            owner[id] = split;
            if (needs_label && !items[id].label) {
                throw ValidationError("train/val news " + std::to_string(id) + " has no label");
            }
        }
    };
    claim(splits.train, 0, true);
    claim(splits.val, 1, true);
    claim(splits.test, 2, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (items[i].label && owner[i] == -1) {
            throw ValidationError("labelled news " + std::to_string(i) + " is in no split");
        }
    }
}

std::vector<std::size_t> apportion(std::size_t total, const std::vector<std::size_t>& counts) {
    const std::size_t weight = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    std::vector<std::size_t> out(counts.size(), 0);
    if (weight == 0) return out;
    std::vector<std::size_t> remainder(counts.size());
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        out[c] = total * counts[c] / weight;
        remainder[c] = total * counts[c] % weight;
        assigned += out[c];
    }
    std::vector<std::size_t> order(counts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < total; ++k, ++assigned) {
        ++out[order[k % order.size()]];
    }
    return out;
}

namespace {

std::array<std::vector<NodeId>, 2> by_class(const Dataset& d, const std::vector<NodeId>& ids) {
    std::array<std::vector<NodeId>, 2> out;
    for (NodeId id : ids) {
        out[static_cast<std::size_t>(*d.items[id].label)].push_back(id);
    }
    return out;
}

// floor/ceil with slack for fractions such as 0.7 * 10 that land just below an integer.
std::size_t floor_count(double x) { return static_cast<std::size_t>(std::floor(x + 1e-9)); }
std::size_t ceil_count(double x) { return static_cast<std::size_t>(std::ceil(x - 1e-9)); }

} // namespace

Dataset make_splits(Dataset dataset, const std::array<double, 3>& fractions, std::uint64_t seed) {
    const double sum = fractions[0] + fractions[1] + fractions[2];
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ValidationError("split fractions must sum to 1");
    }
    for (double f : fractions) {
        if (!(f > 0.0)) {
            throw ValidationError("split fractions must all be positive (train, val and test are required)");
        }
    }
    std::vector<NodeId> labelled;
    for (const auto& item : dataset.items) {
        if (item.label) labelled.push_back(item.id);
    }
    const std::size_t n = labelled.size();
    if (n < 3) {
        throw ValidationError("dataset too small to split: " + std::to_string(n) + " labelled items");
    }
    const std::size_t n_train = floor_count(fractions[0] * static_cast<double>(n));
    const std::size_t n_val = floor_count(fractions[1] * static_cast<double>(n));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
        throw ValidationError("split fractions leave an empty split for " + std::to_string(n) + " items");
    }
    const std::vector<std::size_t> sizes{n_train, n_val, n - n_train - n_val};

    auto classes = by_class(dataset, labelled);
    // Class-0 counts per split by largest remainder; class 1 fills the rest. Both
    // end up within one item of their proportional share.
    const auto fake_counts = apportion(classes[0].size(), sizes);

    std::mt19937_64 rng(seed);
    for (auto& members : classes) {
        std::shuffle(members.begin(), members.end(), rng);
    }
    std::array<std::vector<NodeId>*, 3> out{&dataset.splits.train, &dataset.splits.val, &dataset.splits.test};
    std::array<std::size_t, 2> cursor{0, 0};
    for (std::size_t s = 0; s < 3; ++s) {
        out[s]->clear();
        const std::array<std::size_t, 2> take{fake_counts[s], sizes[s] - fake_counts[s]};
        for (std::size_t c = 0; c < 2; ++c) {
            for (std::size_t k = 0; k < take[c]; ++k) {
                out[s]->push_back(classes[c][cursor[c]++]);
            }
        }
        std::sort(out[s]->begin(), out[s]->end());
    }
    return dataset;
}

Dataset select_items(const Dataset& dataset, const std::vector<NodeId>& keep) {
    const std::size_t n = dataset.size();
    std::vector<std::int64_t> remap(n, -1);
    Dataset out;
    out.feature_dim = dataset.feature_dim;
    out.news_features.resize(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(dataset.feature_dim));
    out.items.reserve(keep.size());
    out.trees.reserve(keep.size());
    for (std::size_t k = 0; k < keep.size(); ++k) {
        const NodeId old = keep[k];
        if (old >= n || (k > 0 && keep[k - 1] >= old)) {
            throw ValidationError("select_items: ids must be sorted, unique and in range");
        }
        remap[old] = static_cast<std::int64_t>(k);
        NewsItem item = dataset.items[old];
        item.id = static_cast<NodeId>(k);
        out.items.push_back(std::move(item));
        PropagationTree tree = dataset.trees[old];
        tree.news_id = static_cast<NodeId>(k);
        out.trees.push_back(std::move(tree));
        out.news_features.row(static_cast<Eigen::Index>(k)) = dataset.news_features.row(old);
    }
    auto translate = [&](const std::vector<NodeId>& ids) {
        std::vector<NodeId> r;
        for (NodeId id : ids) {
            if (remap[id] >= 0) r.push_back(static_cast<NodeId>(remap[id]));
        }
        return r;
    };
    out.splits.train = translate(dataset.splits.train);
    out.splits.val = translate(dataset.splits.val);
    out.splits.test = translate(dataset.splits.test);
    return out;
}

Dataset downsample_train_labels(const Dataset& dataset, double keep_fraction, std::uint64_t seed) {
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
        throw ValidationError("keep_fraction must lie in (0, 1]");
    }
    const auto& train = dataset.splits.train;
    const std::size_t kept_total = ceil_count(keep_fraction * static_cast<double>(train.size()));
    if (kept_total >= train.size()) {
        return dataset;
    }
    auto classes = by_class(dataset, train);
    const auto quota = apportion(kept_total, {classes[0].size(), classes[1].size()});
    if (quota[0] == 0 || quota[1] == 0) {
        throw StratificationError("downsampling to " + std::to_string(kept_total) +
                                  " training items leaves a class without training labels");
    }
    // The shuffle does not depend on keep_fraction, so smaller fractions keep
    // prefixes of what larger fractions keep.
    std::vector<char> keep(dataset.size(), 1);
    for (std::size_t c = 0; c < 2; ++c) {
        std::mt19937_64 rng(seed * 2 + c);
        std::shuffle(classes[c].begin(), classes[c].end(), rng);
        for (std::size_t k = quota[c]; k < classes[c].size(); ++k) {
            keep[classes[c][k]] = 0;
        }
    }
    std::vector<NodeId> ids;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (keep[i]) ids.push_back(static_cast<NodeId>(i));
    }
    return select_items(dataset, ids);
}

} // namespace hgfnd
