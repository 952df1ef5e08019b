#include "hgfnd/synthetic.hpp"

#include "hgfnd/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>

namespace hgfnd {

void SyntheticConfig::validate() const {
    if (n_news == 0 || n_users < 2 || feature_dim == 0) {
        throw ValidationError("synthetic config: counts must be positive (and at least two users)");
    }
    if (!(fake_fraction > 0.0 && fake_fraction < 1.0)) {
        throw ValidationError("synthetic config: fake_fraction must lie in (0, 1)");
    }
    if (!(user_fidelity >= 0.5 && user_fidelity <= 1.0)) {
        throw ValidationError("synthetic config: user_fidelity must lie in [0.5, 1]");
    }
    if (!(signal_strength >= 0.0) || !(noise_scale > 0.0)) {
        throw ValidationError("synthetic config: signal_strength >= 0 and noise_scale > 0 required");
    }
    if (min_tree_size < 1 || max_tree_size < min_tree_size || time_window_days <= 0 || entity_pool == 0) {
        throw ValidationError("synthetic config: bad tree size / time window / entity pool");
    }
}

namespace {

// Mixed-case surface forms so that entity normalisation has work to do.
std::string entity_name(std::size_t k, bool upper) {
    static constexpr const char* kStems[] = {"Senate", "Covid-19", "White House", "Hollywood", "Olympics",
                                             "Brexit", "NASA",     "Supreme Court", "Grammy", "Wall Street"};
    std::string s = std::string(kStems[k % std::size(kStems)]) + " " + std::to_string(k / std::size(kStems));
    if (upper) {
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    }
    return s;
}

std::string user_name(std::size_t u) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "u%05zu", u);
    return buf;
}

} // namespace

Dataset generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    const std::size_t n = cfg.n_news;
    const std::size_t f = cfg.feature_dim;

    // Labels: exactly round(fake_fraction * n) fake items, in random order.
    std::vector<int> labels(n, kTrue);
    const auto n_fake = static_cast<std::size_t>(std::llround(cfg.fake_fraction * static_cast<double>(n)));
    std::fill_n(labels.begin(), std::min(n_fake, n), kFake);
    std::shuffle(labels.begin(), labels.end(), rng);

    // Users: the same fake share, each class pool non-empty.
    const std::size_t n_fake_users = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(cfg.fake_fraction * static_cast<double>(cfg.n_users))), 1,
        cfg.n_users - 1);
    std::array<std::vector<std::size_t>, 2> pool;
    for (std::size_t u = 0; u < cfg.n_users; ++u) pool[u < n_fake_users ? kFake : kTrue].push_back(u);

    // Class means sit at +/- signal/2 along one random unit direction.
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd direction(static_cast<Eigen::Index>(f));
    for (Eigen::Index k = 0; k < direction.size(); ++k) direction[k] = gauss(rng);
    direction.normalize();
    auto sample_feature = [&](int label, auto&& row) {
        const double sign = label == kTrue ? 0.5 : -0.5;
        for (std::size_t k = 0; k < f; ++k) {
            row[static_cast<Eigen::Index>(k)] = static_cast<float>(
                sign * cfg.signal_strength * direction[static_cast<Eigen::Index>(k)] + cfg.noise_scale * gauss(rng));
        }
    };

    std::uniform_int_distribution<std::size_t> tree_size(cfg.min_tree_size, cfg.max_tree_size);
    std::uniform_int_distribution<std::int64_t> start(0, cfg.time_window_days * 86400 - 1);
    std::exponential_distribution<double> delay(1.0 / cfg.mean_reply_delay_s);
    std::bernoulli_distribution faithful(cfg.user_fidelity);
    std::uniform_int_distribution<std::size_t> n_entities(0, cfg.max_entities_per_news);
    std::uniform_int_distribution<std::size_t> entity_pick(0, cfg.entity_pool - 1);
    std::bernoulli_distribution upper(0.3);

    Dataset d;
    d.feature_dim = f;
    d.news_features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f));
    d.items.resize(n);
    d.trees.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = labels[i];
        auto& item = d.items[i];
        item.id = item.source_id = static_cast<NodeId>(i);
        item.label = y;
        sample_feature(y, d.news_features.row(static_cast<Eigen::Index>(i)));

        auto& tree = d.trees[i];
        tree.news_id = static_cast<NodeId>(i);
        const std::size_t size = tree_size(rng);
        tree.nodes.resize(size);
        tree.features.resize(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(f));
        tree.features.row(0) = d.news_features.row(static_cast<Eigen::Index>(i));
        for (std::size_t v = 0; v < size; ++v) {
            const int user_class = faithful(rng) ? y : 1 - y;
            const auto& candidates = pool[static_cast<std::size_t>(user_class)];
            const std::size_t user = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
            tree.nodes[v].user = user_name(user);
            if (v == 0) {
                tree.nodes[v].timestamp = cfg.start_time + start(rng);
                continue;
            }
            const auto parent = static_cast<std::uint32_t>(std::uniform_int_distribution<std::size_t>(0, v - 1)(rng));
            tree.edges.emplace_back(parent, static_cast<std::uint32_t>(v));
            tree.nodes[v].timestamp = tree.nodes[parent].timestamp + static_cast<std::int64_t>(std::llround(delay(rng)));
            sample_feature(y, tree.features.row(static_cast<Eigen::Index>(v)));
        }

        std::set<std::size_t> picked;
        const std::size_t k = n_entities(rng);
        while (picked.size() < std::min(k, cfg.entity_pool)) picked.insert(entity_pick(rng));
        for (std::size_t e : picked) item.entities.push_back(entity_name(e, upper(rng)));
    }

    return make_splits(std::move(d), cfg.split_fractions, cfg.seed);
}

double mean_user_purity(const Dataset& d) {
    std::map<std::string, std::set<NodeId>> by_user;
    for (const auto& t : d.trees) {
        for (const auto& e : t.nodes) by_user[e.user].insert(t.news_id);
    }
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& [user, members] : by_user) {
        if (members.size() < 2) continue;
        std::array<std::size_t, 2> c{0, 0};
        for (NodeId m : members) {
            if (d.items[m].label) ++c[static_cast<std::size_t>(*d.items[m].label)];
        }
        const std::size_t labelled = c[0] + c[1];
        if (labelled == 0) continue;
        total += static_cast<double>(std::max(c[0], c[1])) / static_cast<double>(labelled);
        ++count;
    }
    return count == 0 ? 1.0 : total / static_cast<double>(count);
}

} // namespace hgfnd
