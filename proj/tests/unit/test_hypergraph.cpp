#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hgfnd/error.hpp"
#include "hgfnd/hypergraph.hpp"
#include "hgfnd/synthetic.hpp"
#include "oracle.hpp"

#include <random>
#include <sstream>

using namespace hgfnd;

namespace {

using Engagements = std::vector<std::pair<std::string, std::int64_t>>;

// One chain-shaped tree per news item, F = 1.
Dataset make_dataset(const std::vector<Engagements>& trees, const std::vector<std::vector<std::string>>& entities = {}) {
    Dataset d;
    d.feature_dim = 1;
    d.news_features = FeatureMatrix::Zero(static_cast<Eigen::Index>(trees.size()), 1);
    for (std::size_t i = 0; i < trees.size(); ++i) {
        NewsItem item;
        item.id = item.source_id = static_cast<NodeId>(i);
        if (i < entities.size()) item.entities = entities[i];
        d.items.push_back(item);
        PropagationTree t;
        t.news_id = static_cast<NodeId>(i);
        for (std::size_t v = 0; v < trees[i].size(); ++v) {
            t.nodes.push_back({trees[i][v].first, trees[i][v].second});
            if (v > 0) t.edges.emplace_back(static_cast<std::uint32_t>(v - 1), static_cast<std::uint32_t>(v));
        }
        t.features = FeatureMatrix::Zero(static_cast<Eigen::Index>(t.nodes.size()), 1);
        d.trees.push_back(t);
    }
    return d;
}

std::vector<std::vector<NodeId>> member_sets(const std::vector<Hyperedge>& edges) {
    std::vector<std::vector<NodeId>> out;
    for (const auto& e : edges) out.push_back(e.members);
    return out;
}

Hypergraph random_hypergraph(std::mt19937_64& rng, std::size_t max_n, std::size_t max_m, std::size_t min_size = 1) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, max_n)(rng);
    const std::size_t m = std::uniform_int_distribution<std::size_t>(0, max_m)(rng);
    std::vector<Hyperedge> edges;
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<NodeId> members;
        for (NodeId v = 0; v < n; ++v)
            if (rng() % 3 == 0) members.push_back(v);
        while (members.size() < min_size) {
            const NodeId v = static_cast<NodeId>(rng() % n);
            if (std::find(members.begin(), members.end(), v) == members.end()) members.push_back(v);
        }
        std::sort(members.begin(), members.end());
        if (members.empty()) members.push_back(static_cast<NodeId>(rng() % n));
        edges.push_back({0, static_cast<HyperedgeKind>(rng() % 3), "k" + std::to_string(j), members});
    }
    return Hypergraph(n, edges);
}

constexpr std::int64_t k2020 = 1577836800; // 2020-01-01T00:00:00Z

} // namespace

TEST_CASE("user hyperedges group news shared by the same user") {
    // news 3, 4 and 5 all engaged by "ann"; everyone else appears once
    const Dataset d = make_dataset({{{"p0", 1}}, {{"p1", 1}}, {{"p2", 1}}, {{"p3", 1}, {"ann", 5}},
                                    {{"p4", 1}, {"x", 2}, {"ann", 6}}, {{"ann", 7}}});
    const auto edges = build_user_hyperedges(d);
    REQUIRE(edges.size() == 1);
    CHECK(edges[0].members == std::vector<NodeId>{3, 4, 5});
    CHECK(edges[0].key == "ann");
    CHECK(edges[0].kind == HyperedgeKind::User);

    const Dataset lonely = make_dataset({{{"a", 1}, {"a", 2}}, {{"b", 1}}, {{"c", 1}, {"d", 2}}});
    CHECK(build_user_hyperedges(lonely).empty());

    // ordering by user id; the root's user counts
    const Dataset two = make_dataset({{{"zed", 1}, {"amy", 2}}, {{"amy", 1}}, {{"zed", 1}}});
    const auto e2 = build_user_hyperedges(two);
    REQUIRE(e2.size() == 2);
    CHECK(e2[0].key == "amy");
    CHECK(e2[0].members == std::vector<NodeId>{0, 1});
    CHECK(e2[1].key == "zed");
    CHECK(e2[1].members == std::vector<NodeId>{0, 2});
}

TEST_CASE("time buckets floor to UTC days or hours") {
    CHECK(time_bucket(k2020, TimeGranularity::Day) == "2020-01-01");
    CHECK(time_bucket(k2020 + 3 * 3600 + 59, TimeGranularity::Hour) == "2020-01-01T03");
    CHECK(time_bucket(k2020 + 86399, TimeGranularity::Day) == "2020-01-01");
    CHECK(time_bucket(k2020 + 86400, TimeGranularity::Day) == "2020-01-02");
    CHECK(time_bucket(951782400, TimeGranularity::Day) == "2000-02-29");
    CHECK(time_bucket(-1, TimeGranularity::Hour) == "1969-12-31T23");

    const Dataset d = make_dataset({{{"a", k2020 + 3 * 3600}}, {{"b", k2020 + 21 * 3600}}});
    const auto day = build_time_hyperedges(d, TimeGranularity::Day);
    REQUIRE(day.size() == 1);
    CHECK(day[0].members == std::vector<NodeId>{0, 1});
    CHECK(day[0].key == "2020-01-01");
    CHECK(build_time_hyperedges(d, TimeGranularity::Hour).empty());

    const Dataset same = make_dataset({{{"a", 42}}, {{"b", 42}, {"c", 42}}, {{"d", 42}}});
    const auto one = build_time_hyperedges(same, TimeGranularity::Hour);
    REQUIRE(one.size() == 1);
    CHECK(one[0].members == std::vector<NodeId>{0, 1, 2});
}

TEST_CASE("entity hyperedges use normalised entity strings") {
    const Dataset d = make_dataset({{{"a", 1}}, {{"b", 1}}, {{"c", 1}}},
                                   {{"COVID-19"}, {"covid-19", "  White   House "}, {"white house"}});
    const auto edges = build_entity_hyperedges(d);
    REQUIRE(edges.size() == 2);
    CHECK(edges[0].key == "covid-19");
    CHECK(edges[0].members == std::vector<NodeId>{0, 1});
    CHECK(edges[1].key == "white house");
    CHECK(edges[1].members == std::vector<NodeId>{1, 2});
    CHECK(build_entity_hyperedges(make_dataset({{{"a", 1}}, {{"b", 1}}})).empty());
    CHECK(normalize_entity("\tNew\n York  CITY ") == "new york city");
}

TEST_CASE("fallback entity extraction takes capitalised runs") {
    CHECK(extract_entities("The Senate passed a bill in Washington today.") ==
          std::vector<std::string>{"Senate", "Washington"});
    CHECK(extract_entities("Joe Biden visited the White House, then Camp David.") ==
          std::vector<std::string>{"Joe Biden", "White House", "Camp David"});
    CHECK(extract_entities("nothing to see here").empty());
}

TEST_CASE("hypergraph construction validates members") {
    CHECK_THROWS_AS(Hypergraph(3, {{0, HyperedgeKind::User, "a", {0, 3}}}), ValidationError);
    CHECK_THROWS_AS(Hypergraph(3, {{0, HyperedgeKind::User, "a", {1, 1}}}), ValidationError);
    CHECK_THROWS_AS(Hypergraph(3, {{0, HyperedgeKind::User, "a", {}}}), ValidationError);
    CHECK_NOTHROW(Hypergraph(3, {{0, HyperedgeKind::User, "a", {2}}}));
}

TEST_CASE("concatenation keeps every part in order") {
    const std::vector<Hyperedge> user{{0, HyperedgeKind::User, "u", {1, 2}}};
    const std::vector<Hyperedge> time{{0, HyperedgeKind::Time, "t", {1, 2}}, {1, HyperedgeKind::Time, "t2", {0, 3}}};
    const Hypergraph h = concat_hypergraphs({user, time, {}}, 4);
    CHECK(h.n_edges() == 3);
    CHECK(h.edge(0).kind == HyperedgeKind::User);
    CHECK(h.edge(1).kind == HyperedgeKind::Time);
    CHECK(h.edge(1).id == 1);
    CHECK(h.edge(2).id == 2);
    CHECK(h.n_incidences() == 6);
    CHECK(h.degree(1) == 2);

    const Hypergraph empty = concat_hypergraphs({{}, {}, {}}, 5);
    CHECK(empty.n_edges() == 0);
    CHECK(empty.isolated_nodes() == 5);
    CHECK_THROWS_AS(concat_hypergraphs({{{0, HyperedgeKind::User, "u", {1, 9}}}}, 4), ValidationError);

    // Politifact-sized families: 2,953 + 1,717 + 1,040 = 5,710
    std::vector<std::vector<Hyperedge>> parts(3);
    const std::size_t sizes[3] = {2953, 1717, 1040};
    for (std::size_t p = 0; p < 3; ++p)
        for (std::size_t j = 0; j < sizes[p]; ++j)
            parts[p].push_back({0, static_cast<HyperedgeKind>(p), std::to_string(j),
                                {static_cast<NodeId>(j % 314), static_cast<NodeId>((j + 1) % 314)}});
    for (auto& part : parts)
        for (auto& e : part) std::sort(e.members.begin(), e.members.end());
    const Hypergraph big = concat_hypergraphs(parts, 314);
    CHECK(big.n_edges() == 5710);
    CHECK(big.edge(2953).kind == HyperedgeKind::Time);
    CHECK(big.edge(2953 + 1717).kind == HyperedgeKind::Entity);
}

TEST_CASE("node-major and hyperedge-major incidence agree") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const Hypergraph h = random_hypergraph(rng, 15, 10);
        std::size_t total = 0;
        for (std::size_t i = 0; i < h.n_nodes(); ++i) {
            for (std::size_t j = 0; j < h.n_edges(); ++j) {
                const auto m = h.members(j);
                const bool by_edge = std::find(m.begin(), m.end(), i) != m.end();
                const auto inc = h.incident(i);
                const bool by_node = std::find(inc.begin(), inc.end(), j) != inc.end();
                CHECK(by_edge == by_node);
                CHECK(h.contains(i, j) == by_edge);
            }
            total += h.degree(i);
            for (std::size_t p = h.node_offsets()[i]; p < h.node_offsets()[i + 1]; ++p) {
                const std::size_t q = h.node_to_edge_position()[p];
                CHECK(h.edge_to_node_position()[q] == p);
            }
        }
        CHECK(total == h.n_incidences());
    }
}

TEST_CASE("clique expansion") {
    const Hypergraph fig({6, {{0, HyperedgeKind::User, "u", {3, 4, 5}}}});
    const PlainGraph g = clique_expansion(fig);
    CHECK(g.edges == std::vector<std::pair<NodeId, NodeId>>{{3, 4}, {3, 5}, {4, 5}});
    CHECK(clique_expansion(Hypergraph(3, {{0, HyperedgeKind::Time, "t", {0, 2}}})).edges ==
          std::vector<std::pair<NodeId, NodeId>>{{0, 2}});
    CHECK(clique_expansion(Hypergraph(4, {})).edges.empty());

    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        const Hypergraph h = random_hypergraph(rng, 12, 6);
        const PlainGraph cg = clique_expansion(h);
        const auto oracle_pairs = oracle::clique_pairs(h);
        CHECK(std::set<std::pair<NodeId, NodeId>>(cg.edges.begin(), cg.edges.end()) == oracle_pairs);
        CHECK(cg.edges.size() == oracle_pairs.size());
        CHECK(cg.edges.size() <= h.n_nodes() * (h.n_nodes() - 1) / 2);

        // invariant under hyperedge reordering and under dropping singletons
        std::vector<Hyperedge> edges = h.edges();
        std::shuffle(edges.begin(), edges.end(), rng);
        CHECK(clique_expansion(Hypergraph(h.n_nodes(), edges)).edges == cg.edges);
        std::erase_if(edges, [](const Hyperedge& e) { return e.members.size() < 2; });
        CHECK(clique_expansion(Hypergraph(h.n_nodes(), edges)).edges == cg.edges);
    }
}

TEST_CASE("statistics") {
    const auto one = stats(Hypergraph(3, {{0, HyperedgeKind::Entity, "e", {0, 1, 2}}}));
    REQUIRE(one.size() == 4);
    CHECK(one[2].scope == "entity");
    CHECK(one[2].hyperedges == 1);
    CHECK(one[2].mean_size == 3.0);
    CHECK(one[2].mean_degree == 1.0);
    CHECK(one[3].mean_degree == 1.0);
    CHECK(one[0].hyperedges == 0);

    for (const auto& row : stats(Hypergraph(4, {}))) {
        CHECK(row.hyperedges == 0);
        CHECK(row.mean_size == 0.0);
        CHECK(row.max_size == 0);
        CHECK(row.mean_degree == 0.0);
        CHECK(row.max_degree == 0);
    }

    // hand count: sizes 2 and 3 (user), 2 (time); node 1 has degree 3
    const auto mixed = stats(Hypergraph(5, {{0, HyperedgeKind::User, "a", {0, 1}},
                                            {0, HyperedgeKind::User, "b", {1, 2, 3}},
                                            {0, HyperedgeKind::Time, "t", {1, 3}}}));
    CHECK(mixed[0].mean_size == doctest::Approx(2.5));
    CHECK(mixed[0].max_degree == 2);
    CHECK(mixed[0].mean_degree == doctest::Approx(5.0 / 4.0));
    CHECK(mixed[0].isolated == 1);
    CHECK(mixed[3].hyperedges == 3);
    CHECK(mixed[3].max_degree == 3);
    CHECK(mixed[3].mean_degree == doctest::Approx(7.0 / 4.0));
    CHECK(mixed[3].max_size == 3);

    std::ostringstream csv;
    write_stats_csv(csv, mixed);
    CHECK(csv.str().rfind("scope,hyperedges,mean_size,max_size,mean_degree,max_degree,isolated_nodes\n", 0) == 0);
}

TEST_CASE("serialisation round trip and determinism") {
    const Hypergraph h(6, {{0, HyperedgeKind::User, "user with space", {0, 1}},
                           {0, HyperedgeKind::Entity, "a,b%c", {1, 2, 5}},
                           {0, HyperedgeKind::Entity, "", {3, 4}},
                           {0, HyperedgeKind::Time, "2020-01-01", {0, 5}}});
    std::stringstream buf;
    write_hypergraph(buf, h);
    const std::string text = buf.str();
    CHECK(text.rfind("HG v1 6 4\n", 0) == 0);
    CHECK(text.find("0 user user%20with%20space 0,1\n") != std::string::npos);
    CHECK(text.find("1 entity a%2Cb%25c 1,2,5\n") != std::string::npos);
    CHECK(text.find("2 entity % 3,4\n") != std::string::npos);
    const Hypergraph back = read_hypergraph(buf);
    REQUIRE(back.n_edges() == 4);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(back.edge(j).key == h.edge(j).key);
        CHECK(back.edge(j).kind == h.edge(j).kind);
        CHECK(back.edge(j).members == h.edge(j).members);
    }
    std::stringstream again;
    write_hypergraph(again, back);
    CHECK(again.str() == text);

    std::stringstream bad("HG v2 3 0\n");
    CHECK_THROWS_AS(read_hypergraph(bad), FormatError);
    std::stringstream short_file("HG v1 3 2\n0 user a 0,1\n");
    CHECK_THROWS_AS(read_hypergraph(short_file), FormatError);

    SyntheticConfig c;
    c.n_news = 60;
    const Dataset d = generate_synthetic(c);
    std::stringstream x, y;
    write_hypergraph(x, build_hypergraph(d, HypergraphOptions{}));
    write_hypergraph(y, build_hypergraph(generate_synthetic(c), HypergraphOptions{}));
    CHECK(x.str() == y.str());
}

TEST_CASE("kind selection") {
    const auto o = HypergraphOptions::parse_kinds("user,entity", TimeGranularity::Hour);
    CHECK(o.user);
    CHECK_FALSE(o.time);
    CHECK(o.entity);
    CHECK(o.kinds_label() == "U - E");
    CHECK_THROWS_AS(HypergraphOptions::parse_kinds("user,place", TimeGranularity::Day), ValidationError);
    CHECK_THROWS_AS(parse_time_granularity("week"), ValidationError);

    SyntheticConfig c;
    c.n_news = 50;
    const Dataset d = generate_synthetic(c);
    const Hypergraph all = build_hypergraph(d, HypergraphOptions{});
    const Hypergraph users = build_hypergraph(d, HypergraphOptions{true, false, false});
    CHECK(users.n_edges() == build_user_hyperedges(d).size());
    CHECK(all.n_edges() == build_user_hyperedges(d).size() + build_time_hyperedges(d, TimeGranularity::Day).size() +
                               build_entity_hyperedges(d).size());
    for (const auto& e : all.edges()) CHECK(e.members.size() >= 2);
}
