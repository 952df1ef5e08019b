#pragma once

#include "hgfnd/dataset.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hgfnd {

enum class HyperedgeKind : std::uint8_t { User = 0, Time = 1, Entity = 2 };
enum class TimeGranularity : std::uint8_t { Day, Hour };

std::string_view to_string(HyperedgeKind kind);
HyperedgeKind parse_hyperedge_kind(std::string_view text);
TimeGranularity parse_time_granularity(std::string_view text);

struct Hyperedge {
    std::uint32_t id = 0;
    HyperedgeKind kind = HyperedgeKind::User;
    std::string key;
    std::vector<NodeId> members; // sorted, unique, at least two
};

/// Binary incidence structure over news nodes, stored both hyperedge-major
/// (member lists) and node-major (incident hyperedge lists).
class Hypergraph {
public:
    Hypergraph() = default;

    /// Validates members and rebuilds both incidence directions. Hyperedge ids
    /// are reassigned to their position in `edges`.
    Hypergraph(std::size_t n_nodes, std::vector<Hyperedge> edges);

    std::size_t n_nodes() const { return n_nodes_; }
    std::size_t n_edges() const { return edges_.size(); }
    std::size_t n_incidences() const { return edge_members_.size(); }

    const std::vector<Hyperedge>& edges() const { return edges_; }
    const Hyperedge& edge(std::size_t j) const { return edges_[j]; }

    std::span<const NodeId> members(std::size_t j) const {
        return {edge_members_.data() + edge_offsets_[j], edge_offsets_[j + 1] - edge_offsets_[j]};
    }
    std::span<const std::uint32_t> incident(std::size_t i) const {
        return {node_edges_.data() + node_offsets_[i], node_offsets_[i + 1] - node_offsets_[i]};
    }
    std::size_t degree(std::size_t i) const { return node_offsets_[i + 1] - node_offsets_[i]; }

    /// Offsets into the flat incidence arrays (CSR style).
    std::span<const std::size_t> edge_offsets() const { return edge_offsets_; }
    std::span<const std::size_t> node_offsets() const { return node_offsets_; }

    /// For node-major incidence position p (node i, p-th incident hyperedge j),
    /// the hyperedge-major position of the same (j, i) pair.
    std::span<const std::size_t> node_to_edge_position() const { return node_to_edge_pos_; }
    /// For hyperedge-major position q, the node-major position of the same pair.
    std::span<const std::size_t> edge_to_node_position() const { return edge_to_node_pos_; }

    bool contains(std::size_t node, std::size_t edge) const;
    std::size_t isolated_nodes() const;

private:
    std::size_t n_nodes_ = 0;
    std::vector<Hyperedge> edges_;
    std::vector<std::size_t> edge_offsets_{0};
    std::vector<NodeId> edge_members_;
    std::vector<std::size_t> node_offsets_{0};
    std::vector<std::uint32_t> node_edges_;
    std::vector<std::size_t> node_to_edge_pos_;
    std::vector<std::size_t> edge_to_node_pos_;
};

struct PlainGraph {
    std::size_t n_nodes = 0;
    std::vector<std::pair<NodeId, NodeId>> edges; // u < v, sorted, unique
};

std::vector<Hyperedge> build_user_hyperedges(const Dataset& dataset);
std::vector<Hyperedge> build_time_hyperedges(const Dataset& dataset, TimeGranularity granularity);
std::vector<Hyperedge> build_entity_hyperedges(const Dataset& dataset);

/// Lower-cases ASCII letters, trims, and collapses internal whitespace runs.
std::string normalize_entity(std::string_view entity);

/// Entity fallback for unannotated text: maximal runs of capitalised tokens,
/// with a small stopword list removed from the ends of each run.
std::vector<std::string> extract_entities(std::string_view text);

/// UTC bucket token: "YYYY-MM-DD" for days, "YYYY-MM-DDTHH" for hours.
std::string time_bucket(std::int64_t timestamp, TimeGranularity granularity);

/// Concatenates hyperedge families in the given order; ids follow that order.
Hypergraph concat_hypergraphs(std::vector<std::vector<Hyperedge>> parts, std::size_t n_nodes);

struct HypergraphOptions {
    bool user = true;
    bool time = true;
    bool entity = true;
    TimeGranularity granularity = TimeGranularity::Day;

    static HypergraphOptions parse_kinds(std::string_view csv, TimeGranularity granularity);
    std::string kinds_label() const; // e.g. "U T E", "U - E"
};

/// Builds the enabled families (User, Time, Entity order) and concatenates them.
Hypergraph build_hypergraph(const Dataset& dataset, const HypergraphOptions& options);

PlainGraph clique_expansion(const Hypergraph& h);

struct HypergraphStatsRow {
    std::string scope; // "user", "time", "entity" or "all"
    std::size_t hyperedges = 0;
    double mean_size = 0.0;
    std::size_t max_size = 0;
    double mean_degree = 0.0; // over nodes with at least one incident hyperedge of the scope
    std::size_t max_degree = 0;
    std::size_t isolated = 0; // nodes with no incident hyperedge of the scope
};

/// Per-kind rows (user, time, entity) followed by the overall row.
std::vector<HypergraphStatsRow> stats(const Hypergraph& h);
void write_stats_csv(std::ostream& out, const std::vector<HypergraphStatsRow>& rows);
void write_stats_text(std::ostream& out, const std::vector<HypergraphStatsRow>& rows);

// Text format: "HG v1 N M", then one "id kind key m1,m2,..." line per hyperedge.
// Keys are percent-encoded so they never contain whitespace or commas.
void write_hypergraph(std::ostream& out, const Hypergraph& h);
void write_hypergraph(const std::filesystem::path& path, const Hypergraph& h);
Hypergraph read_hypergraph(std::istream& in);
Hypergraph read_hypergraph(const std::filesystem::path& path);

} // namespace hgfnd
