#include "hgfnd/hypergraph.hpp"

#include "hgfnd/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace hgfnd {

std::string_view to_string(HyperedgeKind kind) {
    switch (kind) {
    case HyperedgeKind::User: return "user";
    case HyperedgeKind::Time: return "time";
    case HyperedgeKind::Entity: return "entity";
    }
    return "?";
}

HyperedgeKind parse_hyperedge_kind(std::string_view text) {
    if (text == "user") return HyperedgeKind::User;
    if (text == "time") return HyperedgeKind::Time;
    if (text == "entity") return HyperedgeKind::Entity;
    throw ValidationError("unknown hyperedge kind '" + std::string(text) + "'");
}

TimeGranularity parse_time_granularity(std::string_view text) {
    if (text == "day") return TimeGranularity::Day;
    if (text == "hour") return TimeGranularity::Hour;
    throw ValidationError("time granularity must be 'day' or 'hour', got '" + std::string(text) + "'");
}

Hypergraph::Hypergraph(std::size_t n_nodes, std::vector<Hyperedge> edges)
    : n_nodes_(n_nodes), edges_(std::move(edges)) {
    std::vector<std::size_t> degree(n_nodes_, 0);
    for (std::size_t j = 0; j < edges_.size(); ++j) {
        auto& e = edges_[j];
        e.id = static_cast<std::uint32_t>(j);
        std::sort(e.members.begin(), e.members.end());
        if (e.members.empty()) {
            throw ValidationError("hyperedge " + std::to_string(j) + " has no members");
        }
        if (std::adjacent_find(e.members.begin(), e.members.end()) != e.members.end()) {
            throw ValidationError("hyperedge " + std::to_string(j) + " lists a member twice");
        }
        if (e.members.back() >= n_nodes_) {
            throw ValidationError("hyperedge " + std::to_string(j) + " member " + std::to_string(e.members.back()) +
                                  " is out of range for " + std::to_string(n_nodes_) + " nodes");
        }
        for (NodeId m : e.members) {
            edge_members_.push_back(m);
            ++degree[m];
        }
        edge_offsets_.push_back(edge_members_.size());
    }

    node_offsets_.assign(n_nodes_ + 1, 0);
    for (std::size_t i = 0; i < n_nodes_; ++i) node_offsets_[i + 1] = node_offsets_[i] + degree[i];
    node_edges_.resize(edge_members_.size());
    node_to_edge_pos_.resize(edge_members_.size());
    edge_to_node_pos_.resize(edge_members_.size());
    std::vector<std::size_t> fill(node_offsets_.begin(), node_offsets_.end() - 1);
    for (std::size_t j = 0; j < edges_.size(); ++j) {
        for (std::size_t q = edge_offsets_[j]; q < edge_offsets_[j + 1]; ++q) {
            const std::size_t p = fill[edge_members_[q]]++;
            node_edges_[p] = static_cast<std::uint32_t>(j);
            node_to_edge_pos_[p] = q;
            edge_to_node_pos_[q] = p;
        }
    }
}

bool Hypergraph::contains(std::size_t node, std::size_t edge) const {
    const auto m = members(edge);
    return std::binary_search(m.begin(), m.end(), static_cast<NodeId>(node));
}

std::size_t Hypergraph::isolated_nodes() const {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n_nodes_; ++i) count += degree(i) == 0 ? 1 : 0;
    return count;
}

namespace {

std::vector<Hyperedge> from_groups(HyperedgeKind kind, const std::map<std::string, std::set<NodeId>>& groups) {
    std::vector<Hyperedge> out;
    for (const auto& [key, members] : groups) {
        if (members.size() < 2) continue;
        out.push_back(Hyperedge{0, kind, key, {members.begin(), members.end()}});
    }
    for (std::size_t j = 0; j < out.size(); ++j) out[j].id = static_cast<std::uint32_t>(j);
    return out;
}

bool is_stopword(std::string_view token) {
    static const std::set<std::string, std::less<>> kStop = {
        "a",   "an",   "and",  "as",    "at",    "after", "before", "but",  "by",    "for",  "from",
        "he",  "her",  "his",  "i",     "if",    "in",    "it",     "its",  "of",    "on",   "or",
        "our", "she",  "that", "the",   "their", "these", "they",   "this", "those", "to",   "we",
        "when", "while", "with", "you", "is",    "was",   "are",    "not",  "new",   "why",  "how",
        "what", "who"};
    std::string lower(token);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return kStop.contains(lower);
}

} // namespace

std::vector<Hyperedge> build_user_hyperedges(const Dataset& dataset) {
    std::map<std::string, std::set<NodeId>> groups;
    for (const auto& tree : dataset.trees) {
        for (const auto& node : tree.nodes) groups[node.user].insert(tree.news_id);
    }
    return from_groups(HyperedgeKind::User, groups);
}

std::string time_bucket(std::int64_t timestamp, TimeGranularity granularity) {
    using namespace std::chrono;
    const std::int64_t day = timestamp >= 0 ? timestamp / 86400 : -((-timestamp + 86399) / 86400);
    const std::int64_t hour = (timestamp - day * 86400) / 3600;
    const year_month_day ymd{sys_days{days{day}}};
    char buf[32];
    if (granularity == TimeGranularity::Day) {
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    } else {
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(hour));
    }
    return buf;
}

std::vector<Hyperedge> build_time_hyperedges(const Dataset& dataset, TimeGranularity granularity) {
    std::map<std::string, std::set<NodeId>> groups;
    for (const auto& tree : dataset.trees) {
        for (const auto& node : tree.nodes) groups[time_bucket(node.timestamp, granularity)].insert(tree.news_id);
    }
    return from_groups(HyperedgeKind::Time, groups);
}

std::string normalize_entity(std::string_view entity) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : entity) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::vector<Hyperedge> build_entity_hyperedges(const Dataset& dataset) {
    std::map<std::string, std::set<NodeId>> groups;
    for (const auto& item : dataset.items) {
        for (const auto& e : item.entities) {
            auto key = normalize_entity(e);
            if (!key.empty()) groups[std::move(key)].insert(item.id);
        }
    }
    return from_groups(HyperedgeKind::Entity, groups);
}

std::vector<std::string> extract_entities(std::string_view text) {
    std::vector<std::string> out;
    std::vector<std::string> run;
    auto flush = [&] {
        while (!run.empty() && is_stopword(run.front())) run.erase(run.begin());
        while (!run.empty() && is_stopword(run.back())) run.pop_back();
        if (!run.empty()) {
            std::string joined = run.front();
            for (std::size_t k = 1; k < run.size(); ++k) joined += " " + run[k];
            if (std::find(out.begin(), out.end(), joined) == out.end()) out.push_back(std::move(joined));
        }
        run.clear();
    };
    std::istringstream words{std::string(text)};
    std::string raw;
    while (words >> raw) {
        const auto first = raw.find_first_not_of("\"'([{");
        const auto last = raw.find_last_not_of("\"')]}.,;:!?");
        const bool ends_clause = raw.find_last_of(".,;:!?") == raw.size() - 1;
        if (first == std::string::npos || last == std::string::npos || last < first) {
            flush();
            continue;
        }
        std::string token = raw.substr(first, last - first + 1);
        if (std::isupper(static_cast<unsigned char>(token.front()))) {
            run.push_back(std::move(token));
            if (ends_clause) flush();
        } else {
            flush();
        }
    }
    flush();
    return out;
}

Hypergraph concat_hypergraphs(std::vector<std::vector<Hyperedge>> parts, std::size_t n_nodes) {
    std::vector<Hyperedge> all;
    for (auto& part : parts) {
        for (auto& e : part) all.push_back(std::move(e));
    }
    if (all.empty()) {
        spdlog::warn("hypergraph has no hyperedges; every node is isolated");
    }
    Hypergraph h(n_nodes, std::move(all));
    if (!h.edges().empty() && h.isolated_nodes() > 0) {
        spdlog::warn("{} of {} news nodes belong to no hyperedge", h.isolated_nodes(), n_nodes);
    }
    return h;
}

HypergraphOptions HypergraphOptions::parse_kinds(std::string_view csv, TimeGranularity granularity) {
    HypergraphOptions o{false, false, false, granularity};
    std::string s(csv);
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (tok.empty()) continue;
        switch (parse_hyperedge_kind(tok)) {
        case HyperedgeKind::User: o.user = true; break;
        case HyperedgeKind::Time: o.time = true; break;
        case HyperedgeKind::Entity: o.entity = true; break;
        }
    }
    return o;
}

std::string HypergraphOptions::kinds_label() const {
    return std::string(user ? "U" : "-") + " " + (time ? "T" : "-") + " " + (entity ? "E" : "-");
}

Hypergraph build_hypergraph(const Dataset& dataset, const HypergraphOptions& options) {
    std::vector<std::vector<Hyperedge>> parts;
    if (options.user) parts.push_back(build_user_hyperedges(dataset));
    if (options.time) parts.push_back(build_time_hyperedges(dataset, options.granularity));
    if (options.entity) parts.push_back(build_entity_hyperedges(dataset));
    return concat_hypergraphs(std::move(parts), dataset.size());
}

PlainGraph clique_expansion(const Hypergraph& h) {
    PlainGraph g;
    g.n_nodes = h.n_nodes();
    for (std::size_t j = 0; j < h.n_edges(); ++j) {
        const auto m = h.members(j);
        for (std::size_t a = 0; a < m.size(); ++a) {
            for (std::size_t b = a + 1; b < m.size(); ++b) g.edges.emplace_back(m[a], m[b]);
        }
    }
    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
    return g;
}

std::vector<HypergraphStatsRow> stats(const Hypergraph& h) {
    const std::array<std::pair<const char*, int>, 4> scopes{
        {{"user", 0}, {"time", 1}, {"entity", 2}, {"all", -1}}};
    std::vector<HypergraphStatsRow> rows;
    for (const auto& [name, kind] : scopes) {
        HypergraphStatsRow r;
        r.scope = name;
        std::vector<std::size_t> degree(h.n_nodes(), 0);
        std::size_t total_size = 0;
        for (const auto& e : h.edges()) {
            if (kind >= 0 && static_cast<int>(e.kind) != kind) continue;
            ++r.hyperedges;
            total_size += e.members.size();
            r.max_size = std::max(r.max_size, e.members.size());
            for (NodeId m : e.members) ++degree[m];
        }
        std::size_t covered = 0;
        for (std::size_t d : degree) {
            if (d == 0) {
                ++r.isolated;
                continue;
            }
            ++covered;
            r.max_degree = std::max(r.max_degree, d);
        }
        if (r.hyperedges > 0) r.mean_size = static_cast<double>(total_size) / static_cast<double>(r.hyperedges);
        if (covered > 0) r.mean_degree = static_cast<double>(total_size) / static_cast<double>(covered);
        rows.push_back(r);
    }
    return rows;
}

void write_stats_csv(std::ostream& out, const std::vector<HypergraphStatsRow>& rows) {
    out << "scope,hyperedges,mean_size,max_size,mean_degree,max_degree,isolated_nodes\n";
    for (const auto& r : rows) {
        out << r.scope << ',' << r.hyperedges << ',' << std::fixed << std::setprecision(4) << r.mean_size << ','
            << r.max_size << ',' << r.mean_degree << ',' << r.max_degree << ',' << r.isolated << '\n';
        out.unsetf(std::ios::floatfield);
    }
}

void write_stats_text(std::ostream& out, const std::vector<HypergraphStatsRow>& rows) {
    out << std::left << std::setw(8) << "scope" << std::right << std::setw(12) << "hyperedges" << std::setw(11)
        << "avg size" << std::setw(10) << "max size" << std::setw(12) << "avg degree" << std::setw(12)
        << "max degree" << std::setw(10) << "isolated" << '\n';
    for (const auto& r : rows) {
        out << std::left << std::setw(8) << r.scope << std::right << std::setw(12) << r.hyperedges << std::fixed
            << std::setprecision(2) << std::setw(11) << r.mean_size << std::setw(10) << r.max_size << std::setw(12)
            << r.mean_degree << std::setw(12) << r.max_degree << std::setw(10) << r.isolated << '\n';
        out.unsetf(std::ios::floatfield);
    }
}

namespace {

std::string encode_key(std::string_view key) {
    if (key.empty()) return "%";
    std::string out;
    for (unsigned char c : key) {
        if (c <= 0x20 || c == 0x7F || c == '%' || c == ',') {
            char buf[4];
            std::snprintf(buf, sizeof buf, "%%%02X", c);
            out += buf;
        } else {
            out.push_back(static_cast<char>(c));
        }
    }
    return out;
}

std::string decode_key(std::string_view text) {
    if (text == "%") return {};
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '%') {
            out.push_back(text[i]);
            continue;
        }
        if (i + 2 >= text.size() || !std::isxdigit(static_cast<unsigned char>(text[i + 1])) ||
            !std::isxdigit(static_cast<unsigned char>(text[i + 2]))) {
            throw FormatError("hypergraph file: bad escape in key '" + std::string(text) + "'");
        }
        out.push_back(static_cast<char>(std::stoi(std::string(text.substr(i + 1, 2)), nullptr, 16)));
        i += 2;
    }
    return out;
}

} // namespace

void write_hypergraph(std::ostream& out, const Hypergraph& h) {
    out << "HG v1 " << h.n_nodes() << ' ' << h.n_edges() << '\n';
    for (const auto& e : h.edges()) {
        out << e.id << ' ' << to_string(e.kind) << ' ' << encode_key(e.key) << ' ';
        for (std::size_t k = 0; k < e.members.size(); ++k) out << (k ? "," : "") << e.members[k];
        out << '\n';
    }
}

void write_hypergraph(const std::filesystem::path& path, const Hypergraph& h) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot create " + path.string());
    write_hypergraph(out, h);
}

Hypergraph read_hypergraph(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("hypergraph file: empty");
    std::istringstream header(line);
    std::string magic, version;
    std::size_t n = 0, m = 0;
    if (!(header >> magic >> version >> n >> m) || magic != "HG" || version != "v1") {
        throw FormatError("hypergraph file: bad header '" + line + "'");
    }
    std::vector<Hyperedge> edges;
    edges.reserve(m);
    while (edges.size() < m && std::getline(in, line)) {
        std::istringstream row(line);
        std::size_t id = 0;
        std::string kind, key, members;
        if (!(row >> id >> kind >> key >> members) || id != edges.size()) {
            throw FormatError("hypergraph file: bad hyperedge line '" + line + "'");
        }
        Hyperedge e{static_cast<std::uint32_t>(id), parse_hyperedge_kind(kind), decode_key(key), {}};
        std::istringstream list(members);
        std::string tok;
        while (std::getline(list, tok, ',')) {
            try {
                e.members.push_back(static_cast<NodeId>(std::stoul(tok)));
            } catch (const std::exception&) {
                throw FormatError("hypergraph file: bad member '" + tok + "'");
            }
        }
        edges.push_back(std::move(e));
    }
    if (edges.size() != m) throw FormatError("hypergraph file: expected " + std::to_string(m) + " hyperedges");
    return Hypergraph(n, std::move(edges));
}

Hypergraph read_hypergraph(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    return read_hypergraph(in);
}

} // namespace hgfnd
