#include "hgfnd/dataset_io.hpp"

#include "hgfnd/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace hgfnd {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Minimal CSV: comma separated, double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out.push_back('"');
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

template <typename Int>
Int parse_int(const std::string& s, const std::string& what) {
    Int v{};
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end) {
        throw FormatError(what + ": not an integer: '" + s + "'");
    }
    return v;
}

/// Rows of a CSV file with the header line (first field == "news_id") skipped.
std::vector<std::vector<std::string>> read_csv(const fs::path& path, std::size_t n_fields) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv_line(line);
        if (first && !fields.empty() && fields[0] == "news_id") {
            first = false;
            continue;
        }
        first = false;
        if (fields.size() != n_fields) {
            throw FormatError(path.filename().string() + ": expected " + std::to_string(n_fields) +
                              " fields in line '" + line + "'");
        }
        rows.push_back(std::move(fields));
    }
    return rows;
}

NodeId checked_id(const std::string& field, std::size_t n, const std::string& what) {
    const auto id = parse_int<std::uint64_t>(field, what);
    if (id >= n) {
        throw IntegrityError(what + " references unknown news id " + field);
    }
    return static_cast<NodeId>(id);
}

} // namespace

DatasetPaths DatasetPaths::in_directory(const fs::path& dir) {
    return DatasetPaths{dir / "news_features.bin", dir / "trees.jsonl",  dir / "tree_features.bin",
                        dir / "tree_manifest.csv", dir / "labels.csv",  dir / "splits.csv",
                        dir / "entities.csv"};
}

std::vector<std::pair<NodeId, std::string>> read_id_text_csv(const fs::path& path) {
    std::vector<std::pair<NodeId, std::string>> out;
    for (auto& row : read_csv(path, 2)) {
        out.emplace_back(parse_int<NodeId>(row[0], path.filename().string()), std::move(row[1]));
    }
    return out;
}

Dataset load_dataset(const DatasetPaths& paths) {
    Dataset d;
    d.news_features = read_matrix(paths.features);
    const std::size_t n = static_cast<std::size_t>(d.news_features.rows());
    d.feature_dim = static_cast<std::size_t>(d.news_features.cols());
    d.items.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.items[i].id = static_cast<NodeId>(i);
        d.items[i].source_id = static_cast<NodeId>(i);
    }

    // Tree node features are addressed through the manifest.
    const FeatureMatrix tree_features = read_matrix(paths.tree_features);
    if (tree_features.rows() > 0 && static_cast<std::size_t>(tree_features.cols()) != d.feature_dim) {
        throw FormatError("tree feature width differs from news feature width");
    }
    std::map<std::pair<NodeId, std::uint32_t>, std::uint32_t> manifest;
    for (const auto& row : read_csv(paths.tree_manifest, 3)) {
        const NodeId news = checked_id(row[0], n, "tree manifest");
        const auto idx = parse_int<std::uint32_t>(row[1], "tree manifest idx");
        const auto r = parse_int<std::uint32_t>(row[2], "tree manifest row");
        if (r >= tree_features.rows()) {
            throw IntegrityError("tree manifest row " + row[2] + " is outside tree_features.bin");
        }
        if (!manifest.emplace(std::make_pair(news, idx), r).second) {
            throw IntegrityError("duplicate tree manifest entry for (" + row[0] + ", " + row[1] + ")");
        }
    }

    std::vector<std::optional<PropagationTree>> trees(n);
    {
        std::ifstream in(paths.trees);
        if (!in) throw FormatError("cannot open " + paths.trees.string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            json rec;
            try {
                rec = json::parse(line);
            } catch (const json::exception& e) {
                throw FormatError("trees line " + std::to_string(line_no) + ": " + e.what());
            }
            try {
                const auto news = rec.at("news_id").get<std::int64_t>();
                if (news < 0 || static_cast<std::size_t>(news) >= n) {
                    throw IntegrityError("tree references unknown news id " + std::to_string(news));
                }
                PropagationTree tree;
                tree.news_id = static_cast<NodeId>(news);
                const auto& nodes = rec.at("nodes");
                tree.nodes.resize(nodes.size());
                std::vector<char> seen(nodes.size(), 0);
                for (const auto& node : nodes) {
                    const auto idx = node.at("idx").get<std::size_t>();
                    if (idx >= nodes.size() || seen[idx]) {
                        throw FormatError("tree of news " + std::to_string(news) + ": node indices must be 0..n-1");
                    }
                    seen[idx] = 1;
                    tree.nodes[idx] = Engagement{node.at("user").get<std::string>(), node.at("ts").get<std::int64_t>()};
                }
                for (const auto& e : rec.at("edges")) {
                    tree.edges.emplace_back(e.at(0).get<std::uint32_t>(), e.at(1).get<std::uint32_t>());
                }
                tree.features.resize(static_cast<Eigen::Index>(tree.nodes.size()),
                                     static_cast<Eigen::Index>(d.feature_dim));
                for (std::uint32_t idx = 0; idx < tree.nodes.size(); ++idx) {
                    auto it = manifest.find({tree.news_id, idx});
                    if (it == manifest.end()) {
                        throw IntegrityError("no feature row for node " + std::to_string(idx) + " of news " +
                                             std::to_string(news));
                    }
                    tree.features.row(idx) = tree_features.row(it->second);
                }
                if (trees[tree.news_id]) {
                    throw IntegrityError("news " + std::to_string(news) + " has two trees");
                }
                trees[tree.news_id] = std::move(tree);
            } catch (const json::exception& e) {
                throw FormatError("trees line " + std::to_string(line_no) + ": " + e.what());
            }
        }
    }
    d.trees.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!trees[i]) {
            throw IntegrityError("news " + std::to_string(i) + " has no propagation tree");
        }
        d.trees.push_back(std::move(*trees[i]));
    }

    for (const auto& row : read_csv(paths.labels, 2)) {
        const NodeId id = checked_id(row[0], n, "labels");
        const int label = parse_int<int>(row[1], "label");
        if (label != kFake && label != kTrue) {
            throw ValidationError("label of news " + row[0] + " must be 0 or 1");
        }
        d.items[id].label = label;
    }

    for (const auto& row : read_csv(paths.splits, 2)) {
        const NodeId id = checked_id(row[0], n, "splits");
        if (row[1] == "train") {
            d.splits.train.push_back(id);
        } else if (row[1] == "val") {
            d.splits.val.push_back(id);
        } else if (row[1] == "test") {
            d.splits.test.push_back(id);
        } else {
            throw FormatError("unknown split name '" + row[1] + "'");
        }
    }
    for (auto* s : {&d.splits.train, &d.splits.val, &d.splits.test}) std::sort(s->begin(), s->end());

    if (!paths.entities.empty() && fs::exists(paths.entities)) {
        for (auto& row : read_csv(paths.entities, 2)) {
            d.items[checked_id(row[0], n, "entities")].entities.push_back(std::move(row[1]));
        }
    }

    d.validate();
    return d;
}

Dataset load_dataset(const fs::path& features_path, const fs::path& trees_path, const fs::path& labels_path,
                     const fs::path& splits_path) {
    auto paths = DatasetPaths::in_directory(trees_path.parent_path());
    paths.features = features_path;
    paths.trees = trees_path;
    paths.labels = labels_path;
    paths.splits = splits_path;
    return load_dataset(paths);
}

Dataset load_dataset_dir(const fs::path& dir) { return load_dataset(DatasetPaths::in_directory(dir)); }

void write_dataset(const Dataset& d, const fs::path& dir) {
    fs::create_directories(dir);
    const auto paths = DatasetPaths::in_directory(dir);
    write_matrix(paths.features, d.news_features);

    std::size_t total_nodes = 0;
    for (const auto& t : d.trees) total_nodes += t.size();
    FeatureMatrix tree_features(static_cast<Eigen::Index>(total_nodes), static_cast<Eigen::Index>(d.feature_dim));
    std::ofstream trees(paths.trees, std::ios::trunc);
    std::ofstream manifest(paths.tree_manifest, std::ios::trunc);
    manifest << "news_id,idx,row\n";
    std::size_t row = 0;
    for (const auto& t : d.trees) {
        json rec;
        rec["news_id"] = t.news_id;
        json nodes = json::array();
        for (std::size_t i = 0; i < t.size(); ++i) {
            nodes.push_back({{"idx", i}, {"user", t.nodes[i].user}, {"ts", t.nodes[i].timestamp}});
            manifest << t.news_id << ',' << i << ',' << row << '\n';
            tree_features.row(static_cast<Eigen::Index>(row++)) = t.features.row(static_cast<Eigen::Index>(i));
        }
        rec["nodes"] = std::move(nodes);
        json edges = json::array();
        for (const auto& [p, c] : t.edges) edges.push_back({p, c});
        rec["edges"] = std::move(edges);
        trees << rec.dump() << '\n';
    }
    write_matrix(paths.tree_features, tree_features);

    std::ofstream labels(paths.labels, std::ios::trunc);
    labels << "news_id,label\n";
    for (const auto& item : d.items) {
        if (item.label) labels << item.id << ',' << *item.label << '\n';
    }

    std::ofstream splits(paths.splits, std::ios::trunc);
    splits << "news_id,split\n";
    for (NodeId id : d.splits.train) splits << id << ",train\n";
    for (NodeId id : d.splits.val) splits << id << ",val\n";
    for (NodeId id : d.splits.test) splits << id << ",test\n";

    std::ofstream entities(paths.entities, std::ios::trunc);
    entities << "news_id,entity\n";
    for (const auto& item : d.items) {
        for (const auto& e : item.entities) entities << item.id << ',' << csv_field(e) << '\n';
    }
}

} // namespace hgfnd
