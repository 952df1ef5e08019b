#pragma once

#include "hgfnd/dataset.hpp"

#include <filesystem>

namespace hgfnd {

/// File names inside a dataset directory.
///
///   news_features.bin   HGFD matrix, N x F
///   trees.jsonl         one {news_id, nodes:[{idx,user,ts}], edges:[[p,c]]} per line
///   tree_features.bin   HGFD matrix holding every tree node's feature row
///   tree_manifest.csv   news_id,idx,row  (row of tree_features.bin for each tree node)
///   labels.csv          news_id,label
///   splits.csv          news_id,split   (train | val | test)
///   entities.csv        news_id,entity  (optional)
struct DatasetPaths {
    std::filesystem::path features;
    std::filesystem::path trees;
    std::filesystem::path tree_features;
    std::filesystem::path tree_manifest;
    std::filesystem::path labels;
    std::filesystem::path splits;
    std::filesystem::path entities;

    static DatasetPaths in_directory(const std::filesystem::path& dir);
};

/// Loads a dataset. Tree features, the manifest and the optional entities file
/// are read from the directory that holds `trees_path`.
Dataset load_dataset(const std::filesystem::path& features_path, const std::filesystem::path& trees_path,
                     const std::filesystem::path& labels_path, const std::filesystem::path& splits_path);
Dataset load_dataset(const DatasetPaths& paths);
Dataset load_dataset_dir(const std::filesystem::path& dir);

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Reads `news_id,<text>` rows (used for entity and free-text side files).
std::vector<std::pair<NodeId, std::string>> read_id_text_csv(const std::filesystem::path& path);

} // namespace hgfnd
