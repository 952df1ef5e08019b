#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>

namespace hgfnd {

/// Dense row-major float32 matrix, the in-memory form of every feature file.
using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Four magic bytes that open every feature-matrix file.
inline constexpr char kMatrixMagic[4] = {'H', 'G', 'F', 'D'};

// Layout: "HGFD" | u32 rows | u32 cols | rows*cols IEEE-754 float32, all little-endian.
FeatureMatrix read_matrix(std::istream& in);
FeatureMatrix read_matrix(const std::filesystem::path& path);
void write_matrix(std::ostream& out, const FeatureMatrix& m);
void write_matrix(const std::filesystem::path& path, const FeatureMatrix& m);

} // namespace hgfnd
