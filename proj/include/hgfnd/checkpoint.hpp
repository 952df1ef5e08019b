#pragma once

#include "hgfnd/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>

namespace hgfnd {

// Layout (all integers u32 little-endian):
//   "HGCK" version precision_bytes tensor_count
//   per tensor: name_length name rank dims[rank] payload (little-endian, precision_bytes each)
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename Real>
void save_checkpoint(std::ostream& out, const ModelParams<Real>& params);
template <typename Real>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<Real>& params);

/// Precision stored in a checkpoint header.
Precision checkpoint_precision(const std::filesystem::path& path);

/// Loads a checkpoint stored at precision Real. With `expected` set, dimensions
/// that differ raise ShapeError. Corrupt or truncated input raises FormatError.
template <typename Real>
ModelParams<Real> load_checkpoint(std::istream& in, const std::optional<ModelDims>& expected = std::nullopt);
template <typename Real>
ModelParams<Real> load_checkpoint(const std::filesystem::path& path,
                                  const std::optional<ModelDims>& expected = std::nullopt);

} // namespace hgfnd
