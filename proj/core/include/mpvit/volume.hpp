#pragma once

#include <filesystem>
#include <string>

#include "mpvit/config.hpp"
#include "mpvit/tensor.hpp"

namespace mpvit {

/// Trilinear resize of a single-channel volume [H, W, D] using the
/// align-corners-false convention: output voxel centre i maps to source
/// coordinate (i + 0.5)·in/out − 0.5, clamped to the valid range. Returns an
/// exact copy when the target equals the source grid.
template <typename T>
Tensor<T> resample(const Tensor<T>& volume, const Grid& target);

/// Linear map of intensities onto [0, 1]; a constant volume maps to zeros.
template <typename T>
Tensor<T> normalize(const Tensor<T>& volume);

/// Mean over non-overlapping blocks (factors must divide the extents). Used to
/// simulate thick-slice acquisition.
template <typename T>
Tensor<T> block_average(const Tensor<T>& volume, const Grid& factors);

/// One-channel volume file: an "MPVV" record container with a single record
/// named after the contrast.
void write_volume(const std::filesystem::path& file, const std::string& contrast, const Tensor<double>& volume);
Tensor<double> read_volume(const std::filesystem::path& file);

}  // namespace mpvit
