#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>

#include "mpvit/config.hpp"
#include "mpvit/manifest.hpp"
#include "mpvit/sample.hpp"
#include "mpvit/tensor.hpp"

namespace mpvit {

/// Raw per-contrast volumes in manifest order; std::nullopt marks a missing contrast.
using ChannelVolumes = std::array<std::optional<Tensor<double>>, kTotalContrasts>;

/// Preprocessing: each present contrast is resampled onto its branch grid and
/// then normalized to [0, 1]; missing contrasts become all-zero channels with
/// indicator bit 0. Sagittal contrasts are skipped for single-plane configs.
template <typename T>
VolumeSample<T> assemble_sample(std::string id, int label, const ChannelVolumes& channels, const ModelConfig& config);

/// Throws DataError if intensities leave [0, 1] or a channel flagged missing
/// is not all zero.
template <typename T>
void check_sample(const VolumeSample<T>& sample, const ModelConfig& config);

template <typename T>
VolumeSample<T> load_sample(const ManifestRecord& record, const std::filesystem::path& base_dir,
                            const ModelConfig& config);

/// All records of one split, in manifest order, preprocessed for `config`.
template <typename T>
Dataset<T> load_split(const Manifest& manifest, const std::filesystem::path& base_dir, Split split,
                      const ModelConfig& config);

}  // namespace mpvit
