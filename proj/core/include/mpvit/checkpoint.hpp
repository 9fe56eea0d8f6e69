#pragma once

#include <cstdint>
#include <filesystem>

#include "mpvit/config.hpp"
#include "mpvit/parameters.hpp"

namespace mpvit {

struct CheckpointInfo {
  /// Validation AUC that selected this checkpoint; negative when unevaluated.
  double val_auc = -1.0;
  /// Epoch after which it was written; 0 for the initial parameters.
  std::int64_t epoch = 0;
};

struct Checkpoint {
  ModelConfig config;
  ParameterSet<double> params;
  CheckpointInfo info;
};

/// Writes an "MPVT" container holding the parameters plus "meta/..." records
/// describing the config and selection info. Records are sorted by path.
template <typename T>
void save_checkpoint(const std::filesystem::path& file, const ModelConfig& config, const ParameterSet<T>& params,
                     const CheckpointInfo& info = {});

/// Throws FormatError if the file is not a checkpoint or its parameters do
/// not match the layout implied by its stored config.
Checkpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace mpvit
