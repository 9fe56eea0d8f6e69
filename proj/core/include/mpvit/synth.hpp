#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mpvit/config.hpp"
#include "mpvit/dataset.hpp"
#include "mpvit/manifest.hpp"
#include "mpvit/sample.hpp"

namespace mpvit {

enum class Axis { x, y, z };

std::string_view axis_name(Axis a);
/// "x", "y" or "z"; anything else is a ConfigError.
Axis parse_axis(std::string_view name);

/// Generator parameters. Ground truth lives on an isotropic `ground_truth`³
/// grid indexed (x, y, z); axial stacks are stored (x, y, z) and sagittal
/// stacks (y, x, z), each block-averaged down to its storage grid.
struct SynthSpec {
  std::size_t ground_truth = 64;
  Grid axial_grid{32, 32, 16};
  Grid sagittal_grid{32, 16, 32};
  /// Background: i.i.d. normal(field_mean, field_sigma) voxels clipped to
  /// [0, 1], then Gaussian-smoothed with standard deviation `smoothing` voxels.
  double field_mean = 0.5;
  double field_sigma = 0.1;
  double smoothing = 2.0;
  double lesion_intensity = 0.3;
  double semi_axis_min = 3.0;
  double semi_axis_max = 8.0;
  /// Direction of the lesion's longest semi-axis.
  Axis lesion_axis = Axis::z;
  /// Independent drop probability of each optional contrast.
  double drop_prob = 0.3;
  /// Negatives per positive; each split holds floor(n / (1 + ratio)) positives.
  double ratio = 13.0;
  /// Acquisition noise added after downsampling.
  double noise_sigma = 0.02;
  /// False removes the lesion from every axial contrast, leaving it visible
  /// only in the sagittal stack.
  bool axial_lesion_visible = true;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct SplitCounts {
  std::size_t train = 512;
  std::size_t val = 128;
  std::size_t test = 128;

  std::size_t of(Split s) const { return s == Split::train ? train : s == Split::val ? val : test; }
};

/// Number of positives in a split of `n` samples.
std::size_t positive_count(std::size_t n, double ratio);

/// Deterministic label order of one split.
std::vector<int> synth_labels(const SynthSpec& spec, std::uint64_t seed, Split split, std::size_t n);

/// One generated subject before preprocessing.
struct SynthSubject {
  std::string id;
  int label = 0;
  Split split = Split::train;
  /// Stored-grid volumes in manifest order; dropped contrasts are empty.
  ChannelVolumes channels;
};

std::string subject_id(Split split, std::size_t index);

SynthSubject synth_subject(const SynthSpec& spec, std::uint64_t seed, Split split, std::size_t index, int label);

/// Writes out/volumes/<id>_<contrast>.mpvv for every acquired contrast and
/// out/manifest.tsv (relative paths). Returns the manifest.
Manifest synth_generate(const SynthSpec& spec, std::uint64_t seed, const SplitCounts& counts,
                        const std::filesystem::path& out_dir);

/// Same subjects as synth_generate, preprocessed for `config` without
/// touching the filesystem.
template <typename T>
Dataset<T> synth_in_memory(const SynthSpec& spec, std::uint64_t seed, Split split, std::size_t n,
                           const ModelConfig& config);

}  // namespace mpvit
