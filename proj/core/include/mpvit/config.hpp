#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mpvit {

/// Voxel extents of a volume grid, (H, W, D).
struct Grid {
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t d = 0;

  std::size_t voxels() const { return h * w * d; }
  bool operator==(const Grid&) const = default;
};

std::string grid_string(const Grid& g);

enum class Plane { axial, sagittal };

std::string_view plane_name(Plane p);

/// Contrast order of the axial stack. The first three are always acquired.
inline constexpr std::array<std::string_view, 6> kAxialContrasts = {"FLAIR", "ADC", "Trace", "T2w", "GRE", "SWI"};
inline constexpr std::size_t kRequiredAxialContrasts = 3;
inline constexpr std::array<std::string_view, 1> kSagittalContrasts = {"T1w"};
inline constexpr std::size_t kTotalContrasts = kAxialContrasts.size() + kSagittalContrasts.size();

struct ModelConfig {
  std::string name = "desk-tiny";
  Grid axial_grid{32, 32, 16};
  Grid sagittal_grid{32, 16, 32};
  std::size_t patch = 8;
  std::size_t axial_channels = kAxialContrasts.size();
  std::size_t sagittal_channels = kSagittalContrasts.size();
  std::size_t embed_dim = 192;
  std::size_t num_heads = 3;
  std::size_t depth = 4;
  double mlp_ratio = 4.0;
  std::size_t num_classes = 2;
  /// Heads of the plane-fusion attention; 0 means `num_heads`.
  std::size_t fusion_heads = 0;
  /// Modality-indicator cross-attention before each head. Off reproduces the
  /// "without vector" ablation, where the head reads the fused CLS token.
  bool modality_vector = true;
  /// Off builds a single-branch axial model (no sagittal encoder, no fusion).
  bool multi_plane = true;
  double layer_norm_eps = 1e-6;
  /// Reserved; no dropout is applied anywhere.
  double dropout = 0.0;

  /// Throws ConfigError on any violated invariant.
  void validate() const;

  const Grid& grid(Plane p) const { return p == Plane::axial ? axial_grid : sagittal_grid; }
  std::size_t channels(Plane p) const { return p == Plane::axial ? axial_channels : sagittal_channels; }
  /// Patch count N = H·W·D / P³.
  std::size_t patch_count(Plane p) const;
  /// Token sequence length N + 1 (CLS prepended).
  std::size_t sequence_length(Plane p) const { return patch_count(p) + 1; }
  /// Flattened patch width P³·C.
  std::size_t patch_dim(Plane p) const;
  std::size_t mlp_hidden() const;
  std::size_t effective_fusion_heads() const { return fusion_heads == 0 ? num_heads : fusion_heads; }
  std::vector<Plane> planes() const;
};

/// Presets: "tiny", "small", "base" (full-size grids, P=16, depth 12) and
/// "desk-tiny" (32×32×16 / 32×16×32, P=8, depth 4). Throws ConfigError on an
/// unknown name.
ModelConfig preset(std::string_view name);
std::vector<std::string> preset_names();

}  // namespace mpvit
