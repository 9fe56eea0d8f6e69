#include "mpvit/config.hpp"

#include <cmath>

#include "mpvit/errors.hpp"

namespace mpvit {

std::string grid_string(const Grid& g) {
  return std::to_string(g.h) + "x" + std::to_string(g.w) + "x" + std::to_string(g.d);
}

std::string_view plane_name(Plane p) { return p == Plane::axial ? "axial" : "sagittal"; }

namespace {

void check_grid(const Grid& g, std::size_t patch, std::string_view plane) {
  const std::array<std::pair<const char*, std::size_t>, 3> axes{{{"H", g.h}, {"W", g.w}, {"D", g.d}}};
  for (const auto& [axis, extent] : axes) {
    if (extent == 0) throw ConfigError(std::string(plane) + " grid axis " + axis + " is zero");
    if (extent % patch != 0) {
      throw ConfigError(std::string(plane) + " grid axis " + axis + " (" + std::to_string(extent) +
                        ") is not divisible by patch size " + std::to_string(patch));
    }
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (patch == 0) throw ConfigError("patch size must be positive");
  check_grid(axial_grid, patch, "axial");
  if (multi_plane) check_grid(sagittal_grid, patch, "sagittal");
  if (axial_channels == 0 || (multi_plane && sagittal_channels == 0)) {
    throw ConfigError("every branch needs at least one channel");
  }
  if (embed_dim == 0 || num_heads == 0) throw ConfigError("embed_dim and num_heads must be positive");
  if (embed_dim % num_heads != 0) {
    throw ConfigError("embed_dim " + std::to_string(embed_dim) + " is not divisible by num_heads " +
                      std::to_string(num_heads));
  }
  if (embed_dim % effective_fusion_heads() != 0) {
    throw ConfigError("embed_dim is not divisible by fusion_heads " + std::to_string(effective_fusion_heads()));
  }
  if (!(mlp_ratio > 0.0) || mlp_hidden() == 0) throw ConfigError("mlp_ratio must give a positive hidden width");
  if (num_classes != 2) throw ConfigError("only binary classification (num_classes = 2) is supported");
  if (!(layer_norm_eps > 0.0)) throw ConfigError("layer_norm_eps must be positive");
  if (dropout != 0.0) throw ConfigError("dropout is not supported; leave it at 0");
}

std::size_t ModelConfig::patch_count(Plane p) const {
  const std::size_t cube = patch * patch * patch;
  return grid(p).voxels() / cube;
}

std::size_t ModelConfig::patch_dim(Plane p) const { return patch * patch * patch * channels(p); }

std::size_t ModelConfig::mlp_hidden() const {
  return static_cast<std::size_t>(std::lround(mlp_ratio * static_cast<double>(embed_dim)));
}

std::vector<Plane> ModelConfig::planes() const {
  if (multi_plane) return {Plane::axial, Plane::sagittal};
  return {Plane::axial};
}

ModelConfig preset(std::string_view name) {
  ModelConfig c;
  c.name = std::string(name);
  if (name == "desk-tiny") {
    return c;
  }
  c.axial_grid = {256, 256, 32};
  c.sagittal_grid = {256, 32, 256};
  c.patch = 16;
  c.depth = 12;
  if (name == "tiny") {
    c.embed_dim = 192;
    c.num_heads = 3;
  } else if (name == "small") {
    c.embed_dim = 384;
    c.num_heads = 6;
  } else if (name == "base") {
    c.embed_dim = 768;
    c.num_heads = 12;
  } else {
    throw ConfigError("unknown variant '" + std::string(name) + "' (expected one of tiny, small, base, desk-tiny)");
  }
  return c;
}

std::vector<std::string> preset_names() { return {"tiny", "small", "base", "desk-tiny"}; }

}  // namespace mpvit
