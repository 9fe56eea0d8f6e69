#pragma once

#include <span>
#include <string>
#include <vector>

#include "mpvit/config.hpp"
#include "mpvit/tensor.hpp"

namespace mpvit {

/// Per-branch binary presence masks over the contrast slots, in the channel
/// order of kAxialContrasts / kSagittalContrasts. 1 = acquired, 0 = missing.
struct ModalityIndicator {
  std::vector<int> axial;
  std::vector<int> sagittal;

  const std::vector<int>& mask(Plane p) const { return p == Plane::axial ? axial : sagittal; }
  std::vector<int>& mask(Plane p) { return p == Plane::axial ? axial : sagittal; }

  static ModalityIndicator all_present(const ModelConfig& config);
  bool operator==(const ModalityIndicator&) const = default;
};

/// Throws ValueError unless `mask` has `expected` entries, all 0 or 1.
void validate_mask(std::span<const int> mask, std::size_t expected);

/// One subject: channel-last volumes [H, W, D, C] per plane, already on the
/// model grid and intensity-normalized.
template <typename T>
struct VolumeSample {
  std::string id;
  Tensor<T> axial;
  Tensor<T> sagittal;
  ModalityIndicator indicator;
  int label = 0;

  const Tensor<T>& volume(Plane p) const { return p == Plane::axial ? axial : sagittal; }
};

template <typename T>
using Dataset = std::vector<VolumeSample<T>>;

template <typename U, typename T>
VolumeSample<U> cast_sample(const VolumeSample<T>& s) {
  return VolumeSample<U>{s.id, s.axial.template cast<U>(), s.sagittal.template cast<U>(), s.indicator, s.label};
}

template <typename U, typename T>
Dataset<U> cast_dataset(const Dataset<T>& d) {
  Dataset<U> out;
  out.reserve(d.size());
  for (const auto& s : d) out.push_back(cast_sample<U>(s));
  return out;
}

std::vector<int> labels_of(const auto& dataset) {
  std::vector<int> labels;
  labels.reserve(dataset.size());
  for (const auto& s : dataset) labels.push_back(s.label);
  return labels;
}

}  // namespace mpvit
