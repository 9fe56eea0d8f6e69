#include "mpvit/dataset.hpp"

#include "mpvit/errors.hpp"
#include "mpvit/volume.hpp"

namespace mpvit {

namespace {

template <typename T>
void place_channel(Tensor<T>& stack, std::size_t channel, const Tensor<double>& volume) {
  const std::size_t C = stack.dim(3);
  for (std::size_t i = 0; i < volume.numel(); ++i) stack[i * C + channel] = static_cast<T>(volume[i]);
}

}  // namespace

template <typename T>
VolumeSample<T> assemble_sample(std::string id, int label, const ChannelVolumes& channels, const ModelConfig& config) {
  if (label != 0 && label != 1) throw DataError("sample " + id + ": label must be 0 or 1");
  VolumeSample<T> s;
  s.id = std::move(id);
  s.label = label;
  std::size_t slot = 0;
  for (Plane plane : {Plane::axial, Plane::sagittal}) {
    const std::size_t count = plane == Plane::axial ? kAxialContrasts.size() : kSagittalContrasts.size();
    const bool used = plane == Plane::axial || config.multi_plane;
    if (used && config.channels(plane) != count) {
      throw ConfigError("model expects " + std::to_string(config.channels(plane)) + " " +
                        std::string(plane_name(plane)) + " channels, data provides " + std::to_string(count));
    }
    if (!used) {
      slot += count;
      continue;
    }
    const Grid& grid = config.grid(plane);
    Tensor<T> stack(Shape{grid.h, grid.w, grid.d, count});
    auto& mask = s.indicator.mask(plane);
    mask.assign(count, 0);
    for (std::size_t c = 0; c < count; ++c, ++slot) {
      if (!channels[slot]) continue;
      place_channel(stack, c, normalize(resample(*channels[slot], grid)));
      mask[c] = 1;
    }
    (plane == Plane::axial ? s.axial : s.sagittal) = std::move(stack);
  }
  return s;
}

template <typename T>
void check_sample(const VolumeSample<T>& sample, const ModelConfig& config) {
  for (Plane plane : config.planes()) {
    const auto& vol = sample.volume(plane);
    const auto& mask = sample.indicator.mask(plane);
    validate_mask(mask, config.channels(plane));
    const std::size_t C = vol.dim(3);
    for (std::size_t i = 0; i < vol.numel(); ++i) {
      const T v = vol[i];
      if (!(v >= T{0} && v <= T{1})) {
        throw DataError("sample " + sample.id + ": " + std::string(plane_name(plane)) + " intensity outside [0, 1]");
      }
      if (mask[i % C] == 0 && v != T{0}) {
        throw DataError("sample " + sample.id + ": missing " + std::string(plane_name(plane)) +
                        " channel is not zero-filled");
      }
    }
  }
}

template <typename T>
VolumeSample<T> load_sample(const ManifestRecord& record, const std::filesystem::path& base_dir,
                            const ModelConfig& config) {
  ChannelVolumes channels;
  for (std::size_t c = 0; c < kTotalContrasts; ++c) {
    const auto& p = record.paths[c];
    if (p == kMissingPath) continue;
    if (!config.multi_plane && c >= kAxialContrasts.size()) continue;
    const auto full = std::filesystem::path(p).is_absolute() ? std::filesystem::path(p) : base_dir / p;
    channels[c] = read_volume(full);
  }
  auto sample = assemble_sample<T>(record.id, record.label, channels, config);
  check_sample(sample, config);
  return sample;
}

template <typename T>
Dataset<T> load_split(const Manifest& manifest, const std::filesystem::path& base_dir, Split split,
                      const ModelConfig& config) {
  Dataset<T> out;
  for (const auto* r : manifest.split(split)) out.push_back(load_sample<T>(*r, base_dir, config));
  return out;
}

#define MPVIT_INSTANTIATE_DATASET(T)                                                                            \
  template VolumeSample<T> assemble_sample(std::string, int, const ChannelVolumes&, const ModelConfig&);        \
  template void check_sample(const VolumeSample<T>&, const ModelConfig&);                                       \
  template VolumeSample<T> load_sample(const ManifestRecord&, const std::filesystem::path&, const ModelConfig&); \
  template Dataset<T> load_split(const Manifest&, const std::filesystem::path&, Split, const ModelConfig&);

MPVIT_INSTANTIATE_DATASET(float)
MPVIT_INSTANTIATE_DATASET(double)
#undef MPVIT_INSTANTIATE_DATASET

}  // namespace mpvit
