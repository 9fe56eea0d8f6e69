#include "mpvit/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>

#include "mpvit/errors.hpp"
#include "mpvit/volume.hpp"
#include "rng.hpp"

namespace mpvit {

namespace {

/// Contrast response per channel slot: scale applied to the anatomy around its
/// mean, and signed lesion weight (GRE/SWI/ADC render the lesion dark).
struct ContrastResponse {
  double scale;
  double lesion;
};

constexpr std::array<ContrastResponse, kTotalContrasts> kResponses = {{
    {1.0, 1.0},    // FLAIR
    {-0.8, -0.7},  // ADC
    {0.9, 0.9},    // Trace
    {1.1, 0.8},    // T2w
    {0.7, -0.9},   // GRE
    {0.6, -1.0},   // SWI
    {-0.9, 0.8},   // T1w
}};

using Field = std::vector<double>;

void smooth_axis(Field& f, std::size_t n, int axis, const std::vector<double>& kernel) {
  const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  const std::size_t stride = axis == 0 ? n * n : axis == 1 ? n : 1;
  Field out(f.size());
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t z = 0; z < n; ++z) {
        const std::size_t base = (x * n + y) * n + z;
        const auto pos = static_cast<std::ptrdiff_t>(axis == 0 ? x : axis == 1 ? y : z);
        const std::size_t origin = base - static_cast<std::size_t>(pos) * stride;
        double acc = 0.0;
        for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
          const auto q = std::clamp<std::ptrdiff_t>(pos + t, 0, static_cast<std::ptrdiff_t>(n) - 1);
          acc += kernel[static_cast<std::size_t>(t + radius)] * f[origin + static_cast<std::size_t>(q) * stride];
        }
        out[base] = acc;
      }
  f.swap(out);
}

std::vector<double> gaussian_kernel(double sigma) {
  const auto radius = static_cast<std::size_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double t = static_cast<double>(i) - static_cast<double>(radius);
    k[i] = std::exp(-0.5 * t * t / (sigma * sigma));
    total += k[i];
  }
  for (auto& v : k) v /= total;
  return k;
}

Field anatomy(const SynthSpec& spec, std::mt19937_64& rng) {
  const std::size_t n = spec.ground_truth;
  std::normal_distribution<double> normal(spec.field_mean, spec.field_sigma);
  Field f(n * n * n);
  for (auto& v : f) v = std::clamp(normal(rng), 0.0, 1.0);
  const auto kernel = gaussian_kernel(spec.smoothing);
  for (int axis = 0; axis < 3; ++axis) smooth_axis(f, n, axis, kernel);
  return f;
}

/// Binary ellipsoid mask, longest semi-axis along spec.lesion_axis.
Field lesion_mask(const SynthSpec& spec, std::mt19937_64& rng) {
  const std::size_t n = spec.ground_truth;
  std::uniform_real_distribution<double> axis_len(spec.semi_axis_min, spec.semi_axis_max);
  std::array<double, 3> semi{axis_len(rng), axis_len(rng), axis_len(rng)};
  std::sort(semi.begin(), semi.end(), std::greater<>());
  const auto major = static_cast<std::size_t>(spec.lesion_axis);
  std::array<double, 3> radii{};
  radii[major] = semi[0];
  std::size_t next = 1;
  for (std::size_t a = 0; a < 3; ++a) {
    if (a != major) radii[a] = semi[next++];
  }
  const double margin = std::ceil(spec.semi_axis_max) + 1.0;
  std::uniform_real_distribution<double> centre_d(margin, static_cast<double>(n) - margin);
  const std::array<double, 3> centre{centre_d(rng), centre_d(rng), centre_d(rng)};

  Field m(n * n * n, 0.0);
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t z = 0; z < n; ++z) {
        const double dx = (static_cast<double>(x) + 0.5 - centre[0]) / radii[0];
        const double dy = (static_cast<double>(y) + 0.5 - centre[1]) / radii[1];
        const double dz = (static_cast<double>(z) + 0.5 - centre[2]) / radii[2];
        if (dx * dx + dy * dy + dz * dz <= 1.0) m[(x * n + y) * n + z] = 1.0;
      }
  return m;
}

Tensor<double> acquire(const SynthSpec& spec, const Field& anat, const Field& lesion, std::size_t slot, Plane plane,
                       std::mt19937_64& rng) {
  const std::size_t n = spec.ground_truth;
  const auto& r = kResponses[slot];
  const bool show_lesion = plane == Plane::sagittal || spec.axial_lesion_visible;
  const double lesion_gain = show_lesion ? r.lesion * spec.lesion_intensity : 0.0;
  Tensor<double> truth(Shape{n, n, n});
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t z = 0; z < n; ++z) {
        const std::size_t src = (x * n + y) * n + z;
        // Sagittal stacks are stored with axes (y, x, z).
        const std::size_t dst = plane == Plane::axial ? src : (y * n + x) * n + z;
        const double v = spec.field_mean + r.scale * (anat[src] - spec.field_mean) + lesion_gain * lesion[src];
        truth[dst] = std::clamp(v, 0.0, 1.0);
      }
  const Grid& g = plane == Plane::axial ? spec.axial_grid : spec.sagittal_grid;
  auto out = block_average(truth, Grid{n / g.h, n / g.w, n / g.d});
  if (spec.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (auto& v : out.data()) v += noise(rng);
  }
  return out;
}

std::uint64_t split_key(Split s) { return static_cast<std::uint64_t>(s) + 1; }

}  // namespace

std::string_view axis_name(Axis a) {
  switch (a) {
    case Axis::x:
      return "x";
    case Axis::y:
      return "y";
    case Axis::z:
      return "z";
  }
  return "z";
}

Axis parse_axis(std::string_view name) {
  if (name == "x") return Axis::x;
  if (name == "y") return Axis::y;
  if (name == "z") return Axis::z;
  throw ConfigError("unknown lesion axis '" + std::string(name) + "' (expected x, y or z)");
}

void SynthSpec::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("synth: " + msg); };
  if (ground_truth == 0) fail("ground-truth grid must be positive");
  for (const auto* g : {&axial_grid, &sagittal_grid}) {
    if (g->h == 0 || g->w == 0 || g->d == 0 || ground_truth % g->h || ground_truth % g->w || ground_truth % g->d) {
      fail("storage grid " + grid_string(*g) + " must evenly divide the ground-truth grid");
    }
  }
  if (!(ratio > 0.0) || !std::isfinite(ratio)) fail("ratio must be a positive number of negatives per positive");
  if (!(drop_prob >= 0.0 && drop_prob <= 1.0)) fail("drop probability must lie in [0, 1]");
  if (!(semi_axis_min > 0.0) || !(semi_axis_max >= semi_axis_min)) fail("lesion semi-axes need 0 < min <= max");
  if (2.0 * (std::ceil(semi_axis_max) + 1.0) >= static_cast<double>(ground_truth)) {
    fail("lesion does not fit the ground-truth grid");
  }
  if (!(smoothing > 0.0)) fail("smoothing must be positive");
  if (!(field_sigma >= 0.0) || !(noise_sigma >= 0.0)) fail("sigmas must be non-negative");
  if (!std::isfinite(field_mean) || !std::isfinite(lesion_intensity)) fail("non-finite intensity parameter");
}

std::size_t positive_count(std::size_t n, double ratio) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) / (1.0 + ratio)));
}

std::vector<int> synth_labels(const SynthSpec& spec, std::uint64_t seed, Split split, std::size_t n) {
  std::vector<int> labels(n, 0);
  std::fill_n(labels.begin(), positive_count(n, spec.ratio), 1);
  auto rng = detail::keyed_rng({seed, split_key(split), detail::fnv1a("labels")});
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

std::string subject_id(Split split, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%05zu", index);
  return std::string(split_name(split)) + buf;
}

SynthSubject synth_subject(const SynthSpec& spec, std::uint64_t seed, Split split, std::size_t index, int label) {
  spec.validate();
  auto rng = detail::keyed_rng({seed, split_key(split), index});
  SynthSubject s;
  s.id = subject_id(split, index);
  s.label = label;
  s.split = split;

  // Draw order is fixed so that the label only changes the lesion, never the
  // anatomy or the acquisition pattern.
  const Field lesion = lesion_mask(spec, rng);
  const Field anat = anatomy(spec, rng);
  std::bernoulli_distribution drop(spec.drop_prob);
  std::array<bool, kTotalContrasts> acquired{};
  for (std::size_t c = 0; c < kTotalContrasts; ++c) {
    const bool dropped = drop(rng);
    acquired[c] = c < kRequiredAxialContrasts || !dropped;
  }
  const Field none(lesion.size(), 0.0);
  for (std::size_t c = 0; c < kTotalContrasts; ++c) {
    const Plane plane = c < kAxialContrasts.size() ? Plane::axial : Plane::sagittal;
    auto vol = acquire(spec, anat, label ? lesion : none, c, plane, rng);
    if (acquired[c]) s.channels[c] = std::move(vol);
  }
  return s;
}

Manifest synth_generate(const SynthSpec& spec, std::uint64_t seed, const SplitCounts& counts,
                        const std::filesystem::path& out_dir) {
  spec.validate();
  if (counts.train == 0 || counts.val == 0 || counts.test == 0) throw ConfigError("synth: split counts must be positive");
  Manifest manifest;
  for (Split split : {Split::train, Split::val, Split::test}) {
    const auto labels = synth_labels(spec, seed, split, counts.of(split));
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto subject = synth_subject(spec, seed, split, i, labels[i]);
      ManifestRecord rec;
      rec.id = subject.id;
      rec.label = subject.label;
      rec.split = split;
      for (std::size_t c = 0; c < kTotalContrasts; ++c) {
        if (!subject.channels[c]) {
          rec.paths[c] = std::string(kMissingPath);
          continue;
        }
        const std::string contrast(c < kAxialContrasts.size() ? kAxialContrasts[c]
                                                               : kSagittalContrasts[c - kAxialContrasts.size()]);
        const std::string rel = "volumes/" + subject.id + "_" + contrast + ".mpvv";
        write_volume(out_dir / rel, contrast, *subject.channels[c]);
        rec.paths[c] = rel;
      }
      manifest.records.push_back(std::move(rec));
    }
  }
  write_manifest(out_dir / "manifest.tsv", manifest);
  return manifest;
}

template <typename T>
Dataset<T> synth_in_memory(const SynthSpec& spec, std::uint64_t seed, Split split, std::size_t n,
                           const ModelConfig& config) {
  spec.validate();
  const auto labels = synth_labels(spec, seed, split, n);
  Dataset<T> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto subject = synth_subject(spec, seed, split, i, labels[i]);
    out.push_back(assemble_sample<T>(subject.id, subject.label, subject.channels, config));
  }
  return out;
}

template Dataset<float> synth_in_memory(const SynthSpec&, std::uint64_t, Split, std::size_t, const ModelConfig&);
template Dataset<double> synth_in_memory(const SynthSpec&, std::uint64_t, Split, std::size_t, const ModelConfig&);

}  // namespace mpvit
