#include "mpvit/volume.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "mpvit/container.hpp"
#include "mpvit/errors.hpp"

namespace mpvit {

namespace {

void require_volume(const Shape& shape, const char* op) {
  if (shape.size() != 3) throw DimensionError(std::string(op) + " expects a [H, W, D] volume, got " + shape_string(shape));
}

struct Taps {
  std::size_t lo;
  std::size_t hi;
  double w_hi;
};

std::vector<Taps> linear_taps(std::size_t in, std::size_t out) {
  std::vector<Taps> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[i] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> resample(const Tensor<T>& volume, const Grid& target) {
  require_volume(volume.shape(), "resample");
  if (target.h == 0 || target.w == 0 || target.d == 0) {
    throw DimensionError("resample: target grid " + grid_string(target) + " has a zero dimension");
  }
  const auto& s = volume.shape();
  if (s[0] == target.h && s[1] == target.w && s[2] == target.d) return volume;

  const auto tx = linear_taps(s[0], target.h);
  const auto ty = linear_taps(s[1], target.w);
  const auto tz = linear_taps(s[2], target.d);
  const std::size_t W = s[1], D = s[2];
  auto at = [&](std::size_t x, std::size_t y, std::size_t z) {
    return static_cast<double>(volume[(x * W + y) * D + z]);
  };

  Tensor<T> out(Shape{target.h, target.w, target.d});
  for (std::size_t i = 0; i < target.h; ++i) {
    const auto& a = tx[i];
    for (std::size_t j = 0; j < target.w; ++j) {
      const auto& b = ty[j];
      for (std::size_t k = 0; k < target.d; ++k) {
        const auto& c = tz[k];
        const double c00 = at(a.lo, b.lo, c.lo) * (1 - c.w_hi) + at(a.lo, b.lo, c.hi) * c.w_hi;
        const double c01 = at(a.lo, b.hi, c.lo) * (1 - c.w_hi) + at(a.lo, b.hi, c.hi) * c.w_hi;
        const double c10 = at(a.hi, b.lo, c.lo) * (1 - c.w_hi) + at(a.hi, b.lo, c.hi) * c.w_hi;
        const double c11 = at(a.hi, b.hi, c.lo) * (1 - c.w_hi) + at(a.hi, b.hi, c.hi) * c.w_hi;
        const double c0 = c00 * (1 - b.w_hi) + c01 * b.w_hi;
        const double c1 = c10 * (1 - b.w_hi) + c11 * b.w_hi;
        out[(i * target.w + j) * target.d + k] = static_cast<T>(c0 * (1 - a.w_hi) + c1 * a.w_hi);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> normalize(const Tensor<T>& volume) {
  if (!volume.defined()) return volume;
  const auto [lo, hi] = std::minmax_element(volume.data().begin(), volume.data().end());
  const T min = *lo;
  const T range = *hi - *lo;
  Tensor<T> out(volume.shape());
  if (!(range > T{0})) return out;
  for (std::size_t i = 0; i < volume.numel(); ++i) out[i] = (volume[i] - min) / range;
  return out;
}

template <typename T>
Tensor<T> block_average(const Tensor<T>& volume, const Grid& factors) {
  require_volume(volume.shape(), "block_average");
  const auto& s = volume.shape();
  const std::array<std::size_t, 3> f{factors.h, factors.w, factors.d};
  for (int a = 0; a < 3; ++a) {
    if (f[a] == 0 || s[a] % f[a] != 0) {
      throw DimensionError("block_average: factor " + std::to_string(f[a]) + " does not divide axis extent " +
                           std::to_string(s[a]));
    }
  }
  const Shape out_shape{s[0] / f[0], s[1] / f[1], s[2] / f[2]};
  std::vector<double> acc(shape_numel(out_shape), 0.0);
  for (std::size_t x = 0; x < s[0]; ++x)
    for (std::size_t y = 0; y < s[1]; ++y)
      for (std::size_t z = 0; z < s[2]; ++z) {
        const std::size_t o = ((x / f[0]) * out_shape[1] + y / f[1]) * out_shape[2] + z / f[2];
        acc[o] += static_cast<double>(volume[(x * s[1] + y) * s[2] + z]);
      }
  const double inv = 1.0 / static_cast<double>(f[0] * f[1] * f[2]);
  Tensor<T> out(out_shape);
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<T>(acc[i] * inv);
  return out;
}

template Tensor<float> resample(const Tensor<float>&, const Grid&);
template Tensor<double> resample(const Tensor<double>&, const Grid&);
template Tensor<float> normalize(const Tensor<float>&);
template Tensor<double> normalize(const Tensor<double>&);
template Tensor<float> block_average(const Tensor<float>&, const Grid&);
template Tensor<double> block_average(const Tensor<double>&, const Grid&);

void write_volume(const std::filesystem::path& file, const std::string& contrast, const Tensor<double>& volume) {
  require_volume(volume.shape(), "write_volume");
  write_records(file, kVolumeMagic,
                {Record{contrast, volume.shape(), std::vector<double>(volume.data().begin(), volume.data().end())}});
}

Tensor<double> read_volume(const std::filesystem::path& file) {
  auto records = read_records(file, kVolumeMagic);
  if (records.size() != 1) {
    throw FormatError(file.string() + ": volume files hold exactly one record, found " +
                      std::to_string(records.size()));
  }
  auto& r = records.front();
  if (r.shape.size() != 3) throw FormatError(file.string() + ": volume record is not rank 3");
  return Tensor<double>(r.shape, std::move(r.values));
}

}  // namespace mpvit
