#include "mpvit/sampler.hpp"

#include <array>
#include <string>

#include "mpvit/errors.hpp"
#include "rng.hpp"

namespace mpvit {

namespace {

std::vector<double> class_weights(std::span<const int> labels) {
  std::array<std::size_t, 2> counts{};
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("sampler: label " + std::to_string(y) + " is not 0 or 1");
    ++counts[static_cast<std::size_t>(y)];
  }
  if (counts[0] == 0 || counts[1] == 0) throw DataError("sampler: both classes must be present");
  std::vector<double> w;
  w.reserve(labels.size());
  for (int y : labels) w.push_back(1.0 / static_cast<double>(counts[static_cast<std::size_t>(y)]));
  return w;
}

}  // namespace

WeightedSampler::WeightedSampler(std::span<const int> labels, std::uint64_t seed)
    : weights_(class_weights(labels)),
      dist_(weights_.begin(), weights_.end()),
      rng_(detail::keyed_rng({seed, detail::fnv1a("sampler")})) {}

std::size_t WeightedSampler::next() { return dist_(rng_); }

std::vector<std::size_t> WeightedSampler::draw(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = next();
  return out;
}

}  // namespace mpvit
