#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mpvit {

/// Infinite stream of dataset indices drawn with replacement, each index
/// weighted by the inverse size of its class, so both classes are expected
/// equally often. Single owner, sequential.
class WeightedSampler {
 public:
  /// Throws DataError unless labels are 0/1 and both classes occur.
  WeightedSampler(std::span<const int> labels, std::uint64_t seed);

  std::size_t next();
  std::vector<std::size_t> draw(std::size_t n);
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<double> weights_;
  std::discrete_distribution<std::size_t> dist_;
  std::mt19937_64 rng_;
};

}  // namespace mpvit
