#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpvit/config.hpp"
#include "mpvit/sample.hpp"

namespace mpvit {

struct GradcheckOptions {
  double tolerance = 1e-4;
  /// Central-difference step.
  double step = 1e-5;
  /// Random coordinates per parameter tensor, on top of its largest-gradient entry.
  std::size_t coords_per_tensor = 3;
  std::uint64_t seed = 0;
};

struct GradcheckGroup {
  std::string group;
  std::size_t tensors = 0;
  std::size_t coordinates = 0;
  /// max |analytic − numeric| / max(|analytic|, |numeric|, 1e-6)
  double max_rel_error = 0.0;
  bool pass = true;
};

struct GradcheckReport {
  std::vector<GradcheckGroup> groups;
  bool pass = true;
};

/// Relative error with the denominator floored at 1e-6.
double gradcheck_rel_error(double analytic, double numeric);

/// Two-sample toy batch on the config grids: random intensities, labels 0 and
/// 1, the second sample missing every optional contrast.
Dataset<double> gradcheck_batch(const ModelConfig& config, std::uint64_t seed);

/// Compares backward() of the training loss against central differences in
/// double precision, per parameter group.
GradcheckReport gradcheck(const ModelConfig& config, const GradcheckOptions& options = {});

}  // namespace mpvit
