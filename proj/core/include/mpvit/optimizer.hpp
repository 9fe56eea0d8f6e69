#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "mpvit/autodiff.hpp"
#include "mpvit/parameters.hpp"

namespace mpvit {

struct AdamConfig {
  double lr = 1e-4;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// True: θ ← θ·(1 − lr·wd) before the Adam update (AdamW). False: wd·θ is
  /// added to the gradient (classic L2).
  bool decoupled = true;

  /// Throws ConfigError on lr <= 0, negative decay or betas outside [0, 1).
  void validate() const;
};

/// First and second moments per parameter path plus the step count.
template <typename T>
struct OptimizerState {
  std::map<std::string, Tensor<T>> m;
  std::map<std::string, Tensor<T>> v;
  std::int64_t step = 0;
};

/// One bias-corrected Adam step on every parameter. Parameters missing from
/// `grads` are treated as having zero gradient. Throws DimensionError when a
/// gradient's shape does not match its parameter.
template <typename T>
void adamw_step(ParameterSet<T>& params, const GradientMap<T>& grads, OptimizerState<T>& state,
                const AdamConfig& config);

}  // namespace mpvit
