#include "mpvit/optimizer.hpp"

#include <cmath>

#include "mpvit/errors.hpp"

namespace mpvit {

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("adam eps must be positive");
}

template <typename T>
void adamw_step(ParameterSet<T>& params, const GradientMap<T>& grads, OptimizerState<T>& state,
                const AdamConfig& config) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  const double decay = config.decoupled ? 1.0 - config.lr * config.weight_decay : 1.0;
  const double l2 = config.decoupled ? 0.0 : config.weight_decay;

  for (auto& [path, theta] : params) {
    auto git = grads.find(path);
    const Tensor<T>* g = git == grads.end() ? nullptr : &git->second;
    if (g && g->shape() != theta.shape()) {
      throw DimensionError("adamw_step: gradient of " + path + " has shape " + shape_string(g->shape()) +
                           ", parameter has " + shape_string(theta.shape()));
    }
    auto& m = state.m[path];
    auto& v = state.v[path];
    if (!m.defined()) m = Tensor<T>(theta.shape());
    if (!v.defined()) v = Tensor<T>(theta.shape());

    auto th = theta.data();
    auto md = m.data();
    auto vd = v.data();
    for (std::size_t i = 0; i < th.size(); ++i) {
      const double w = static_cast<double>(th[i]);
      const double gi = (g ? static_cast<double>((*g)[i]) : 0.0) + l2 * w;
      const double mi = config.beta1 * static_cast<double>(md[i]) + (1.0 - config.beta1) * gi;
      const double vi = config.beta2 * static_cast<double>(vd[i]) + (1.0 - config.beta2) * gi * gi;
      md[i] = static_cast<T>(mi);
      vd[i] = static_cast<T>(vi);
      const double update = (mi / c1) / (std::sqrt(vi / c2) + config.eps);
      th[i] = static_cast<T>(w * decay - config.lr * update);
    }
  }
}

template void adamw_step(ParameterSet<float>&, const GradientMap<float>&, OptimizerState<float>&, const AdamConfig&);
template void adamw_step(ParameterSet<double>&, const GradientMap<double>&, OptimizerState<double>&,
                         const AdamConfig&);

}  // namespace mpvit
