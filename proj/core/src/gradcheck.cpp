#include "mpvit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "mpvit/errors.hpp"
#include "mpvit/parameters.hpp"
#include "mpvit/train.hpp"
#include "rng.hpp"

namespace mpvit {

double gradcheck_rel_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

Dataset<double> gradcheck_batch(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Dataset<double> batch;
  for (int label : {0, 1}) {
    auto rng = detail::keyed_rng({seed, detail::fnv1a("gradcheck"), static_cast<std::uint64_t>(label)});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    VolumeSample<double> s;
    s.id = "toy_" + std::to_string(label);
    s.label = label;
    for (Plane plane : config.planes()) {
      const Grid& g = config.grid(plane);
      const std::size_t C = config.channels(plane);
      std::vector<int> mask(C, 1);
      if (label == 1) {
        // Optional contrasts missing: everything past the required axial ones.
        const std::size_t keep = plane == Plane::axial ? std::min(C, kRequiredAxialContrasts) : 0;
        std::fill(mask.begin() + static_cast<std::ptrdiff_t>(keep), mask.end(), 0);
      }
      Tensor<double> vol(Shape{g.h, g.w, g.d, C});
      for (std::size_t i = 0; i < vol.numel(); ++i) {
        const double v = u(rng);
        vol[i] = mask[i % C] ? v : 0.0;
      }
      (plane == Plane::axial ? s.axial : s.sagittal) = std::move(vol);
      s.indicator.mask(plane) = mask;
    }
    batch.push_back(std::move(s));
  }
  return batch;
}

GradcheckReport gradcheck(const ModelConfig& config, const GradcheckOptions& options) {
  if (!(options.tolerance > 0.0)) throw ConfigError("gradcheck tolerance must be positive");
  if (!(options.step > 0.0)) throw ConfigError("gradcheck step must be positive");
  const auto data = gradcheck_batch(config, options.seed);
  Batch<double> batch;
  for (const auto& s : data) batch.push_back(&s);

  auto params = init_parameters<double>(config, options.seed);
  const auto analytic = batch_loss_and_grad(config, params, batch).grads;

  std::map<std::string, GradcheckGroup> groups;
  for (const auto& [path, grad] : analytic) {
    auto rng = detail::keyed_rng({options.seed, detail::fnv1a(path)});
    std::vector<std::size_t> coords;
    const auto g = grad.data();
    coords.push_back(static_cast<std::size_t>(
        std::max_element(g.begin(), g.end(), [](double a, double b) { return std::abs(a) < std::abs(b); }) - g.begin()));
    std::uniform_int_distribution<std::size_t> pick(0, grad.numel() - 1);
    for (std::size_t k = 0; k < options.coords_per_tensor && coords.size() < grad.numel(); ++k) {
      std::size_t c = pick(rng);
      while (std::find(coords.begin(), coords.end(), c) != coords.end()) c = pick(rng);
      coords.push_back(c);
    }

    auto& row = groups[parameter_group(path)];
    row.group = parameter_group(path);
    ++row.tensors;
    auto& theta = params.at(path);
    for (std::size_t c : coords) {
      const double saved = theta[c];
      theta[c] = saved + options.step;
      const double up = batch_loss(config, params, batch);
      theta[c] = saved - options.step;
      const double down = batch_loss(config, params, batch);
      theta[c] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      row.max_rel_error = std::max(row.max_rel_error, gradcheck_rel_error(g[c], numeric));
      ++row.coordinates;
    }
  }

  GradcheckReport report;
  for (auto& [_, row] : groups) {
    row.pass = row.max_rel_error < options.tolerance;
    report.pass = report.pass && row.pass;
    report.groups.push_back(row);
  }
  return report;
}

}  // namespace mpvit
