#include "mpvit/parameters.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "mpvit/errors.hpp"
#include "rng.hpp"

namespace mpvit {

template <typename T>
void ParameterSet<T>::insert(std::string path, Tensor<T> value) {
  if (!value.defined()) throw ValueError("parameter '" + path + "' is undefined");
  auto [it, inserted] = tensors_.emplace(std::move(path), std::move(value));
  if (!inserted) throw ValueError("duplicate parameter path: " + it->first);
}

template <typename T>
const Tensor<T>& ParameterSet<T>::at(std::string_view path) const {
  auto it = tensors_.find(std::string(path));
  if (it == tensors_.end()) throw ValueError("no parameter named '" + std::string(path) + "'");
  return it->second;
}

template <typename T>
Tensor<T>& ParameterSet<T>::at(std::string_view path) {
  auto it = tensors_.find(std::string(path));
  if (it == tensors_.end()) throw ValueError("no parameter named '" + std::string(path) + "'");
  return it->second;
}

template <typename T>
std::size_t ParameterSet<T>::numel() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors_) n += t.numel();
  return n;
}

template class ParameterSet<float>;
template class ParameterSet<double>;

std::map<std::string, Shape> parameter_layout(const ModelConfig& config) {
  config.validate();
  const std::size_t d = config.embed_dim;
  const std::size_t hidden = config.mlp_hidden();
  std::map<std::string, Shape> layout;
  auto add = [&](std::string path, Shape shape) { layout.emplace(std::move(path), std::move(shape)); };

  for (Plane plane : config.planes()) {
    const std::string p(plane_name(plane));
    add(p + "/patch_embed/weight", {config.patch_dim(plane), d});
    add(p + "/patch_embed/bias", {d});
    add(p + "/cls", {1, d});
    add(p + "/pos", {config.sequence_length(plane), d});
    for (std::size_t b = 0; b < config.depth; ++b) {
      char idx[8];
      std::snprintf(idx, sizeof idx, "%02zu", b);
      const std::string blk = p + "/blocks/" + idx;
      add(blk + "/norm1/gamma", {d});
      add(blk + "/norm1/beta", {d});
      for (const char* w : {"wq", "wk", "wv", "wo"}) add(blk + "/attn/" + w, {d, d});
      for (const char* w : {"bq", "bk", "bv", "bo"}) add(blk + "/attn/" + w, {d});
      add(blk + "/norm2/gamma", {d});
      add(blk + "/norm2/beta", {d});
      add(blk + "/mlp/fc1/weight", {d, hidden});
      add(blk + "/mlp/fc1/bias", {hidden});
      add(blk + "/mlp/fc2/weight", {hidden, d});
      add(blk + "/mlp/fc2/bias", {d});
    }
    if (config.multi_plane) {
      for (const char* w : {"wq", "wk", "wv", "wo"}) add(p + "/fusion/" + w, {d, d});
      add(p + "/fusion/bo", {d});
    }
    if (config.modality_vector) {
      const std::size_t m = config.channels(plane);
      add(p + "/modality/mlp/fc1/weight", {m, d});
      add(p + "/modality/mlp/fc1/bias", {d});
      add(p + "/modality/mlp/fc2/weight", {d, m * d});
      add(p + "/modality/mlp/fc2/bias", {m * d});
      for (const char* w : {"wq", "wk", "wv"}) add(p + "/modality/" + w, {d, d});
    }
    add(p + "/head/weight", {d, config.num_classes});
    add(p + "/head/bias", {config.num_classes});
  }
  return layout;
}

std::string parameter_group(std::string_view path) {
  const auto slash = path.rfind('/');
  return std::string(slash == std::string_view::npos ? path : path.substr(0, slash));
}

namespace {

enum class InitKind { truncated_normal, xavier, zeros, ones };

InitKind init_kind(const std::string& path) {
  const auto slash = path.rfind('/');
  const std::string leaf = slash == std::string::npos ? path : path.substr(slash + 1);
  if (leaf == "cls" || leaf == "pos" || path.ends_with("patch_embed/weight") ||
      path.ends_with("head/weight")) return InitKind::truncated_normal;
  if (leaf == "gamma") return InitKind::ones;
  if (leaf == "beta" || leaf == "bias" || (leaf.size() == 2 && leaf[0] == 'b')) return InitKind::zeros;
  return InitKind::xavier;
}

}  // namespace

template <typename T>
ParameterSet<T> init_parameters(const ModelConfig& config, std::uint64_t seed) {
  ParameterSet<T> params;
  for (const auto& [path, shape] : parameter_layout(config)) {
    // Seeded per path so a tensor's initial value does not depend on which
    // other modules the config enables.
    auto rng = detail::keyed_rng({seed, detail::fnv1a(path)});
    Tensor<T> t(shape);
    switch (init_kind(path)) {
      case InitKind::truncated_normal: {
        std::normal_distribution<double> normal(0.0, 0.02);
        for (auto& v : t.data()) {
          double x = normal(rng);
          while (std::abs(x) > 0.04) x = normal(rng);
          v = static_cast<T>(x);
        }
        break;
      }
      case InitKind::xavier: {
        const double fan_in = static_cast<double>(shape[0]);
        const double fan_out = static_cast<double>(shape.size() > 1 ? shape[1] : shape[0]);
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> uniform(-limit, limit);
        for (auto& v : t.data()) v = static_cast<T>(uniform(rng));
        break;
      }
      case InitKind::zeros:
        break;
      case InitKind::ones:
        t.fill(T{1});
        break;
    }
    params.insert(path, std::move(t));
  }
  return params;
}

template ParameterSet<float> init_parameters(const ModelConfig&, std::uint64_t);
template ParameterSet<double> init_parameters(const ModelConfig&, std::uint64_t);

}  // namespace mpvit
