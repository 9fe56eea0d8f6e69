#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mpvit/config.hpp"
#include "mpvit/tensor.hpp"

namespace mpvit {

/// Every learnable tensor of a model, keyed by a stable slash-separated path
/// such as "axial/blocks/01/attn/wq". Iteration is in sorted path order.
template <typename T>
class ParameterSet {
 public:
  using Map = std::map<std::string, Tensor<T>>;

  void insert(std::string path, Tensor<T> value);
  bool contains(std::string_view path) const { return tensors_.find(std::string(path)) != tensors_.end(); }
  const Tensor<T>& at(std::string_view path) const;
  Tensor<T>& at(std::string_view path);

  std::size_t size() const { return tensors_.size(); }
  std::size_t numel() const;

  typename Map::const_iterator begin() const { return tensors_.begin(); }
  typename Map::const_iterator end() const { return tensors_.end(); }
  typename Map::iterator begin() { return tensors_.begin(); }
  typename Map::iterator end() { return tensors_.end(); }
  const Map& tensors() const { return tensors_; }

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& [path, t] : tensors_) out.insert(path, t.template cast<U>());
    return out;
  }

  bool operator==(const ParameterSet&) const = default;

 private:
  Map tensors_;
};

/// Path and shape of every parameter the config implies, in sorted order.
std::map<std::string, Shape> parameter_layout(const ModelConfig& config);

/// Fresh parameters: CLS, positional, patch-embedding and head weights from a
/// normal(0, 0.02) truncated at ±2σ; other matrices Xavier-uniform; biases
/// and LayerNorm β zero; LayerNorm γ one. Deterministic in `seed`.
template <typename T>
ParameterSet<T> init_parameters(const ModelConfig& config, std::uint64_t seed);

/// Parameter group used in gradient-check tables: the path without its last
/// component ("axial/blocks/00/attn/wq" -> "axial/blocks/00/attn").
std::string parameter_group(std::string_view path);

}  // namespace mpvit
