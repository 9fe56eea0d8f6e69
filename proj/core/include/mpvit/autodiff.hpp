#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "mpvit/tensor.hpp"

namespace mpvit {

/// Handle to a node of a Graph. Only meaningful for the graph that issued it.
struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
};

template <typename T>
using GradientMap = std::map<std::string, Tensor<T>>;

/// Tape of operations recorded in forward order. Ops append nodes whose
/// inputs always precede them, so a reverse sweep is a valid topological
/// order and visits each node once.
///
/// A graph built with `record = false` evaluates ops without keeping any
/// backward state (inference mode).
template <typename T>
class Graph {
 public:
  /// Accumulates the output gradient into the graph's input gradients.
  using BackwardFn = std::function<void(Graph&, const Tensor<T>& out_grad)>;

  explicit Graph(bool record = true) : record_(record) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  bool recording() const { return record_; }

  /// Leaf that never receives a gradient.
  Var constant(Tensor<T> value);
  /// Leaf that receives a gradient but is not addressed by path.
  Var variable(Tensor<T> value);
  /// Leaf tracked by `path`; `backward` reports its gradient under that key.
  Var parameter(std::string path, Tensor<T> value);

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  /// Gradient of the most recent backward pass; zeros if the node was not reached.
  Tensor<T> grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  /// Ids of parameter nodes keyed by path.
  const std::map<std::string, std::size_t>& parameters() const { return params_; }

  /// Reverse sweep from a single-element `loss`. Returns the gradient of every
  /// parameter node, zero-filled for parameters the loss does not depend on.
  GradientMap<T> backward(Var loss);

  // Op-author interface -----------------------------------------------------

  /// Appends an op output. `backward` is dropped when not recording or when
  /// no input requires a gradient.
  Var record(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor<T> value, const std::vector<Var>& inputs, BackwardFn backward);

  /// Adds `g` into the gradient buffer of `v` if `v` requires a gradient.
  void accumulate(Var v, const Tensor<T>& g);
  /// Mutable gradient buffer (zero-initialized on first access) for in-place
  /// accumulation; returns nullptr when `v` takes no gradient.
  Tensor<T>* grad_buffer(Var v);

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Var push(Node node);

  bool record_;
  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> params_;
};

/// Differentiable ops. Each records its output on the graph of its inputs.
namespace ad {

template <typename T>
Var matmul(Graph<T>& g, Var a, Var b);
/// a · bᵀ
template <typename T>
Var matmul_nt(Graph<T>& g, Var a, Var b);
template <typename T>
Var transpose(Graph<T>& g, Var a);

template <typename T>
Var add(Graph<T>& g, Var a, Var b);
template <typename T>
Var sub(Graph<T>& g, Var a, Var b);
/// Elementwise product of equal shapes.
template <typename T>
Var mul(Graph<T>& g, Var a, Var b);
/// a[m×n] + bias broadcast over rows (bias holds n values).
template <typename T>
Var add_bias(Graph<T>& g, Var a, Var bias);
template <typename T>
Var scale(Graph<T>& g, Var a, T factor);

template <typename T>
Var softmax(Graph<T>& g, Var x, std::size_t axis);
template <typename T>
Var layer_norm(Graph<T>& g, Var x, Var gamma, Var beta, T eps);
template <typename T>
Var gelu(Graph<T>& g, Var x);
/// Elementwise log(max(x, floor)); the clamp has zero gradient.
template <typename T>
Var log(Graph<T>& g, Var x, T floor);

template <typename T>
Var reshape(Graph<T>& g, Var a, Shape shape);
template <typename T>
Var slice_rows(Graph<T>& g, Var a, std::size_t start, std::size_t count);
template <typename T>
Var slice_cols(Graph<T>& g, Var a, std::size_t start, std::size_t count);
template <typename T>
Var concat_rows(Graph<T>& g, const std::vector<Var>& parts);
template <typename T>
Var concat_cols(Graph<T>& g, const std::vector<Var>& parts);
/// Mean over rows: [m×n] -> [1×n].
template <typename T>
Var mean_rows(Graph<T>& g, Var a);
/// Sum of all elements -> [1].
template <typename T>
Var sum(Graph<T>& g, Var a);
/// Single element at flat index -> [1].
template <typename T>
Var element(Graph<T>& g, Var a, std::size_t index);

}  // namespace ad

/// Central differences (f(x+h·eᵢ) − f(x−h·eᵢ)) / 2h for every coordinate of x.
template <typename T>
Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x, T h);

/// Central difference for the selected flat coordinates only.
template <typename T>
std::vector<T> finite_diff_grad_at(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x, T h,
                                   const std::vector<std::size_t>& coordinates);

}  // namespace mpvit
