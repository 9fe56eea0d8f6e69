#include "mpvit/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kernels.hpp"

namespace mpvit {

// ---------------------------------------------------------------------------
// Graph

template <typename T>
Var Graph<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Graph<T>::constant(Tensor<T> value) {
  return push(Node{std::move(value), {}, {}, false});
}

template <typename T>
Var Graph<T>::variable(Tensor<T> value) {
  return push(Node{std::move(value), {}, {}, record_});
}

template <typename T>
Var Graph<T>::parameter(std::string path, Tensor<T> value) {
  if (params_.contains(path)) throw ValueError("duplicate parameter path: " + path);
  Var v = push(Node{std::move(value), {}, {}, record_});
  params_.emplace(std::move(path), v.id);
  return v;
}

template <typename T>
Var Graph<T>::record(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

template <typename T>
Var Graph<T>::record(Tensor<T> value, const std::vector<Var>& inputs, BackwardFn backward) {
  bool needs_grad = false;
  for (Var in : inputs) {
    if (in.id >= nodes_.size()) throw ValueError("graph op references a node that does not exist yet");
    needs_grad = needs_grad || nodes_[in.id].requires_grad;
  }
  needs_grad = needs_grad && record_;
  Node node{std::move(value), {}, {}, needs_grad};
  if (needs_grad) node.backward = std::move(backward);
  return push(std::move(node));
}

template <typename T>
Tensor<T>* Graph<T>::grad_buffer(Var v) {
  Node& n = nodes_.at(v.id);
  if (!n.requires_grad) return nullptr;
  if (!n.grad.defined()) n.grad = Tensor<T>(n.value.shape());
  return &n.grad;
}

template <typename T>
void Graph<T>::accumulate(Var v, const Tensor<T>& g) {
  Tensor<T>* buf = grad_buffer(v);
  if (!buf) return;
  if (buf->numel() != g.numel()) {
    throw DimensionError("gradient shape " + shape_string(g.shape()) + " does not match node " +
                         shape_string(buf->shape()));
  }
  T* dst = buf->raw();
  const T* src = g.raw();
  for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += src[i];
}

template <typename T>
Tensor<T> Graph<T>::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.grad.defined() ? n.grad : Tensor<T>(n.value.shape());
}

template <typename T>
GradientMap<T> Graph<T>::backward(Var loss) {
  if (!record_) throw ValueError("backward on a graph built without recording");
  Node& root = nodes_.at(loss.id);
  if (root.value.numel() != 1) {
    throw DimensionError("backward needs a single-element loss, got shape " + shape_string(root.value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor<T>();
  if (root.requires_grad) root.grad = Tensor<T>(root.value.shape(), T{1});

  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    // Callbacks only touch gradients of earlier nodes, never their own.
    if (n.backward && n.grad.defined()) n.backward(*this, n.grad);
  }

  GradientMap<T> grads;
  for (const auto& [path, id] : params_) {
    const Node& n = nodes_[id];
    grads.emplace(path, n.grad.defined() ? n.grad : Tensor<T>(n.value.shape()));
  }
  return grads;
}

template class Graph<float>;
template class Graph<double>;

// ---------------------------------------------------------------------------
// ops

namespace ad {

template <typename T>
Var matmul(Graph<T>& g, Var a, Var b) {
  auto out = ops::matmul(g.value(a), g.value(b));
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& gr, const Tensor<T>& dy) {
    if (auto* da = gr.grad_buffer(a)) {
      detail::as_matrix(*da).noalias() += detail::as_matrix(dy) * detail::as_matrix(gr.value(b)).transpose();
    }
    if (auto* db = gr.grad_buffer(b)) {
      detail::as_matrix(*db).noalias() += detail::as_matrix(gr.value(a)).transpose() * detail::as_matrix(dy);
    }
  });
}

template <typename T>
Var matmul_nt(Graph<T>& g, Var a, Var b) {
  auto out = ops::matmul_nt(g.value(a), g.value(b));
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& gr, const Tensor<T>& dy) {
    // y = a bᵀ: da = dy b, db = dyᵀ a
    if (auto* da = gr.grad_buffer(a)) {
      detail::as_matrix(*da).noalias() += detail::as_matrix(dy) * detail::as_matrix(gr.value(b));
    }
    if (auto* db = gr.grad_buffer(b)) {
      detail::as_matrix(*db).noalias() += detail::as_matrix(dy).transpose() * detail::as_matrix(gr.value(a));
    }
  });
}

template <typename T>
Var transpose(Graph<T>& g, Var a) {
  auto out = ops::transpose(g.value(a));
  return g.record(std::move(out), {a}, [a](Graph<T>& gr, const Tensor<T>& dy) {
    if (auto* da = gr.grad_buffer(a)) detail::as_matrix(*da) += detail::as_matrix(dy).transpose();
  });
}

template <typename T>
Var add(Graph<T>& g, Var a, Var b) {
  auto out = ops::add(g.value(a), g.value(b));
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& gr, const Tensor<T>& dy) {
    gr.accumulate(a, dy);
    gr.accumulate(b, dy);
  });
}

template <typename T>
Var sub(Graph<T>& g, Var a, Var b) {
  const auto& va = g.value(a);
  const auto& vb = g.value(b);
  if (va.shape() != vb.shape()) {
    throw DimensionError("sub: shape mismatch " + shape_string(va.shape()) + " vs " + shape_string(vb.shape()));
  }
  Tensor<T> out = va;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= vb[i];
  check_finite(out, "sub");
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& gr, const Tensor<T>& dy) {
    gr.accumulate(a, dy);
    if (auto* db = gr.grad_buffer(b)) {
      for (std::size_t i = 0; i < dy.numel(); ++i) (*db)[i] -= dy[i];
    }
  });
}

template <typename T>
Var mul(Graph<T>& g, Var a, Var b) {
  const auto& va = g.value(a);
  const auto& vb = g.value(b);
  if (va.shape() != vb.shape()) {
    throw DimensionError("mul: shape mismatch " + shape_string(va.shape()) + " vs " + shape_string(vb.shape()));
  }
  Tensor<T> out = va;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= vb[i];
  check_finite(out, "mul");
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& gr, const Tensor<T>& dy) {
    if (auto* da = gr.grad_buffer(a)) {
      const auto& vb2 = gr.value(b);
      for (std::size_t i = 0; i < dy.numel(); ++i) (*da)[i] += dy[i] * vb2[i];
    }
    if (auto* db = gr.grad_buffer(b)) {
      const auto& va2 = gr.value(a);
      for (std::size_t i = 0; i < dy.numel(); ++i) (*db)[i] += dy[i] * va2[i];
    }
  });
}

template <typename T>
Var add_bias(Graph<T>& g, Var a, Var bias) {
  const auto& va = g.value(a);
  const auto& vb = g.value(bias);
  detail::require_rank(va.shape(), 2, "add_bias");
  const std::size_t n = va.cols();
  if (vb.numel() != n) {
    throw DimensionError("add_bias: bias " + shape_string(vb.shape()) + " does not match columns of " +
                         shape_string(va.shape()));
  }
  Tensor<T> out = va;
  for (std::size_t r = 0; r < va.rows(); ++r) {
    for (std::size_t c = 0; c < n; ++c) out(r, c) += vb[c];
  }
  check_finite(out, "add_bias");
  return g.record(std::move(out), {a, bias}, [a, bias, n](Graph<T>& gr, const Tensor<T>& dy) {
    gr.accumulate(a, dy);
    if (auto* db = gr.grad_buffer(bias)) {
      const std::size_t rows = dy.numel() / n;
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < n; ++c) (*db)[c] += dy[r * n + c];
      }
    }
  });
}

template <typename T>
Var scale(Graph<T>& g, Var a, T factor) {
  auto out = ops::scale(g.value(a), factor);
  return g.record(std::move(out), {a}, [a, factor](Graph<T>& gr, const Tensor<T>& dy) {
    if (auto* da = gr.grad_buffer(a)) {
      for (std::size_t i = 0; i < dy.numel(); ++i) (*da)[i] += factor * dy[i];
    }
  });
}

template <typename T>
Var softmax(Graph<T>& g, Var x, std::size_t axis) {
  auto out = ops::softmax(g.value(x), axis);
  const Var self{g.size()};
  return g.record(std::move(out), {x}, [x, self, axis](Graph<T>& gr, const Tensor<T>& dy) {
    auto* dx = gr.grad_buffer(x);
    if (!dx) return;
    const auto& y = gr.value(self);
    const auto e = detail::axis_extents(y.shape(), axis);
    for (std::size_t o = 0; o < e.outer; ++o) {
      for (std::size_t in = 0; in < e.inner; ++in) {
        const std::size_t base = o * e.axis * e.inner + in;
        T dot{0};
        for (std::size_t k = 0; k < e.axis; ++k) dot += dy[base + k * e.inner] * y[base + k * e.inner];
        for (std::size_t k = 0; k < e.axis; ++k) {
          const std::size_t idx = base + k * e.inner;
          (*dx)[idx] += y[idx] * (dy[idx] - dot);
        }
      }
    }
  });
}

template <typename T>
Var layer_norm(Graph<T>& g, Var x, Var gamma, Var beta, T eps) {
  auto r = detail::layer_norm_forward(g.value(x), g.value(gamma), g.value(beta), eps);
  check_finite(r.out, "layer_norm");
  auto normalized = std::move(r.normalized);
  auto rstd = std::move(r.rstd);
  return g.record(std::move(r.out), {x, gamma, beta},
                  [x, gamma, beta, normalized = std::move(normalized), rstd = std::move(rstd)](
                      Graph<T>& gr, const Tensor<T>& dy) {
                    const std::size_t n = normalized.shape().back();
                    const std::size_t rows = normalized.numel() / n;
                    const auto& gm = gr.value(gamma);
                    if (auto* dg = gr.grad_buffer(gamma)) {
                      for (std::size_t i = 0; i < rows; ++i)
                        for (std::size_t j = 0; j < n; ++j) (*dg)[j] += dy[i * n + j] * normalized[i * n + j];
                    }
                    if (auto* db = gr.grad_buffer(beta)) {
                      for (std::size_t i = 0; i < rows; ++i)
                        for (std::size_t j = 0; j < n; ++j) (*db)[j] += dy[i * n + j];
                    }
                    if (auto* dx = gr.grad_buffer(x)) {
                      // dx = rstd/n · (n·dxhat − Σdxhat − xhat·Σ(dxhat·xhat)), dxhat = dy·γ
                      const T inv_n = T{1} / static_cast<T>(n);
                      for (std::size_t i = 0; i < rows; ++i) {
                        T sum_d{0};
                        T sum_dx{0};
                        for (std::size_t j = 0; j < n; ++j) {
                          const T d = dy[i * n + j] * gm[j];
                          sum_d += d;
                          sum_dx += d * normalized[i * n + j];
                        }
                        for (std::size_t j = 0; j < n; ++j) {
                          const T d = dy[i * n + j] * gm[j];
                          (*dx)[i * n + j] +=
                              rstd[i] * (d - inv_n * sum_d - normalized[i * n + j] * inv_n * sum_dx);
                        }
                      }
                    }
                  });
}

template <typename T>
Var gelu(Graph<T>& g, Var x) {
  auto out = ops::gelu(g.value(x));
  return g.record(std::move(out), {x}, [x](Graph<T>& gr, const Tensor<T>& dy) {
    auto* dx = gr.grad_buffer(x);
    if (!dx) return;
    const auto& xv = gr.value(x);
    const T inv_sqrt2 = T{1} / std::sqrt(T{2});
    const T inv_sqrt_2pi = T{1} / std::sqrt(T{2} * std::numbers::pi_v<T>);
    for (std::size_t i = 0; i < xv.numel(); ++i) {
      const T v = xv[i];
      const T cdf = T{0.5} * std::erfc(-v * inv_sqrt2);
      const T pdf = inv_sqrt_2pi * std::exp(T{-0.5} * v * v);
      (*dx)[i] += dy[i] * (cdf + v * pdf);
    }
  });
}

template <typename T>
Var log(Graph<T>& g, Var x, T floor) {
  const auto& xv = g.value(x);
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) out[i] = std::log(std::max(xv[i], floor));
  check_finite(out, "log");
  return g.record(std::move(out), {x}, [x, floor](Graph<T>& gr, const Tensor<T>& dy) {
    auto* dx = gr.grad_buffer(x);
    if (!dx) return;
    const auto& v = gr.value(x);
    for (std::size_t i = 0; i < v.numel(); ++i) {
      if (v[i] > floor) (*dx)[i] += dy[i] / v[i];
    }
  });
}

template <typename T>
Var reshape(Graph<T>& g, Var a, Shape shape) {
  auto out = g.value(a).reshaped(std::move(shape));
  return g.record(std::move(out), {a}, [a](Graph<T>& gr, const Tensor<T>& dy) {
    if (auto* da = gr.grad_buffer(a)) {
      for (std::size_t i = 0; i < dy.numel(); ++i) (*da)[i] += dy[i];
    }
  });
}

template <typename T>
Var slice_rows(Graph<T>& g, Var a, std::size_t start, std::size_t count) {
  const auto& va = g.value(a);
  detail::require_rank(va.shape(), 2, "slice_rows");
  if (count == 0 || start + count > va.rows()) {
    throw DimensionError("slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of range for " + shape_string(va.shape()));
  }
  const std::size_t n = va.cols();
  std::vector<T> values(va.raw() + start * n, va.raw() + (start + count) * n);
  Tensor<T> out(Shape{count, n}, std::move(values));
  return g.record(std::move(out), {a}, [a, start, n](Graph<T>& gr, const Tensor<T>& dy) {
    if (auto* da = gr.grad_buffer(a)) {
      T* dst = da->raw() + start * n;
      for (std::size_t i = 0; i < dy.numel(); ++i) dst[i] += dy[i];
    }
  });
}

template <typename T>
Var slice_cols(Graph<T>& g, Var a, std::size_t start, std::size_t count) {
  const auto& va = g.value(a);
  detail::require_rank(va.shape(), 2, "slice_cols");
  if (count == 0 || start + count > va.cols()) {
    throw DimensionError("slice_cols: cols [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of range for " + shape_string(va.shape()));
  }
  const std::size_t rows = va.rows();
  const std::size_t n = va.cols();
  Tensor<T> out(Shape{rows, count});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(va.raw() + r * n + start, count, out.raw() + r * count);
  }
  return g.record(std::move(out), {a}, [a, start, count, n](Graph<T>& gr, const Tensor<T>& dy) {
    if (auto* da = gr.grad_buffer(a)) {
      const std::size_t rows2 = dy.numel() / count;
      for (std::size_t r = 0; r < rows2; ++r) {
        for (std::size_t c = 0; c < count; ++c) (*da)[r * n + start + c] += dy[r * count + c];
      }
    }
  });
}

template <typename T>
Var concat_rows(Graph<T>& g, const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t n = g.value(parts.front()).cols();
  std::size_t rows = 0;
  for (Var p : parts) {
    const auto& v = g.value(p);
    if (v.rank() != 2 || v.cols() != n) {
      throw DimensionError("concat_rows: " + shape_string(v.shape()) + " does not have " + std::to_string(n) +
                           " columns");
    }
    rows += v.rows();
  }
  std::vector<T> values;
  values.reserve(rows * n);
  for (Var p : parts) {
    const auto& v = g.value(p);
    values.insert(values.end(), v.data().begin(), v.data().end());
  }
  Tensor<T> out(Shape{rows, n}, std::move(values));
  return g.record(std::move(out), parts, [parts](Graph<T>& gr, const Tensor<T>& dy) {
    std::size_t offset = 0;
    for (Var p : parts) {
      const std::size_t count = gr.value(p).numel();
      if (auto* dp = gr.grad_buffer(p)) {
        for (std::size_t i = 0; i < count; ++i) (*dp)[i] += dy[offset + i];
      }
      offset += count;
    }
  });
}

template <typename T>
Var concat_cols(Graph<T>& g, const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t rows = g.value(parts.front()).rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    const auto& v = g.value(p);
    if (v.rank() != 2 || v.rows() != rows) {
      throw DimensionError("concat_cols: " + shape_string(v.shape()) + " does not have " + std::to_string(rows) +
                           " rows");
    }
    cols += v.cols();
  }
  Tensor<T> out(Shape{rows, cols});
  std::size_t offset = 0;
  for (Var p : parts) {
    const auto& v = g.value(p);
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(v.raw() + r * v.cols(), v.cols(), out.raw() + r * cols + offset);
    offset += v.cols();
  }
  return g.record(std::move(out), parts, [parts, rows, cols](Graph<T>& gr, const Tensor<T>& dy) {
    std::size_t off = 0;
    for (Var p : parts) {
      const std::size_t c = gr.value(p).cols();
      if (auto* dp = gr.grad_buffer(p)) {
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < c; ++j) (*dp)[r * c + j] += dy[r * cols + off + j];
      }
      off += c;
    }
  });
}

template <typename T>
Var mean_rows(Graph<T>& g, Var a) {
  const auto& va = g.value(a);
  detail::require_rank(va.shape(), 2, "mean_rows");
  const std::size_t rows = va.rows();
  const std::size_t n = va.cols();
  Tensor<T> out(Shape{1, n});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < n; ++c) out[c] += va(r, c);
  const T inv = T{1} / static_cast<T>(rows);
  for (auto& v : out.data()) v *= inv;
  return g.record(std::move(out), {a}, [a, rows, n, inv](Graph<T>& gr, const Tensor<T>& dy) {
    if (auto* da = gr.grad_buffer(a)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < n; ++c) (*da)[r * n + c] += dy[c] * inv;
    }
  });
}

template <typename T>
Var sum(Graph<T>& g, Var a) {
  const auto& va = g.value(a);
  T total{0};
  for (T v : va.data()) total += v;
  Tensor<T> out = Tensor<T>::scalar(total);
  check_finite(out, "sum");
  return g.record(std::move(out), {a}, [a](Graph<T>& gr, const Tensor<T>& dy) {
    if (auto* da = gr.grad_buffer(a)) {
      for (auto& v : da->data()) v += dy[0];
    }
  });
}

template <typename T>
Var element(Graph<T>& g, Var a, std::size_t index) {
  const auto& va = g.value(a);
  if (index >= va.numel()) {
    throw DimensionError("element: index " + std::to_string(index) + " out of range for " + shape_string(va.shape()));
  }
  return g.record(Tensor<T>::scalar(va[index]), {a}, [a, index](Graph<T>& gr, const Tensor<T>& dy) {
    if (auto* da = gr.grad_buffer(a)) (*da)[index] += dy[0];
  });
}

#define MPVIT_INSTANTIATE_AD(T)                                                     \
  template Var matmul(Graph<T>&, Var, Var);                                         \
  template Var matmul_nt(Graph<T>&, Var, Var);                                      \
  template Var transpose(Graph<T>&, Var);                                           \
  template Var add(Graph<T>&, Var, Var);                                            \
  template Var sub(Graph<T>&, Var, Var);                                            \
  template Var mul(Graph<T>&, Var, Var);                                            \
  template Var add_bias(Graph<T>&, Var, Var);                                       \
  template Var scale(Graph<T>&, Var, T);                                            \
  template Var softmax(Graph<T>&, Var, std::size_t);                                \
  template Var layer_norm(Graph<T>&, Var, Var, Var, T);                             \
  template Var gelu(Graph<T>&, Var);                                                \
  template Var log(Graph<T>&, Var, T);                                              \
  template Var reshape(Graph<T>&, Var, Shape);                                      \
  template Var slice_rows(Graph<T>&, Var, std::size_t, std::size_t);                \
  template Var slice_cols(Graph<T>&, Var, std::size_t, std::size_t);                \
  template Var concat_rows(Graph<T>&, const std::vector<Var>&);                     \
  template Var concat_cols(Graph<T>&, const std::vector<Var>&);                     \
  template Var mean_rows(Graph<T>&, Var);                                           \
  template Var sum(Graph<T>&, Var);                                                 \
  template Var element(Graph<T>&, Var, std::size_t);

MPVIT_INSTANTIATE_AD(float)
MPVIT_INSTANTIATE_AD(double)
#undef MPVIT_INSTANTIATE_AD

}  // namespace ad

// ---------------------------------------------------------------------------
// finite differences

template <typename T>
std::vector<T> finite_diff_grad_at(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x, T h,
                                   const std::vector<std::size_t>& coordinates) {
  if (!(h > T{0})) throw ValueError("finite_diff_grad: step must be positive");
  Tensor<T> probe = x;
  std::vector<T> out;
  out.reserve(coordinates.size());
  for (std::size_t i : coordinates) {
    if (i >= x.numel()) throw DimensionError("finite_diff_grad: coordinate out of range");
    const T original = probe[i];
    probe[i] = original + h;
    const T plus = f(probe);
    probe[i] = original - h;
    const T minus = f(probe);
    probe[i] = original;
    out.push_back((plus - minus) / (T{2} * h));
  }
  return out;
}

template <typename T>
Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x, T h) {
  std::vector<std::size_t> all(x.numel());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return Tensor<T>(x.shape(), finite_diff_grad_at(f, x, h, all));
}

template Tensor<float> finite_diff_grad(const std::function<float(const Tensor<float>&)>&, const Tensor<float>&,
                                        float);
template Tensor<double> finite_diff_grad(const std::function<double(const Tensor<double>&)>&,
                                         const Tensor<double>&, double);
template std::vector<float> finite_diff_grad_at(const std::function<float(const Tensor<float>&)>&,
                                                const Tensor<float>&, float, const std::vector<std::size_t>&);
template std::vector<double> finite_diff_grad_at(const std::function<double(const Tensor<double>&)>&,
                                                 const Tensor<double>&, double, const std::vector<std::size_t>&);

}  // namespace mpvit
