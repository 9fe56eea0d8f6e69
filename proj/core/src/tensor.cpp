#include "mpvit/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "kernels.hpp"

namespace mpvit {

namespace {
std::atomic<bool> g_checked_mode{false};
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void set_checked_mode(bool enabled) { g_checked_mode.store(enabled, std::memory_order_relaxed); }
bool checked_mode() { return g_checked_mode.load(std::memory_order_relaxed); }

CheckedModeScope::CheckedModeScope(bool enabled) : previous_(checked_mode()) { set_checked_mode(enabled); }
CheckedModeScope::~CheckedModeScope() { set_checked_mode(previous_); }

// ---------------------------------------------------------------------------
// Tensor

namespace {
void validate_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor shape " + shape_string(shape) + " has a zero dimension");
  }
}
}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(shape_numel(shape_), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
  validate_shape(shape_);
  if (shape_numel(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_string(shape_) + " needs " + std::to_string(shape_numel(shape_)) +
                         " values, got " + std::to_string(data_.size()));
  }
}

template <typename T>
Tensor<T> Tensor<T>::matrix(std::initializer_list<std::initializer_list<T>> rows) {
  if (rows.size() == 0) throw DimensionError("matrix literal has no rows");
  const std::size_t cols = rows.begin()->size();
  std::vector<T> values;
  values.reserve(rows.size() * cols);
  for (const auto& row : rows) {
    if (row.size() != cols) throw DimensionError("ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor(Shape{rows.size(), cols}, std::move(values));
}

template <typename T>
Tensor<T> Tensor<T>::vector(std::initializer_list<T> values) {
  return Tensor(Shape{values.size()}, std::vector<T>(values));
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape_));
  }
  return shape_[axis];
}

template <typename T>
std::size_t Tensor<T>::rows() const {
  detail::require_rank(shape_, 2, "rows");
  return shape_[0];
}

template <typename T>
std::size_t Tensor<T>::cols() const {
  detail::require_rank(shape_, 2, "cols");
  return shape_[1];
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

template <typename T>
void Tensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
void check_finite(const Tensor<T>& t, std::string_view op) {
  if (checked_mode() && !all_finite(t)) {
    throw NonFiniteError("non-finite value produced by " + std::string(op));
  }
}

// ---------------------------------------------------------------------------
// detail

namespace detail {

void require_rank(const Shape& shape, std::size_t rank, const char* op) {
  if (shape.size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_string(shape));
  }
}

AxisExtents axis_extents(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape));
  }
  AxisExtents e{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) e.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) e.inner *= shape[i];
  return e;
}

template <typename T>
LayerNormResult<T> layer_norm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  if (!(eps > T{0})) throw ValueError("layer_norm: eps must be positive");
  const std::size_t n = x.shape().back();
  if (gamma.numel() != n || beta.numel() != n) {
    throw DimensionError("layer_norm: gamma " + shape_string(gamma.shape()) + " / beta " +
                         shape_string(beta.shape()) + " must match last axis of " + shape_string(x.shape()));
  }
  const std::size_t rows = x.numel() / n;
  LayerNormResult<T> r{Tensor<T>(x.shape()), Tensor<T>(x.shape()), std::vector<T>(rows)};
  for (std::size_t i = 0; i < rows; ++i) {
    const T* xi = x.raw() + i * n;
    T mean{0};
    for (std::size_t j = 0; j < n; ++j) mean += xi[j];
    mean /= static_cast<T>(n);
    T var{0};
    for (std::size_t j = 0; j < n; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= static_cast<T>(n);
    const T rstd = T{1} / std::sqrt(var + eps);
    r.rstd[i] = rstd;
    T* hat = r.normalized.raw() + i * n;
    T* out = r.out.raw() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      hat[j] = (xi[j] - mean) * rstd;
      out[j] = hat[j] * gamma[j] + beta[j];
    }
  }
  return r;
}

template struct LayerNormResult<float>;
template struct LayerNormResult<double>;
template LayerNormResult<float> layer_norm_forward(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                                   float);
template LayerNormResult<double> layer_norm_forward(const Tensor<double>&, const Tensor<double>&,
                                                    const Tensor<double>&, double);

}  // namespace detail

// ---------------------------------------------------------------------------
// ops

namespace ops {

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " + shape_string(b.shape()));
  }
  Tensor<T> out(Shape{a.rows(), b.cols()});
  detail::as_matrix(out).noalias() = detail::as_matrix(a) * detail::as_matrix(b);
  check_finite(out, "matmul");
  return out;
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: cannot multiply " + shape_string(a.shape()) + " by transpose of " +
                         shape_string(b.shape()));
  }
  Tensor<T> out(Shape{a.rows(), b.rows()});
  detail::as_matrix(out).noalias() = detail::as_matrix(a) * detail::as_matrix(b).transpose();
  check_finite(out, "matmul_nt");
  return out;
}

template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: cannot multiply transpose of " + shape_string(a.shape()) + " by " +
                         shape_string(b.shape()));
  }
  Tensor<T> out(Shape{a.cols(), b.cols()});
  detail::as_matrix(out).noalias() = detail::as_matrix(a).transpose() * detail::as_matrix(b);
  check_finite(out, "matmul_tn");
  return out;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  detail::require_rank(a.shape(), 2, "transpose");
  Tensor<T> out(Shape{a.cols(), a.rows()});
  detail::as_matrix(out) = detail::as_matrix(a).transpose();
  return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  const auto e = detail::axis_extents(x.shape(), axis);
  Tensor<T> out(x.shape());
  for (std::size_t o = 0; o < e.outer; ++o) {
    for (std::size_t in = 0; in < e.inner; ++in) {
      const std::size_t base = o * e.axis * e.inner + in;
      T mx = x[base];
      for (std::size_t k = 1; k < e.axis; ++k) mx = std::max(mx, x[base + k * e.inner]);
      T sum{0};
      for (std::size_t k = 0; k < e.axis; ++k) {
        const T v = std::exp(x[base + k * e.inner] - mx);
        out[base + k * e.inner] = v;
        sum += v;
      }
      const T inv = T{1} / sum;
      for (std::size_t k = 0; k < e.axis; ++k) out[base + k * e.inner] *= inv;
    }
  }
  check_finite(out, "softmax");
  return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  auto r = detail::layer_norm_forward(x, gamma, beta, eps);
  check_finite(r.out, "layer_norm");
  return std::move(r.out);
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  const T inv_sqrt2 = T{1} / std::sqrt(T{2});
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const T v = x[i];
    out[i] = v * T{0.5} * std::erfc(-v * inv_sqrt2);
  }
  check_finite(out, "gelu");
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  Tensor<T> out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b[i];
  check_finite(out, "add");
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  Tensor<T> out = a;
  for (auto& v : out.data()) v *= factor;
  check_finite(out, "scale");
  return out;
}

#define MPVIT_INSTANTIATE_OPS(T)                                                     \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> matmul_tn(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> transpose(const Tensor<T>&);                                    \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                         \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T); \
  template Tensor<T> gelu(const Tensor<T>&);                                         \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> scale(const Tensor<T>&, T);

MPVIT_INSTANTIATE_OPS(float)
MPVIT_INSTANTIATE_OPS(double)
#undef MPVIT_INSTANTIATE_OPS

}  // namespace ops

template class Tensor<float>;
template class Tensor<double>;
template bool all_finite(const Tensor<float>&);
template bool all_finite(const Tensor<double>&);
template void check_finite(const Tensor<float>&, std::string_view);
template void check_finite(const Tensor<double>&, std::string_view);

}  // namespace mpvit
