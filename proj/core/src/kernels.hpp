#pragma once

// Internal helpers shared by the tensor kernels and the autodiff ops.

#include <Eigen/Core>

#include <cstddef>
#include <vector>

#include "mpvit/tensor.hpp"

namespace mpvit::detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;

template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

template <typename T>
MatrixMap<T> as_matrix(Tensor<T>& t) {
  return MatrixMap<T>(t.raw(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

template <typename T>
ConstMatrixMap<T> as_matrix(const Tensor<T>& t) {
  return ConstMatrixMap<T>(t.raw(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

void require_rank(const Shape& shape, std::size_t rank, const char* op);

/// Outer/axis/inner extents for iterating a tensor along one axis.
struct AxisExtents {
  std::size_t outer;
  std::size_t axis;
  std::size_t inner;
};
AxisExtents axis_extents(const Shape& shape, std::size_t axis);

/// Layer-norm forward that also returns the normalized input and per-row
/// reciprocal standard deviation, which the backward pass needs.
template <typename T>
struct LayerNormResult {
  Tensor<T> out;
  Tensor<T> normalized;
  std::vector<T> rstd;
};

template <typename T>
LayerNormResult<T> layer_norm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps);

}  // namespace mpvit::detail
