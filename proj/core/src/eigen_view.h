// Copyright 2026 The narp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NARP_SRC_EIGEN_VIEW_H_
#define NARP_SRC_EIGEN_VIEW_H_

#include <Eigen/Core>

#include "narp/tensor.h"

namespace narp::internal {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatView = Eigen::Map<RowMat>;
using ConstMatView = Eigen::Map<const RowMat>;
using BlockView = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstBlockView = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

inline MatView View(Tensor& t) { return MatView(t.data(), t.rows(), t.cols()); }
inline ConstMatView View(const Tensor& t) {
  return ConstMatView(t.data(), t.rows(), t.cols());
}

// Sub-block [row, row+rows) x [col, col+cols) of a row-major matrix.
inline BlockView Block(Tensor& t, int row, int rows, int col, int cols) {
  return BlockView(t.data() + static_cast<size_t>(row) * t.cols() + col, rows,
                   cols, Eigen::OuterStride<>(t.cols()));
}
inline ConstBlockView Block(const Tensor& t, int row, int rows, int col,
                            int cols) {
  return ConstBlockView(t.data() + static_cast<size_t>(row) * t.cols() + col,
                        rows, cols, Eigen::OuterStride<>(t.cols()));
}

}  // namespace narp::internal

#endif  // NARP_SRC_EIGEN_VIEW_H_
