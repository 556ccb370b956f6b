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

#ifndef NARP_TENSOR_H_
#define NARP_TENSOR_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace narp {

// Dense row-major float32 array. Rank 0 holds a single scalar; rank 1 is
// treated as a single row when a matrix view is needed.
class Tensor {
 public:
  Tensor() : values_(1, 0.0f) {}
  explicit Tensor(std::vector<int> shape, float fill = 0.0f);
  Tensor(std::vector<int> shape, std::vector<float> values);

  static Tensor Scalar(float value) { return Tensor({}, {value}); }
  static Tensor Matrix(int rows, int cols, float fill = 0.0f) {
    return Tensor({rows, cols}, fill);
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_.at(axis); }
  size_t size() const { return values_.size(); }

  // Matrix view: rank 2 is (dim0, dim1); rank 1 is (1, dim0); rank 0 is 1x1.
  int rows() const;
  int cols() const;

  float* data() { return values_.data(); }
  const float* data() const { return values_.data(); }
  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }

  float& operator[](size_t i) { return values_[i]; }
  float operator[](size_t i) const { return values_[i]; }
  float& at(int r, int c) { return values_[static_cast<size_t>(r) * cols() + c]; }
  float at(int r, int c) const {
    return values_[static_cast<size_t>(r) * cols() + c];
  }
  std::span<float> row(int r) {
    return {values_.data() + static_cast<size_t>(r) * cols(),
            static_cast<size_t>(cols())};
  }
  std::span<const float> row(int r) const {
    return {values_.data() + static_cast<size_t>(r) * cols(),
            static_cast<size_t>(cols())};
  }

  float item() const { return values_.at(0); }
  void Fill(float value);
  bool AllFinite() const;
  bool SameShape(const Tensor& other) const { return shape_ == other.shape_; }

  std::string ShapeString() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  std::vector<int> shape_;
  std::vector<float> values_;
};

// Row-wise softmax / log-softmax over the matrix view; accumulation in double.
Tensor SoftmaxRows(const Tensor& logits);
Tensor LogSoftmaxRows(const Tensor& logits);

}  // namespace narp

#endif  // NARP_TENSOR_H_
