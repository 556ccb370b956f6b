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

#include "narp/tensor.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace narp {
namespace {

size_t ShapeProduct(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
    n *= static_cast<size_t>(d);
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape, float fill)
    : shape_(std::move(shape)), values_(ShapeProduct(shape_), fill) {}

Tensor::Tensor(std::vector<int> shape, std::vector<float> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != ShapeProduct(shape_)) {
    throw std::invalid_argument("tensor value count " +
                                std::to_string(values_.size()) +
                                " does not match shape " + ShapeString());
  }
}

int Tensor::rows() const {
  if (rank() == 2) return shape_[0];
  if (rank() <= 1) return 1;
  throw std::logic_error("matrix view of rank " + std::to_string(rank()) +
                         " tensor");
}

int Tensor::cols() const {
  if (rank() == 2) return shape_[1];
  if (rank() == 1) return shape_[0];
  if (rank() == 0) return 1;
  throw std::logic_error("matrix view of rank " + std::to_string(rank()) +
                         " tensor");
}

void Tensor::Fill(float value) {
  for (float& v : values_) v = value;
}

bool Tensor::AllFinite() const {
  for (float v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::ShapeString() const {
  std::ostringstream out;
  out << '[';
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) out << ',';
    out << shape_[i];
  }
  out << ']';
  return out.str();
}

Tensor SoftmaxRows(const Tensor& logits) {
  Tensor out = logits;
  const int n = logits.rows(), m = logits.cols();
  for (int r = 0; r < n; ++r) {
    auto x = logits.row(r);
    auto y = out.row(r);
    float mx = x[0];
    for (int j = 1; j < m; ++j) mx = std::max(mx, x[j]);
    double total = 0.0;
    for (int j = 0; j < m; ++j) total += std::exp(static_cast<double>(x[j] - mx));
    for (int j = 0; j < m; ++j) {
      y[j] = static_cast<float>(std::exp(static_cast<double>(x[j] - mx)) / total);
    }
  }
  return out;
}

Tensor LogSoftmaxRows(const Tensor& logits) {
  Tensor out = logits;
  const int n = logits.rows(), m = logits.cols();
  for (int r = 0; r < n; ++r) {
    auto x = logits.row(r);
    auto y = out.row(r);
    float mx = x[0];
    for (int j = 1; j < m; ++j) mx = std::max(mx, x[j]);
    double total = 0.0;
    for (int j = 0; j < m; ++j) total += std::exp(static_cast<double>(x[j] - mx));
    const double lse = static_cast<double>(mx) + std::log(total);
    for (int j = 0; j < m; ++j) y[j] = static_cast<float>(x[j] - lse);
  }
  return out;
}

}  // namespace narp
