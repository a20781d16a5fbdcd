// Copyright 2026 The smpkws Authors.
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

#include "smpkws/tensor.h"

#include <functional>
#include <numeric>
#include <sstream>

#include "smpkws/errors.h"

namespace smpkws {

std::size_t ShapeVolume(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(ShapeVolume(shape_), fill) {
  CacheExtents();
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  CacheExtents();
  if (values_.size() != ShapeVolume(shape_)) {
    throw DimensionError("tensor of shape " + shape_string() + " given " +
                         std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::Matrix(std::size_t rows, std::size_t cols, double fill) {
  return Tensor({rows, cols}, fill);
}

Tensor Tensor::Matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::Vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::Scalar(double value) { return Tensor({1}, std::vector<double>{value}); }

Tensor Tensor::Identity(std::size_t n) {
  Tensor t = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

void Tensor::CacheExtents() {
  if (shape_.empty()) {
    rows_ = cols_ = 0;
  } else if (shape_.size() == 1) {
    rows_ = 1;
    cols_ = shape_[0];
  } else {
    rows_ = shape_[0];
    cols_ = ShapeVolume(std::vector<std::size_t>(shape_.begin() + 1, shape_.end()));
  }
}

std::vector<double>& Tensor::grad() {
  if (!grad_) grad_.emplace(values_.size(), 0.0);
  return *grad_;
}

const std::vector<double>& Tensor::grad() const {
  if (!grad_) throw NumericError("tensor has no gradient accumulator");
  return *grad_;
}

void Tensor::zero_grad() { grad_.emplace(values_.size(), 0.0); }

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
  os << ']';
  return os.str();
}

}  // namespace smpkws
