// Copyright 2026 The a4d Authors. All Rights Reserved.
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
#include "a4d/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "a4d/error.hpp"

namespace a4d {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw InvalidInput("negative dimension in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_numel(shape_)) {
    throw InvalidInput("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
  }
}

int Tensor::dim(int axis) const {
  if (axis < 0) axis += rank();
  if (axis < 0 || axis >= rank()) throw InvalidInput("axis out of range for shape " + shape_str(shape_));
  return shape_[axis];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw InvalidInput("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_feature_map(const Tensor& t, const char* what) {
  if (t.rank() != 4) {
    throw InvalidInput(std::string(what) + ": expected a (batch, channels, height, width) map, got " +
                       shape_str(t.shape()));
  }
}

}  // namespace a4d
