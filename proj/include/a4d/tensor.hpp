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
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace a4d {

using Shape = std::vector<int>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Dense row-major N-d array of doubles. A FeatureMap is a rank-4 Tensor
// laid out as (batch, channel, row, col).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Rank-4 accessors.
  double& at(int b, int c, int y, int x) {
    return data_[((static_cast<std::size_t>(b) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }
  double at(int b, int c, int y, int x) const {
    return data_[((static_cast<std::size_t>(b) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }

  // Same storage, new shape; element counts must agree.
  Tensor reshaped(Shape shape) const;

  void fill(double v);
  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Throws InvalidInput unless `t` is rank 4.
void require_feature_map(const Tensor& t, const char* what);

}  // namespace a4d
