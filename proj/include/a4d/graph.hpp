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

#include <deque>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "a4d/tensor.hpp"

namespace a4d {

// A named learnable (or state) array with a same-shape gradient buffer.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
};

// Owns every Param of a model. Addresses are stable for the lifetime of the
// set, so layers keep raw Param pointers into it.
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(const ParamSet&) = delete;
  ParamSet& operator=(const ParamSet&) = delete;
  ParamSet(ParamSet&&) = default;
  ParamSet& operator=(ParamSet&&) = default;

  // Throws InvalidInput if `name` is taken.
  Param* add(std::string name, Tensor value, bool trainable = true);

  Param* find(std::string_view name);
  const Param* find(std::string_view name) const;

  std::vector<Param*> all();
  std::vector<const Param*> all() const;
  std::vector<Param*> trainable();

  // Scalar count of trainable values.
  std::size_t trainable_count() const;
  void zero_grad();

 private:
  std::deque<Param> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Handle to a value recorded on a Graph.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Graph;

// Receives the gradient of the node's output and adds input contributions
// through Graph::grad_of().
using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

// Tape of executed differentiable operations. Values never change after they
// are recorded; backward() walks the tape in exact reverse order and
// accumulates gradients additively, so a value consumed twice receives both
// contributions.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Value that takes no gradient.
  Var constant(Tensor value);
  // Leaf bound to a Param; backward() adds into param->grad.
  Var param(Param* p);
  // Leaf that records its gradient on the tape (read it with grad()).
  Var input(Tensor value);

  // Records an op output. `inputs` decide whether the node needs a gradient.
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Shape& shape(Var v) const { return nodes_[v.id].value.shape(); }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  const char* op_name(Var v) const { return nodes_[v.id].op; }

  // Gradient buffer of `v`, allocated as zeros on first access.
  Tensor& grad_of(Var v);
  // Gradient after backward(); empty if none reached `v`.
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }

  // Seeds d(out)/d(out) = 1 for a single-element `out` and runs the reverse pass.
  void backward(Var out);
  // Same with an explicit seed of out's shape.
  void backward(Var out, const Tensor& seed);

  // When on, every recorded value is scanned and a NaN/Inf raises
  // NumericError naming the op.
  void set_check_finite(bool on) { check_finite_ = on; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    const char* op = "";
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Param* param = nullptr;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;
  bool check_finite_ = false;
};

}  // namespace a4d
