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
#include "a4d/graph.hpp"

#include "a4d/error.hpp"
#include "a4d/kernels.hpp"

namespace a4d {

Param* ParamSet::add(std::string name, Tensor value, bool trainable) {
  if (index_.count(name)) throw InvalidInput("duplicate parameter name: " + name);
  Tensor grad(value.shape());
  params_.push_back(Param{name, std::move(value), std::move(grad), trainable});
  index_.emplace(std::move(name), params_.size() - 1);
  return &params_.back();
}

Param* ParamSet::find(std::string_view name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

const Param* ParamSet::find(std::string_view name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

std::vector<Param*> ParamSet::all() {
  std::vector<Param*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Param*> ParamSet::all() const {
  std::vector<const Param*> out;
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<Param*> ParamSet::trainable() {
  std::vector<Param*> out;
  for (auto& p : params_) {
    if (p.trainable) out.push_back(&p);
  }
  return out;
}

std::size_t ParamSet::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.trainable) n += p.value.size();
  }
  return n;
}

void ParamSet::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{"constant", std::move(value), {}, {}, nullptr, false});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::param(Param* p) {
  nodes_.push_back(Node{"param", p->value, {}, {}, p, p->trainable});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::input(Tensor value) {
  nodes_.push_back(Node{"input", std::move(value), {}, {}, nullptr, true});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::record(const char* op, Tensor value, std::initializer_list<Var> inputs,
                  BackwardFn backward) {
  if (check_finite_ && !value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by op '") + op + "'");
  }
  bool needs = false;
  for (Var in : inputs) needs = needs || nodes_[in.id].requires_grad;
  nodes_.push_back(Node{op, std::move(value), {}, needs ? std::move(backward) : BackwardFn{},
                        nullptr, needs});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tensor& Graph::grad_of(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) {
    n.grad = Tensor(n.value.shape());
  }
  return n.grad;
}

void Graph::backward(Var out) {
  if (value(out).size() != 1) {
    throw InvalidInput("backward() without a seed needs a single-element output, got " +
                       shape_str(shape(out)));
  }
  backward(out, Tensor(shape(out), 1.0));
}

void Graph::backward(Var out, const Tensor& seed) {
  if (seed.shape() != shape(out)) throw InvalidInput("backward seed shape mismatch");
  for (auto& n : nodes_) n.grad = Tensor();
  nodes_[out.id].grad = seed;
  const auto& k = kernels::active();
  for (int id = out.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (check_finite_ && !n.grad.all_finite()) {
      throw NumericError(std::string("non-finite gradient reaching op '") + n.op + "'");
    }
    if (n.param) {
      k.axpy(static_cast<int>(n.grad.size()), 1.0, n.grad.ptr(), n.param->grad.ptr());
    } else if (n.backward) {
      n.backward(*this, n.grad);
    }
  }
}

}  // namespace a4d
