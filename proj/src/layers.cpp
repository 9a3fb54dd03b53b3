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
#include "a4d/layers.hpp"

#include <cmath>

#include "a4d/error.hpp"

namespace a4d {

ConvBn make_conv_bn(ParamSet& ps, const std::string& prefix, int in, int out, int kernel, int stride,
                    Rng& rng, bool zero_weights) {
  if (in <= 0 || out <= 0) throw InvalidInput(prefix + ": channel counts must be positive");
  if (kernel != 1 && kernel != 3) throw InvalidInput(prefix + ": only 1x1 and 3x3 kernels are supported");
  ConvBn l;
  l.in = in;
  l.out = out;
  l.kernel = kernel;
  l.stride = stride;
  Tensor w = kernel == 1 ? Tensor({out, in}) : Tensor({out, in, 3, 3});
  if (!zero_weights) {
    const double bound = std::sqrt(3.0 / (in * kernel * kernel));
    for (auto& v : w.data()) v = rng.uniform(-bound, bound);
  }
  l.weight = ps.add(prefix + ".weight", std::move(w));
  l.bias = ps.add(prefix + ".bias", Tensor({out}));
  l.gamma = ps.add(prefix + ".bn.gamma", Tensor({out}, 1.0));
  l.beta = ps.add(prefix + ".bn.beta", Tensor({out}));
  l.running_mean = ps.add(prefix + ".bn.running_mean", Tensor({out}), false);
  l.running_var = ps.add(prefix + ".bn.running_var", Tensor({out}, 1.0), false);
  return l;
}

std::size_t conv_bn_param_count(int in, int out, int kernel) {
  return static_cast<std::size_t>(out) * in * kernel * kernel + 3 * static_cast<std::size_t>(out);
}

Var conv_bn(Graph& g, const ConvBn& l, Var x, const ops::BatchNormOptions& bn) {
  const Var w = g.param(l.weight);
  const Var b = g.param(l.bias);
  const Var y = l.kernel == 1 ? ops::conv1x1(g, x, w, b) : ops::conv3x3(g, x, w, b, l.stride);
  return ops::batchnorm(g, y, g.param(l.gamma), g.param(l.beta), {l.running_mean, l.running_var}, bn);
}

Var conv_bn_act(Graph& g, const ConvBn& l, Var x, const ops::BatchNormOptions& bn) {
  return ops::silu(g, conv_bn(g, l, x, bn));
}

}  // namespace a4d
