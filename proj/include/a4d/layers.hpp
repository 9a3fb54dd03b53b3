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

// Conv + batch-norm building blocks shared by the attention block, the neck,
// and the detector.

#include <cstddef>
#include <string>

#include "a4d/graph.hpp"
#include "a4d/ops.hpp"
#include "a4d/rng.hpp"

namespace a4d {

struct ConvBn {
  int in = 0;
  int out = 0;
  int kernel = 1;  // 1 or 3
  int stride = 1;
  Param* weight = nullptr;
  Param* bias = nullptr;
  Param* gamma = nullptr;
  Param* beta = nullptr;
  Param* running_mean = nullptr;
  Param* running_var = nullptr;
};

// Uniform(+-sqrt(3 / fan_in)) weights, zero bias, gamma 1, beta 0, running
// mean 0, running var 1. `zero_weights` zeroes the conv instead.
ConvBn make_conv_bn(ParamSet& ps, const std::string& prefix, int in, int out, int kernel, int stride,
                    Rng& rng, bool zero_weights = false);

// Trainable scalars of a ConvBn with the given geometry.
std::size_t conv_bn_param_count(int in, int out, int kernel);

// conv -> batch norm
Var conv_bn(Graph& g, const ConvBn& layer, Var x, const ops::BatchNormOptions& bn);
// conv -> batch norm -> SiLU
Var conv_bn_act(Graph& g, const ConvBn& layer, Var x, const ops::BatchNormOptions& bn);

}  // namespace a4d
