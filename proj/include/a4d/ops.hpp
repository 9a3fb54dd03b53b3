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

// Differentiable operations recorded on a Graph.
//
// Shapes are never broadcast except for per-channel parameters (conv bias,
// batch-norm scale/shift) and the per-head positional bias; any other
// mismatch raises InvalidInput.

#include "a4d/graph.hpp"

namespace a4d::ops {

// x (b, in, h, w), w (out, in), bias (out) -> (b, out, h, w)
Var conv1x1(Graph& g, Var x, Var w, Var bias);

// 3x3 kernel, zero padding 1. x (b, in, h, w), w (out, in, 3, 3), bias (out).
// Output spatial size is ceil(h / stride) x ceil(w / stride).
Var conv3x3(Graph& g, Var x, Var w, Var bias, int stride);

struct BatchNormState {
  Param* running_mean = nullptr;
  Param* running_var = nullptr;
};

struct BatchNormOptions {
  double eps = 1e-5;
  double momentum = 0.1;
  bool train = true;
};

// Per-channel normalization over (batch, rows, cols). Train mode uses batch
// statistics and updates the running estimates by EMA (unbiased variance);
// eval mode normalizes with the running estimates.
Var batchnorm(Graph& g, Var x, Var gamma, Var beta, const BatchNormState& state,
              const BatchNormOptions& opt);

Var silu(Graph& g, Var x);
Var softplus(Graph& g, Var x);

Var add(Graph& g, Var a, Var b);
Var scale(Graph& g, Var x, double s);

// Softmax along the last axis, max-subtracted.
Var softmax_lastdim(Graph& g, Var x);

// Batched matrix product: a (..., m, k) x b (..., k, n) -> (..., m, n).
// Leading dimensions must agree exactly.
Var matmul_tokens(Graph& g, Var a, Var b);

Var transpose_last2(Graph& g, Var x);
Var reshape(Graph& g, Var x, Shape shape);

// Concatenate two feature maps along channels.
Var concat_channels(Graph& g, Var a, Var b);

// Nearest-neighbour x2 upsampling of a feature map.
Var upsample2x(Graph& g, Var x);
// 2x2 stride-2 average pooling; spatial sizes must be even.
Var avgpool2x(Graph& g, Var x);

// logits (b, h, ...) + bias (h, ...), bias shared across the batch.
Var add_head_bias(Graph& g, Var logits, Var bias);

// out[b, i, ...] = sum_j t[i, j] * x[b, j, ...] with t (h, h).
Var mix_heads(Graph& g, Var x, Var t);

// Scalar readouts.
Var sum(Graph& g, Var x);
Var sum_squares(Graph& g, Var x);
// sum(x * w) with a fixed weight tensor of x's shape.
Var weighted_sum(Graph& g, Var x, const Tensor& w);

}  // namespace a4d::ops
