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

// Attention4D: multi-head self-attention over the H*W spatial tokens of a
// feature map. Queries, keys and values come from 1x1 conv + BN projections;
// logits get a learned per-head positional bias and are mixed across heads
// ("talking heads") before and after the softmax; the head outputs go through
// a 1x1 conv + BN back to the input width, optionally added to the input.

#include <cstddef>
#include <string>

#include "a4d/layers.hpp"

namespace a4d {

struct Attention4DConfig {
  int channels = 0;
  int heads = 4;
  int key_dim = 8;
  int value_dim = 0;  // 0 means key_dim
  int height = 0;
  int width = 0;
  bool residual = true;
  double scale = 0.0;  // 0 means 1/sqrt(key_dim)

  int effective_value_dim() const { return value_dim > 0 ? value_dim : key_dim; }
  double effective_scale() const;
  int tokens() const { return height * width; }
};

// Throws ConfigError for non-positive sizes or heads*key_dim > 8*channels.
void validate(const Attention4DConfig& cfg);

struct Attention4DParams {
  Attention4DConfig cfg;
  ConvBn query;       // channels -> heads*key_dim
  ConvBn key;         // channels -> heads*key_dim
  ConvBn value;       // channels -> heads*value_dim
  ConvBn proj;        // heads*value_dim -> channels
  Param* pos_bias = nullptr;   // (heads, tokens, tokens), [head, query, key]
  Param* talk_pre = nullptr;   // (heads, heads), applied to logits
  Param* talk_post = nullptr;  // (heads, heads), applied to softmax weights
};

// q/k/v projections random; positional bias zero; head mixings identity;
// output projection zero, so a residual block starts as the identity map.
Attention4DParams init_attention4d(ParamSet& ps, const std::string& prefix, const Attention4DConfig& cfg,
                                   Rng& rng);

// x (b, channels, height, width) -> same shape. Throws InvalidInput on a
// spatial or channel mismatch.
Var attention4d_forward(Graph& g, Var x, const Attention4DParams& p, const ops::BatchNormOptions& bn);

// Trainable scalar count for the given geometry (matches what
// init_attention4d allocates).
std::size_t attention4d_param_count(int channels, int heads, int key_dim, int value_dim, int height, int width);
std::size_t attention4d_param_count(const Attention4DConfig& cfg);

}  // namespace a4d
