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

// Top-down / bottom-up feature pyramid fusion over strides 8/16/32 with
// Attention4D blocks installed at configurable slots.
//
// Dataflow (l* are 1x1 lateral reductions of the backbone maps to
// out_channels; Att(.) is applied only when that slot is active):
//   a5 = Att_td5(l5)
//   a4 = Att_td4(csp(concat(up(a5), l4)))
//   q3 = csp(concat(up(a4), l3))
//   q4 = Att_bu4(csp(concat(down(q3), a4)))
//   q5 = Att_bu5(csp(concat(down(q4), a5)))

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "a4d/attention4d.hpp"
#include "a4d/layers.hpp"

namespace a4d {

enum class Placement { kTopDownOnly, kBottomUpOnly, kSingleAtEnd, kBoth };
enum class DownsampleKind { kConv, kAvgPool };

// Attention slot, in the fixed order used when truncating a layout.
enum class BlockSlot { kTopDown5, kTopDown4, kBottomUp4, kBottomUp5 };

const char* placement_name(Placement p);
Placement parse_placement(const std::string& s);  // throws ConfigError
const char* slot_name(BlockSlot s);
const char* downsample_name(DownsampleKind d);
DownsampleKind parse_downsample(const std::string& s);  // throws ConfigError

struct NeckConfig {
  std::array<int, 3> in_channels{32, 48, 64};
  int out_channels = 32;
  Placement placement = Placement::kTopDownOnly;
  int num_attention_blocks = 2;
  int csp_depth = 1;
  int heads = 4;
  int key_dim = 8;
  int value_dim = 0;
  bool residual = true;
  DownsampleKind downsample = DownsampleKind::kConv;
  // Spatial size of the stride-32 level; attention blocks are built for it
  // (level 4 is twice as large).
  int p5_height = 2;
  int p5_width = 2;
};

// Active slots for the config, in installation order. Throws ConfigError when
// num_attention_blocks is outside 1..(slots the placement offers), or for
// other invalid settings.
std::vector<BlockSlot> attention_layout(const NeckConfig& cfg);

struct CspLayer {
  int in = 0;
  int out = 0;
  ConvBn main;   // in -> out/2
  ConvBn skip;   // in -> out/2
  std::vector<std::array<ConvBn, 2>> bottlenecks;  // out/2 -> out/2, residual
  ConvBn fuse;   // out -> out
};

// out must be even. `zero_fuse` zeroes the final conv.
CspLayer make_csp_layer(ParamSet& ps, const std::string& prefix, int in, int out, int depth, Rng& rng,
                        bool zero_fuse = false);
std::size_t csp_layer_param_count(int in, int out, int depth);
// Split/transform/merge: the main branch runs through `depth` residual
// bottlenecks, is concatenated with the skip branch, and fused.
Var csp_layer(Graph& g, const CspLayer& layer, Var x, const ops::BatchNormOptions& bn);

struct PyramidFeatures {
  Var p3, p4, p5;
};

struct NeckParams {
  NeckConfig cfg;
  std::array<ConvBn, 3> lateral;
  CspLayer td4, td3, bu4, bu5;
  ConvBn down3, down4;  // used when downsample == kConv
  std::vector<BlockSlot> layout;
  std::array<std::optional<Attention4DParams>, 4> blocks;  // indexed by BlockSlot
};

NeckParams init_neck(ParamSet& ps, const std::string& prefix, const NeckConfig& cfg, Rng& rng);

// Throws InvalidInput if the input maps do not match cfg (channels, the
// stride-32 size, or the 4x/2x/1x spatial ratios).
PyramidFeatures neck_forward(Graph& g, const PyramidFeatures& c, const NeckParams& p,
                             const ops::BatchNormOptions& bn);

// Output shapes neck_forward would produce for these input shapes.
std::array<Shape, 3> neck_output_shapes(const NeckConfig& cfg, const std::array<Shape, 3>& inputs);

// Trainable scalar count of the neck under cfg (closed form).
std::size_t parameter_count(const NeckConfig& cfg);

struct BlockInfo {
  BlockSlot slot;
  int level;
  int height, width;
  std::size_t params;
};
std::vector<BlockInfo> describe_blocks(const NeckConfig& cfg);

}  // namespace a4d
