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
#include "a4d/neck.hpp"

#include "a4d/error.hpp"

namespace a4d {
namespace {

constexpr std::array<BlockSlot, 4> kAllSlots = {BlockSlot::kTopDown5, BlockSlot::kTopDown4, BlockSlot::kBottomUp4,
                                                BlockSlot::kBottomUp5};

std::vector<BlockSlot> slots_for(Placement p) {
  switch (p) {
    case Placement::kTopDownOnly:
      return {BlockSlot::kTopDown5, BlockSlot::kTopDown4};
    case Placement::kBottomUpOnly:
      return {BlockSlot::kBottomUp4, BlockSlot::kBottomUp5};
    case Placement::kSingleAtEnd:
      return {BlockSlot::kBottomUp5};
    case Placement::kBoth:
      return {kAllSlots.begin(), kAllSlots.end()};
  }
  return {};
}

int slot_level(BlockSlot s) { return (s == BlockSlot::kTopDown5 || s == BlockSlot::kBottomUp5) ? 5 : 4; }

Attention4DConfig block_config(const NeckConfig& cfg, BlockSlot s) {
  Attention4DConfig a;
  a.channels = cfg.out_channels;
  a.heads = cfg.heads;
  a.key_dim = cfg.key_dim;
  a.value_dim = cfg.value_dim;
  a.residual = cfg.residual;
  const int mult = slot_level(s) == 5 ? 1 : 2;
  a.height = cfg.p5_height * mult;
  a.width = cfg.p5_width * mult;
  return a;
}

Var apply_slot(Graph& g, const NeckParams& p, BlockSlot s, Var x, const ops::BatchNormOptions& bn) {
  const auto& blk = p.blocks[static_cast<int>(s)];
  return blk ? attention4d_forward(g, x, *blk, bn) : x;
}

Var downsample(Graph& g, const NeckParams& p, const ConvBn& conv, Var x, const ops::BatchNormOptions& bn) {
  if (p.cfg.downsample == DownsampleKind::kAvgPool) return ops::avgpool2x(g, x);
  return conv_bn_act(g, conv, x, bn);
}

}  // namespace

const char* placement_name(Placement p) {
  switch (p) {
    case Placement::kTopDownOnly:
      return "top_down_only";
    case Placement::kBottomUpOnly:
      return "bottom_up_only";
    case Placement::kSingleAtEnd:
      return "single_at_end";
    case Placement::kBoth:
      return "both";
  }
  return "?";
}

Placement parse_placement(const std::string& s) {
  for (Placement p : {Placement::kTopDownOnly, Placement::kBottomUpOnly, Placement::kSingleAtEnd, Placement::kBoth}) {
    if (s == placement_name(p)) return p;
  }
  throw ConfigError("unknown placement '" + s + "' (expected top_down_only, bottom_up_only, single_at_end, both)");
}

const char* slot_name(BlockSlot s) {
  switch (s) {
    case BlockSlot::kTopDown5:
      return "top_down.p5";
    case BlockSlot::kTopDown4:
      return "top_down.p4";
    case BlockSlot::kBottomUp4:
      return "bottom_up.p4";
    case BlockSlot::kBottomUp5:
      return "bottom_up.p5";
  }
  return "?";
}

const char* downsample_name(DownsampleKind d) { return d == DownsampleKind::kConv ? "conv" : "avgpool"; }

DownsampleKind parse_downsample(const std::string& s) {
  if (s == "conv") return DownsampleKind::kConv;
  if (s == "avgpool") return DownsampleKind::kAvgPool;
  throw ConfigError("unknown downsample '" + s + "' (expected conv or avgpool)");
}

std::vector<BlockSlot> attention_layout(const NeckConfig& cfg) {
  if (cfg.out_channels <= 0 || cfg.out_channels % 2) throw ConfigError("neck: out_channels must be positive and even");
  for (int c : cfg.in_channels) {
    if (c <= 0) throw ConfigError("neck: in_channels must be positive");
  }
  if (cfg.csp_depth < 0) throw ConfigError("neck: csp_depth must be >= 0");
  if (cfg.p5_height <= 0 || cfg.p5_width <= 0) throw ConfigError("neck: p5 spatial size must be positive");
  std::vector<BlockSlot> slots = slots_for(cfg.placement);
  if (cfg.num_attention_blocks < 1 || cfg.num_attention_blocks > static_cast<int>(slots.size())) {
    throw ConfigError("neck: num_attention_blocks=" + std::to_string(cfg.num_attention_blocks) + " but placement " +
                      placement_name(cfg.placement) + " offers 1.." + std::to_string(slots.size()));
  }
  slots.resize(cfg.num_attention_blocks);
  return slots;
}

CspLayer make_csp_layer(ParamSet& ps, const std::string& prefix, int in, int out, int depth, Rng& rng,
                        bool zero_fuse) {
  if (out <= 0 || out % 2) throw InvalidInput(prefix + ": CSP output channels must be positive and even");
  CspLayer l;
  l.in = in;
  l.out = out;
  const int mid = out / 2;
  l.main = make_conv_bn(ps, prefix + ".main", in, mid, 1, 1, rng);
  l.skip = make_conv_bn(ps, prefix + ".skip", in, mid, 1, 1, rng);
  for (int i = 0; i < depth; ++i) {
    const std::string b = prefix + ".block" + std::to_string(i);
    l.bottlenecks.push_back({make_conv_bn(ps, b + ".conv1", mid, mid, 1, 1, rng),
                             make_conv_bn(ps, b + ".conv2", mid, mid, 1, 1, rng)});
  }
  l.fuse = make_conv_bn(ps, prefix + ".fuse", 2 * mid, out, 1, 1, rng, zero_fuse);
  return l;
}

std::size_t csp_layer_param_count(int in, int out, int depth) {
  const int mid = out / 2;
  return 2 * conv_bn_param_count(in, mid, 1) +
         static_cast<std::size_t>(depth) * 2 * conv_bn_param_count(mid, mid, 1) + conv_bn_param_count(2 * mid, out, 1);
}

Var csp_layer(Graph& g, const CspLayer& l, Var x, const ops::BatchNormOptions& bn) {
  const Tensor& xv = g.value(x);
  require_feature_map(xv, "csp_layer");
  if (xv.dim(1) != l.in) {
    throw InvalidInput("csp_layer: expected " + std::to_string(l.in) + " input channels, got " +
                       std::to_string(xv.dim(1)));
  }
  Var main = conv_bn_act(g, l.main, x, bn);
  for (const auto& blk : l.bottlenecks) {
    const Var h = conv_bn_act(g, blk[1], conv_bn_act(g, blk[0], main, bn), bn);
    main = ops::add(g, main, h);
  }
  const Var skip = conv_bn_act(g, l.skip, x, bn);
  return conv_bn_act(g, l.fuse, ops::concat_channels(g, main, skip), bn);
}

NeckParams init_neck(ParamSet& ps, const std::string& prefix, const NeckConfig& cfg, Rng& rng) {
  NeckParams p;
  p.cfg = cfg;
  p.layout = attention_layout(cfg);
  const int c = cfg.out_channels;
  for (int i = 0; i < 3; ++i) {
    p.lateral[i] = make_conv_bn(ps, prefix + ".lateral" + std::to_string(i + 3), cfg.in_channels[i], c, 1, 1, rng);
  }
  p.td4 = make_csp_layer(ps, prefix + ".top_down.csp4", 2 * c, c, cfg.csp_depth, rng);
  p.td3 = make_csp_layer(ps, prefix + ".top_down.csp3", 2 * c, c, cfg.csp_depth, rng);
  p.bu4 = make_csp_layer(ps, prefix + ".bottom_up.csp4", 2 * c, c, cfg.csp_depth, rng);
  p.bu5 = make_csp_layer(ps, prefix + ".bottom_up.csp5", 2 * c, c, cfg.csp_depth, rng);
  if (cfg.downsample == DownsampleKind::kConv) {
    p.down3 = make_conv_bn(ps, prefix + ".bottom_up.down3", c, c, 3, 2, rng);
    p.down4 = make_conv_bn(ps, prefix + ".bottom_up.down4", c, c, 3, 2, rng);
  }
  for (BlockSlot s : p.layout) {
    p.blocks[static_cast<int>(s)] = init_attention4d(ps, prefix + ".attn." + slot_name(s), block_config(cfg, s), rng);
  }
  return p;
}

std::array<Shape, 3> neck_output_shapes(const NeckConfig& cfg, const std::array<Shape, 3>& in) {
  for (int i = 0; i < 3; ++i) {
    if (in[i].size() != 4) throw InvalidInput("neck: level inputs must be rank 4, got " + shape_str(in[i]));
    if (in[i][1] != cfg.in_channels[i]) {
      throw InvalidInput("neck: level " + std::to_string(i + 3) + " expects " + std::to_string(cfg.in_channels[i]) +
                         " channels, got " + shape_str(in[i]));
    }
    if (in[i][0] != in[0][0]) throw InvalidInput("neck: batch sizes differ across levels");
  }
  const int h5 = in[2][2], w5 = in[2][3];
  if (in[1][2] != 2 * h5 || in[1][3] != 2 * w5 || in[0][2] != 4 * h5 || in[0][3] != 4 * w5) {
    throw InvalidInput("neck: spatial sizes must halve level to level, got " + shape_str(in[0]) + " " +
                       shape_str(in[1]) + " " + shape_str(in[2]));
  }
  if (h5 != cfg.p5_height || w5 != cfg.p5_width) {
    throw InvalidInput("neck: built for a stride-32 size of (" + std::to_string(cfg.p5_height) + ", " +
                       std::to_string(cfg.p5_width) + "), got (" + std::to_string(h5) + ", " + std::to_string(w5) +
                       ")");
  }
  attention_layout(cfg);
  const int b = in[0][0], c = cfg.out_channels;
  return {Shape{b, c, in[0][2], in[0][3]}, Shape{b, c, in[1][2], in[1][3]}, Shape{b, c, h5, w5}};
}

PyramidFeatures neck_forward(Graph& g, const PyramidFeatures& c, const NeckParams& p, const ops::BatchNormOptions& bn) {
  neck_output_shapes(p.cfg, {g.shape(c.p3), g.shape(c.p4), g.shape(c.p5)});
  const Var l3 = conv_bn_act(g, p.lateral[0], c.p3, bn);
  const Var l4 = conv_bn_act(g, p.lateral[1], c.p4, bn);
  const Var l5 = conv_bn_act(g, p.lateral[2], c.p5, bn);

  const Var a5 = apply_slot(g, p, BlockSlot::kTopDown5, l5, bn);
  Var a4 = csp_layer(g, p.td4, ops::concat_channels(g, ops::upsample2x(g, a5), l4), bn);
  a4 = apply_slot(g, p, BlockSlot::kTopDown4, a4, bn);
  const Var q3 = csp_layer(g, p.td3, ops::concat_channels(g, ops::upsample2x(g, a4), l3), bn);

  Var q4 = csp_layer(g, p.bu4, ops::concat_channels(g, downsample(g, p, p.down3, q3, bn), a4), bn);
  q4 = apply_slot(g, p, BlockSlot::kBottomUp4, q4, bn);
  Var q5 = csp_layer(g, p.bu5, ops::concat_channels(g, downsample(g, p, p.down4, q4, bn), a5), bn);
  q5 = apply_slot(g, p, BlockSlot::kBottomUp5, q5, bn);
  return {q3, q4, q5};
}

std::size_t parameter_count(const NeckConfig& cfg) {
  const int c = cfg.out_channels;
  std::size_t n = 0;
  for (int i = 0; i < 3; ++i) n += conv_bn_param_count(cfg.in_channels[i], c, 1);
  n += 4 * csp_layer_param_count(2 * c, c, cfg.csp_depth);
  if (cfg.downsample == DownsampleKind::kConv) n += 2 * conv_bn_param_count(c, c, 3);
  for (const BlockInfo& b : describe_blocks(cfg)) n += b.params;
  return n;
}

std::vector<BlockInfo> describe_blocks(const NeckConfig& cfg) {
  std::vector<BlockInfo> out;
  for (BlockSlot s : attention_layout(cfg)) {
    const Attention4DConfig a = block_config(cfg, s);
    out.push_back({s, slot_level(s), a.height, a.width, attention4d_param_count(a)});
  }
  return out;
}

}  // namespace a4d
