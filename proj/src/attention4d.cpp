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
#include "a4d/attention4d.hpp"

#include <cmath>

#include "a4d/error.hpp"

namespace a4d {

double Attention4DConfig::effective_scale() const {
  return scale > 0.0 ? scale : 1.0 / std::sqrt(static_cast<double>(key_dim));
}

void validate(const Attention4DConfig& cfg) {
  if (cfg.channels <= 0 || cfg.heads <= 0 || cfg.key_dim <= 0 || cfg.value_dim < 0 || cfg.height <= 0 ||
      cfg.width <= 0) {
    throw ConfigError("attention4d: channels, heads, key_dim and spatial size must be positive");
  }
  if (cfg.heads * cfg.key_dim > 8 * cfg.channels) {
    throw ConfigError("attention4d: heads * key_dim exceeds 8 * channels");
  }
}

Attention4DParams init_attention4d(ParamSet& ps, const std::string& prefix, const Attention4DConfig& cfg,
                                   Rng& rng) {
  validate(cfg);
  Attention4DParams p;
  p.cfg = cfg;
  const int hd = cfg.heads * cfg.key_dim;
  const int hv = cfg.heads * cfg.effective_value_dim();
  const int n = cfg.tokens();
  p.query = make_conv_bn(ps, prefix + ".q", cfg.channels, hd, 1, 1, rng);
  p.key = make_conv_bn(ps, prefix + ".k", cfg.channels, hd, 1, 1, rng);
  p.value = make_conv_bn(ps, prefix + ".v", cfg.channels, hv, 1, 1, rng);
  p.pos_bias = ps.add(prefix + ".pos_bias", Tensor({cfg.heads, n, n}));
  Tensor eye({cfg.heads, cfg.heads});
  for (int i = 0; i < cfg.heads; ++i) eye[i * cfg.heads + i] = 1.0;
  p.talk_pre = ps.add(prefix + ".talk_pre", eye);
  p.talk_post = ps.add(prefix + ".talk_post", eye);
  p.proj = make_conv_bn(ps, prefix + ".proj", hv, cfg.channels, 1, 1, rng, /*zero_weights=*/true);
  return p;
}

Var attention4d_forward(Graph& g, Var x, const Attention4DParams& p, const ops::BatchNormOptions& bn) {
  const Attention4DConfig& cfg = p.cfg;
  const Tensor& xv = g.value(x);
  require_feature_map(xv, "attention4d");
  if (xv.dim(2) != cfg.height || xv.dim(3) != cfg.width) {
    throw InvalidInput("attention4d: expected spatial size (" + std::to_string(cfg.height) + ", " +
                       std::to_string(cfg.width) + "), got (" + std::to_string(xv.dim(2)) + ", " +
                       std::to_string(xv.dim(3)) + ")");
  }
  if (xv.dim(1) != cfg.channels) {
    throw InvalidInput("attention4d: expected " + std::to_string(cfg.channels) + " channels, got " +
                       std::to_string(xv.dim(1)));
  }
  const int nb = xv.dim(0), h = cfg.heads, d = cfg.key_dim, dv = cfg.effective_value_dim(), n = cfg.tokens();

  const Var q = ops::reshape(g, conv_bn(g, p.query, x, bn), {nb, h, d, n});
  const Var k = ops::reshape(g, conv_bn(g, p.key, x, bn), {nb, h, d, n});
  const Var v = ops::reshape(g, conv_bn(g, p.value, x, bn), {nb, h, dv, n});

  // logits[b, h, i, j] = scale * <q_i, k_j> + bias[h, i, j]
  Var logits = ops::matmul_tokens(g, ops::transpose_last2(g, q), k);
  logits = ops::scale(g, logits, cfg.effective_scale());
  logits = ops::add_head_bias(g, logits, g.param(p.pos_bias));
  logits = ops::mix_heads(g, logits, g.param(p.talk_pre));
  Var attn = ops::softmax_lastdim(g, logits);
  attn = ops::mix_heads(g, attn, g.param(p.talk_post));

  // out[b, h, c, i] = sum_j attn[b, h, i, j] * v[b, h, c, j]
  Var out = ops::matmul_tokens(g, v, ops::transpose_last2(g, attn));
  out = ops::reshape(g, out, {nb, h * dv, cfg.height, cfg.width});
  const Var y = conv_bn(g, p.proj, out, bn);
  return cfg.residual ? ops::add(g, x, y) : y;
}

std::size_t attention4d_param_count(int channels, int heads, int key_dim, int value_dim, int height, int width) {
  const int dv = value_dim > 0 ? value_dim : key_dim;
  const std::size_t n = static_cast<std::size_t>(height) * width;
  return 2 * conv_bn_param_count(channels, heads * key_dim, 1) + conv_bn_param_count(channels, heads * dv, 1) +
         conv_bn_param_count(heads * dv, channels, 1) + static_cast<std::size_t>(heads) * n * n +
         2 * static_cast<std::size_t>(heads) * heads;
}

std::size_t attention4d_param_count(const Attention4DConfig& cfg) {
  return attention4d_param_count(cfg.channels, cfg.heads, cfg.key_dim, cfg.value_dim, cfg.height, cfg.width);
}

}  // namespace a4d
