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
#include "a4d/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "a4d/error.hpp"

namespace a4d {
namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Plain 1x1 conv with shared weight/bias leaves.
Var head_conv(Graph& g, Var x, Param* w, Param* b) { return ops::conv1x1(g, x, g.param(w), g.param(b)); }

}  // namespace

void finalize(ModelConfig& cfg) {
  if (cfg.num_classes <= 0) throw ConfigError("model: num_classes must be positive");
  if (cfg.image_height <= 0 || cfg.image_width <= 0 || cfg.image_height % 32 || cfg.image_width % 32) {
    throw ConfigError("model: image size must be a positive multiple of 32");
  }
  for (int w : cfg.backbone_widths) {
    if (w <= 0) throw ConfigError("model: backbone widths must be positive");
  }
  if (!(cfg.prior_prob > 0.0 && cfg.prior_prob < 1.0)) throw ConfigError("model: prior_prob must be in (0, 1)");
  cfg.neck.in_channels = {cfg.backbone_widths[2], cfg.backbone_widths[3], cfg.backbone_widths[4]};
  cfg.neck.p5_height = cfg.image_height / 32;
  cfg.neck.p5_width = cfg.image_width / 32;
  attention_layout(cfg.neck);
}

std::vector<AnchorPoint> anchor_points(int image_height, int image_width) {
  std::vector<AnchorPoint> pts;
  for (int li = 0; li < 3; ++li) {
    const int s = kLevelStrides[li];
    const int h = image_height / s, w = image_width / s;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) pts.push_back({(x + 0.5) * s, (y + 0.5) * s, s, li + 3});
    }
  }
  return pts;
}

BackboneParams init_backbone(ParamSet& ps, const ModelConfig& cfg, Rng& rng) {
  BackboneParams p;
  int in = 3;
  for (int i = 0; i < 5; ++i) {
    p.stages[i] = make_conv_bn(ps, "backbone.stage" + std::to_string(i + 1), in, cfg.backbone_widths[i], 3, 2, rng);
    in = cfg.backbone_widths[i];
  }
  for (int i = 0; i < 3; ++i) {
    const int c = cfg.backbone_widths[i + 2];
    p.refine[i] = make_conv_bn(ps, "backbone.refine" + std::to_string(i + 3), c, c, 3, 1, rng);
  }
  return p;
}

HeadParams init_head(ParamSet& ps, const ModelConfig& cfg, Rng& rng) {
  HeadParams h;
  const int c = cfg.neck.out_channels;
  h.tower[0] = make_conv_bn(ps, "head.tower", c, c, 1, 1, rng);
  for (int i = 1; i < 3; ++i) {
    const std::string bn = "head.tower.bn" + std::to_string(i + 3);
    h.tower[i] = h.tower[0];
    h.tower[i].gamma = ps.add(bn + ".gamma", Tensor({c}, 1.0));
    h.tower[i].beta = ps.add(bn + ".beta", Tensor({c}));
    h.tower[i].running_mean = ps.add(bn + ".running_mean", Tensor({c}), false);
    h.tower[i].running_var = ps.add(bn + ".running_var", Tensor({c}, 1.0), false);
  }
  const double bound = std::sqrt(3.0 / c);
  Tensor cw({cfg.num_classes, c});
  for (auto& v : cw.data()) v = rng.uniform(-bound, bound) * 0.1;
  Tensor rw({4, c});
  for (auto& v : rw.data()) v = rng.uniform(-bound, bound) * 0.1;
  h.cls_weight = ps.add("head.cls.weight", std::move(cw));
  h.cls_bias = ps.add("head.cls.bias", Tensor({cfg.num_classes}, -std::log((1.0 - cfg.prior_prob) / cfg.prior_prob)));
  h.reg_weight = ps.add("head.reg.weight", std::move(rw));
  // softplus(log(e - 1)) = 1: initial boxes span one stride on each side.
  h.reg_bias = ps.add("head.reg.bias", Tensor({4}, std::log(std::exp(1.0) - 1.0)));
  return h;
}

PyramidFeatures backbone_forward(Graph& g, Var image, const BackboneParams& p, const ops::BatchNormOptions& bn) {
  const Tensor& iv = g.value(image);
  require_feature_map(iv, "backbone");
  if (iv.dim(1) != 3) throw InvalidInput("backbone: expected 3 image channels, got " + shape_str(iv.shape()));
  if (iv.dim(2) % 32 || iv.dim(3) % 32 || iv.dim(2) == 0 || iv.dim(3) == 0) {
    throw InvalidInput("backbone: image size must be divisible by 32, got " + shape_str(iv.shape()));
  }
  std::array<Var, 5> f;
  Var x = image;
  for (int i = 0; i < 5; ++i) {
    x = conv_bn_act(g, p.stages[i], x, bn);
    f[i] = x;
  }
  return {conv_bn_act(g, p.refine[0], f[2], bn), conv_bn_act(g, p.refine[1], f[3], bn),
          conv_bn_act(g, p.refine[2], f[4], bn)};
}

RawPredictions head_forward(Graph& g, const PyramidFeatures& p, const HeadParams& h, const ops::BatchNormOptions& bn) {
  RawPredictions out;
  const std::array<Var, 3> levels = {p.p3, p.p4, p.p5};
  for (int i = 0; i < 3; ++i) {
    const Var t = conv_bn_act(g, h.tower[i], levels[i], bn);
    out.cls[i] = head_conv(g, t, h.cls_weight, h.cls_bias);
    out.dist[i] = ops::softplus(g, head_conv(g, t, h.reg_weight, h.reg_bias));
  }
  return out;
}

Var flatten_levels(Graph& g, const std::array<Var, 3>& levels) {
  const int nb = g.shape(levels[0])[0], c = g.shape(levels[0])[1];
  int total = 0;
  for (Var v : levels) {
    const Shape& s = g.shape(v);
    if (s.size() != 4 || s[0] != nb || s[1] != c) throw InvalidInput("flatten_levels: inconsistent level shapes");
    total += s[2] * s[3];
  }
  Tensor out({nb, total, c});
  int offset = 0;
  for (Var v : levels) {
    const Tensor& t = g.value(v);
    const int hw = t.dim(2) * t.dim(3);
    for (int b = 0; b < nb; ++b)
      for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < hw; ++i) out[(static_cast<long>(b) * total + offset + i) * c + ch] = t[(static_cast<long>(b) * c + ch) * hw + i];
    offset += hw;
  }
  const Var l0 = levels[0], l1 = levels[1], l2 = levels[2];
  return g.record("flatten_levels", std::move(out), {l0, l1, l2}, [l0, l1, l2, nb, c, total](Graph& g, const Tensor& dy) {
    int offset = 0;
    for (Var v : {l0, l1, l2}) {
      const Shape& s = g.shape(v);
      const int hw = s[2] * s[3];
      if (g.requires_grad(v)) {
        Tensor& dx = g.grad_of(v);
        for (int b = 0; b < nb; ++b)
          for (int ch = 0; ch < c; ++ch)
            for (int i = 0; i < hw; ++i) dx[(static_cast<long>(b) * c + ch) * hw + i] += dy[(static_cast<long>(b) * total + offset + i) * c + ch];
      }
      offset += hw;
    }
  });
}

Var decode_boxes(Graph& g, Var dist, std::span<const AnchorPoint> points) {
  const Tensor& d = g.value(dist);
  if (d.rank() != 3 || d.dim(2) != 4 || d.dim(1) != static_cast<int>(points.size())) {
    throw InvalidInput("decode_boxes: expected (b, " + std::to_string(points.size()) + ", 4), got " + shape_str(d.shape()));
  }
  const int nb = d.dim(0), na = d.dim(1);
  Tensor out(d.shape());
  std::vector<double> strides(na);
  for (int b = 0; b < nb; ++b) {
    for (int a = 0; a < na; ++a) {
      const AnchorPoint& p = points[a];
      const long o = (static_cast<long>(b) * na + a) * 4;
      out[o + 0] = p.cx - d[o + 0] * p.stride;
      out[o + 1] = p.cy - d[o + 1] * p.stride;
      out[o + 2] = p.cx + d[o + 2] * p.stride;
      out[o + 3] = p.cy + d[o + 3] * p.stride;
      strides[a] = p.stride;
    }
  }
  return g.record("decode_boxes", std::move(out), {dist}, [dist, strides, nb, na](Graph& g, const Tensor& dy) {
    Tensor& dd = g.grad_of(dist);
    for (int b = 0; b < nb; ++b) {
      for (int a = 0; a < na; ++a) {
        const long o = (static_cast<long>(b) * na + a) * 4;
        dd[o + 0] -= dy[o + 0] * strides[a];
        dd[o + 1] -= dy[o + 1] * strides[a];
        dd[o + 2] += dy[o + 2] * strides[a];
        dd[o + 3] += dy[o + 3] * strides[a];
      }
    }
  });
}

std::array<double, 4> encode_distances(const BoxCorner& box, const AnchorPoint& p) {
  const double s = p.stride;
  return {(p.cx - box.x1) / s, (p.cy - box.y1) / s, (box.x2 - p.cx) / s, (box.y2 - p.cy) / s};
}

BoxCorner decode_distances(const std::array<double, 4>& d, const AnchorPoint& p) {
  const double s = p.stride;
  return {p.cx - d[0] * s, p.cy - d[1] * s, p.cx + d[2] * s, p.cy + d[3] * s};
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold, int max_detections) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<Detection> kept;
  for (std::size_t i : order) {
    const Detection& d = dets[i];
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (k.category_id == d.category_id && iou(k.box, d.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) {
      kept.push_back(d);
      if (max_detections > 0 && static_cast<int>(kept.size()) >= max_detections) break;
    }
  }
  return kept;
}

std::vector<std::vector<Detection>> decode(const Tensor& logits, const Tensor& boxes, std::span<const int> image_ids,
                                           std::span<const int> category_ids, const DecodeOptions& opt) {
  if (logits.rank() != 3 || boxes.rank() != 3 || boxes.dim(2) != 4 || logits.dim(0) != boxes.dim(0) ||
      logits.dim(1) != boxes.dim(1)) {
    throw InvalidInput("decode: expected logits (b, A, K) and boxes (b, A, 4)");
  }
  const int nb = logits.dim(0), na = logits.dim(1), nk = logits.dim(2);
  if (static_cast<int>(image_ids.size()) != nb || static_cast<int>(category_ids.size()) != nk) {
    throw InvalidInput("decode: image/category id lists do not match the prediction shape");
  }
  std::vector<std::vector<Detection>> out(nb);
  for (int b = 0; b < nb; ++b) {
    std::vector<Detection> cand;
    for (int a = 0; a < na; ++a) {
      const long bo = (static_cast<long>(b) * na + a) * 4;
      const BoxCorner box{boxes[bo], boxes[bo + 1], boxes[bo + 2], boxes[bo + 3]};
      for (int k = 0; k < nk; ++k) {
        const double s = sigmoid(logits[(static_cast<long>(b) * na + a) * nk + k]);
        if (s > opt.score_threshold) cand.push_back({image_ids[b], category_ids[k], s, box});
      }
    }
    out[b] = nms(std::move(cand), opt.nms_iou, opt.max_detections);
  }
  return out;
}

Detector::Detector(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  finalize(cfg_);
  Rng rng(seed);
  backbone_ = init_backbone(params_, cfg_, rng);
  neck_ = init_neck(params_, "neck", cfg_.neck, rng);
  head_ = init_head(params_, cfg_, rng);
  anchors_ = anchor_points(cfg_.image_height, cfg_.image_width);
}

Detector::Output Detector::forward(Graph& g, Var image, bool train) const {
  ops::BatchNormOptions bn = cfg_.bn;
  bn.train = train;
  const Shape& s = g.shape(image);
  if (s.size() != 4 || s[2] != cfg_.image_height || s[3] != cfg_.image_width) {
    throw InvalidInput("detector: expected images of size (" + std::to_string(cfg_.image_height) + ", " +
                       std::to_string(cfg_.image_width) + "), got " + shape_str(s));
  }
  const PyramidFeatures c = backbone_forward(g, image, backbone_, bn);
  const PyramidFeatures p = neck_forward(g, c, neck_, bn);
  Output out;
  out.raw = head_forward(g, p, head_, bn);
  out.logits = flatten_levels(g, out.raw.cls);
  out.boxes = decode_boxes(g, flatten_levels(g, out.raw.dist), anchors_);
  return out;
}

}  // namespace a4d
