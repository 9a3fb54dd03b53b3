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

// Desk-scale detector: a small strided-conv backbone producing strides
// 8/16/32, the attention neck, and an anchor-free head predicting per-point
// class logits and (left, top, right, bottom) distances in stride units.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "a4d/detection.hpp"
#include "a4d/neck.hpp"

namespace a4d {

inline constexpr std::array<int, 3> kLevelStrides = {8, 16, 32};

struct ModelConfig {
  int num_classes = 3;
  int image_height = 64;
  int image_width = 64;
  std::array<int, 5> backbone_widths{16, 32, 64, 96, 128};
  // in_channels and the stride-32 size are derived in finalize().
  NeckConfig neck = [] {
    NeckConfig n;
    n.out_channels = 64;
    return n;
  }();
  double prior_prob = 0.01;
  ops::BatchNormOptions bn;
};

// Derives the neck inputs from the backbone widths and image size; throws
// ConfigError for sizes not divisible by 32 or non-positive widths/classes.
void finalize(ModelConfig& cfg);

struct AnchorPoint {
  double cx = 0, cy = 0;
  int stride = 0;
  int level = 0;  // 3, 4 or 5
};

// Cell centers of every level, level 3 first, row-major within a level.
std::vector<AnchorPoint> anchor_points(int image_height, int image_width);

struct BackboneParams {
  std::array<ConvBn, 5> stages;  // stride-2 3x3 conv + BN + SiLU each
  std::array<ConvBn, 3> refine;  // stride-1 3x3 on the three output levels
};

struct HeadParams {
  std::array<ConvBn, 3> tower;  // conv weights shared, batch norm per level
  Param* cls_weight = nullptr;  // (K, C)
  Param* cls_bias = nullptr;
  Param* reg_weight = nullptr;  // (4, C)
  Param* reg_bias = nullptr;
};

struct RawPredictions {
  std::array<Var, 3> cls;   // (b, K, H, W) logits
  std::array<Var, 3> dist;  // (b, 4, H, W) softplus distances, stride units
};

BackboneParams init_backbone(ParamSet& ps, const ModelConfig& cfg, Rng& rng);
HeadParams init_head(ParamSet& ps, const ModelConfig& cfg, Rng& rng);

// image (b, 3, H, W), H and W divisible by 32.
PyramidFeatures backbone_forward(Graph& g, Var image, const BackboneParams& p, const ops::BatchNormOptions& bn);
RawPredictions head_forward(Graph& g, const PyramidFeatures& p, const HeadParams& h, const ops::BatchNormOptions& bn);

// Concatenates per-level (b, C, H, W) maps into (b, anchors, C) in anchor order.
Var flatten_levels(Graph& g, const std::array<Var, 3>& levels);

// dist (b, A, 4) -> boxes (b, A, 4) = (cx - l*s, cy - t*s, cx + r*s, cy + b*s).
Var decode_boxes(Graph& g, Var dist, std::span<const AnchorPoint> points);

// Inverse of the decode arithmetic for one point.
std::array<double, 4> encode_distances(const BoxCorner& box, const AnchorPoint& p);
BoxCorner decode_distances(const std::array<double, 4>& d, const AnchorPoint& p);

struct DecodeOptions {
  double score_threshold = 0.05;
  double nms_iou = 0.65;
  int max_detections = 100;
};

// Per-image detections from flattened logits (b, A, K) and boxes (b, A, 4):
// sigmoid scores above the threshold, class-wise greedy NMS, sorted by
// descending score. category_ids maps class index to id; image_ids gives one
// id per batch row.
std::vector<std::vector<Detection>> decode(const Tensor& logits, const Tensor& boxes,
                                           std::span<const int> image_ids, std::span<const int> category_ids,
                                           const DecodeOptions& opt);

// Greedy class-wise NMS over one image's detections (input order irrelevant;
// ties broken by input position). Output sorted by descending score.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold, int max_detections);

class Detector {
 public:
  Detector(ModelConfig cfg, std::uint64_t seed);
  Detector(const Detector&) = delete;
  Detector& operator=(const Detector&) = delete;
  Detector(Detector&&) = default;
  Detector& operator=(Detector&&) = default;

  struct Output {
    RawPredictions raw;
    Var logits;  // (b, A, K)
    Var boxes;   // (b, A, 4), pixels
  };
  Output forward(Graph& g, Var image, bool train) const;

  const ModelConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  const std::vector<AnchorPoint>& anchors() const { return anchors_; }
  const NeckParams& neck() const { return neck_; }

 private:
  ModelConfig cfg_;
  ParamSet params_;
  BackboneParams backbone_;
  NeckParams neck_;
  HeadParams head_;
  std::vector<AnchorPoint> anchors_;
};

}  // namespace a4d
