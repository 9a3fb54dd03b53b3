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

#include <gtest/gtest.h>

#include <cmath>

#include "a4d/error.hpp"
#include "a4d/geometry.hpp"
#include "a4d/model.hpp"
#include "oracles.hpp"

namespace a4d {
namespace {

TEST(Geometry, IouHandValues) {
  const BoxCorner a{0, 0, 10, 10};
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, {5, 0, 15, 10}), 50.0 / 150.0);
  EXPECT_DOUBLE_EQ(iou(a, {20, 20, 30, 30}), 0.0);
  EXPECT_DOUBLE_EQ(iou({1, 1, 1, 1}, {1, 1, 1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(iou(a, {0, 0, 10, 6}), 0.6);
}

TEST(Geometry, GiouHandValues) {
  const BoxCorner a{0, 0, 10, 10};
  EXPECT_DOUBLE_EQ(giou(a, a), 1.0);
  // disjoint: IoU 0, enclosing 20x10, union 200 -> 0 - 0/200
  EXPECT_DOUBLE_EQ(giou(a, {10, 0, 20, 10}), 0.0);
  // enclosing 30x30 = 900, union 200 -> -(700/900)
  EXPECT_NEAR(giou(a, {20, 20, 30, 30}), -700.0 / 900.0, 1e-15);
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(0, 50), y = rng.uniform(0, 50);
    const BoxCorner p{x, y, x + rng.uniform(0.1, 30), y + rng.uniform(0.1, 30)};
    const BoxCorner q{rng.uniform(0, 50), rng.uniform(0, 50), 0, 0};
    const BoxCorner r{q.x1, q.y1, q.x1 + rng.uniform(0.1, 30), q.y1 + rng.uniform(0.1, 30)};
    const double g = giou(p, r);
    EXPECT_LE(g, iou(p, r) + 1e-15);
    EXPECT_GE(g, -1.0);
    EXPECT_DOUBLE_EQ(g, giou(r, p));
  }
}

TEST(Geometry, IouManyMatchesScalar) {
  Rng rng(2);
  std::vector<BoxCorner> boxes;
  for (int i = 0; i < 37; ++i) {
    const double x = rng.uniform(0, 40), y = rng.uniform(0, 40);
    boxes.push_back({x, y, x + rng.uniform(0, 20), y + rng.uniform(0, 20)});
  }
  const BoxCorner a{10, 12, 30, 25};
  const std::vector<double> got = iou_many(a, boxes);
  for (std::size_t i = 0; i < boxes.size(); ++i) EXPECT_NEAR(got[i], iou(a, boxes[i]), 1e-15);
}

TEST(Geometry, CenterCornerRoundTrip) {
  const BoxCenter c{10, 20, 6, 8};
  const BoxCorner k = to_corner(c);
  EXPECT_EQ(k, (BoxCorner{7, 16, 13, 24}));
  EXPECT_EQ(to_center(k), c);
  EXPECT_EQ(from_xywh(1, 2, 3, 4), (BoxCorner{1, 2, 4, 6}));
  EXPECT_THROW(to_corner({0, 0, -1, 2}), InvalidInput);
  EXPECT_THROW(to_center({5, 0, 4, 2}), InvalidInput);
}

TEST(Geometry, SizeBuckets) {
  EXPECT_EQ(size_bucket(900), SizeBucket::kSmall);
  EXPECT_EQ(size_bucket(1023.9), SizeBucket::kSmall);
  EXPECT_EQ(size_bucket(1024), SizeBucket::kMedium);
  EXPECT_EQ(size_bucket(9215), SizeBucket::kMedium);
  EXPECT_EQ(size_bucket(9216), SizeBucket::kLarge);
  EXPECT_THROW(size_bucket(-1), InvalidInput);
  EXPECT_THROW(size_bucket(std::nan("")), InvalidInput);
}

TEST(Model, AnchorGrid) {
  const auto pts = anchor_points(64, 96);
  ASSERT_EQ(pts.size(), 8u * 12 + 4 * 6 + 2 * 3);
  EXPECT_EQ(pts[0].cx, 4.0);
  EXPECT_EQ(pts[0].stride, 8);
  EXPECT_EQ(pts[0].level, 3);
  EXPECT_EQ(pts.back().cx, 80.0);
  EXPECT_EQ(pts.back().cy, 48.0);
  EXPECT_EQ(pts.back().level, 5);
}

TEST(Model, DistanceEncodingRoundTrip) {
  const AnchorPoint p{20, 12, 8, 3};
  const BoxCorner b{3, 5, 41, 30};
  const auto d = encode_distances(b, p);
  EXPECT_DOUBLE_EQ(d[0], 17.0 / 8);
  EXPECT_DOUBLE_EQ(d[3], 18.0 / 8);
  const BoxCorner r = decode_distances(d, p);
  EXPECT_DOUBLE_EQ(r.x1, b.x1);
  EXPECT_DOUBLE_EQ(r.y1, b.y1);
  EXPECT_DOUBLE_EQ(r.x2, b.x2);
  EXPECT_DOUBLE_EQ(r.y2, b.y2);
}

TEST(Model, NmsIsPerClassAndKeepsHighestScore) {
  std::vector<Detection> d{{1, 1, 0.5, {0, 0, 10, 10}},
                           {1, 1, 0.9, {1, 0, 11, 10}},
                           {1, 2, 0.8, {0, 0, 10, 10}},
                           {1, 1, 0.7, {30, 30, 40, 40}}};
  const auto kept = nms(d, 0.5, 100);
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_EQ(kept[0].score, 0.9);
  EXPECT_EQ(kept[1].category_id, 2);
  EXPECT_EQ(kept[2].score, 0.7);
  EXPECT_EQ(nms(d, 0.5, 1).size(), 1u);
}

TEST(Model, DecodeThresholdsAndMapsIds) {
  Tensor logits({1, 2, 2}, std::vector<double>{3.0, -5.0, -5.0, 0.5});
  Tensor boxes({1, 2, 4}, std::vector<double>{0, 0, 10, 10, 20, 20, 30, 30});
  const std::vector<int> img{7}, cats{4, 9};
  DecodeOptions opt;
  opt.score_threshold = 0.5;
  const auto out = decode(logits, boxes, img, cats, opt);
  ASSERT_EQ(out.size(), 1u);
  ASSERT_EQ(out[0].size(), 2u);
  EXPECT_EQ(out[0][0].category_id, 4);
  EXPECT_EQ(out[0][0].image_id, 7);
  EXPECT_NEAR(out[0][0].score, 1.0 / (1.0 + std::exp(-3.0)), 1e-15);
  EXPECT_EQ(out[0][1].category_id, 9);
  EXPECT_THROW(decode(logits, boxes, std::vector<int>{1, 2}, cats, opt), InvalidInput);
}

TEST(Model, ForwardShapesAndPriorBias) {
  ModelConfig cfg;
  cfg.backbone_widths = {4, 4, 8, 8, 8};
  cfg.neck.out_channels = 8;
  cfg.neck.heads = 2;
  cfg.neck.key_dim = 2;
  const Detector det(cfg, 1);
  const int na = static_cast<int>(det.anchors().size());
  EXPECT_EQ(na, 64 + 16 + 4);
  Rng rng(0);
  Graph g;
  const auto out = det.forward(g, g.constant(oracle::random_tensor({2, 3, 64, 64}, rng)), false);
  EXPECT_EQ(g.shape(out.logits), (Shape{2, na, 3}));
  EXPECT_EQ(g.shape(out.boxes), (Shape{2, na, 4}));
  // fresh head: logits sit near the prior
  double mean = 0;
  const Tensor& lg = g.value(out.logits);
  for (std::size_t i = 0; i < lg.size(); ++i) mean += lg[i];
  mean /= lg.size();
  EXPECT_NEAR(mean, std::log(0.01 / 0.99), 0.5);
  const Tensor& bx = g.value(out.boxes);
  for (int a = 0; a < na; ++a) {
    EXPECT_LE(bx[4 * a], det.anchors()[a].cx);
    EXPECT_GE(bx[4 * a + 2], det.anchors()[a].cx);
  }
}

TEST(Model, FinalizeRejectsBadSizes) {
  ModelConfig cfg;
  cfg.image_height = 48;
  EXPECT_THROW(finalize(cfg), ConfigError);
  cfg = ModelConfig{};
  cfg.num_classes = 0;
  EXPECT_THROW(finalize(cfg), ConfigError);
  cfg = ModelConfig{};
  cfg.image_height = cfg.image_width = 128;
  finalize(cfg);
  EXPECT_EQ(cfg.neck.p5_height, 4);
  EXPECT_EQ(cfg.neck.in_channels[2], cfg.backbone_widths[4]);
}

TEST(Model, SameSeedSameWeights) {
  ModelConfig cfg;
  const Detector a(cfg, 5), b(cfg, 5), c(cfg, 6);
  const auto pa = a.params().all(), pb = b.params().all(), pc = c.params().all();
  ASSERT_EQ(pa.size(), pb.size());
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i]->name, pb[i]->name);
    for (std::size_t j = 0; j < pa[i]->value.size(); ++j) {
      EXPECT_EQ(pa[i]->value[j], pb[i]->value[j]);
      differs |= pa[i]->value[j] != pc[i]->value[j];
    }
  }
  EXPECT_TRUE(differs);
}

}  // namespace
}  // namespace a4d
