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

// Dynamic soft-label assignment. Every (ground truth, anchor) pair gets
//   cost = w_cls * cls_cost + w_iou * iou_cost + w_center * center_cost
// where cls_cost is cross entropy modulated by the squared gap to the soft
// label (the IoU of the pair), iou_cost = -ln IoU, and center_cost penalizes
// distance between the anchor point and the box center. Each ground truth
// then takes its dynamic-k cheapest candidate anchors.

#include <span>
#include <string>
#include <vector>

#include "a4d/geometry.hpp"
#include "a4d/model.hpp"

namespace a4d {

enum class CenterCostMode { kPaperLiteral, kSoftCenterPrior };

const char* center_cost_mode_name(CenterCostMode m);
CenterCostMode parse_center_cost_mode(const std::string& s);  // throws ConfigError

struct AssignConfig {
  double cls_weight = 1.0;
  double iou_weight = 3.0;
  double center_weight = 1.0;
  CenterCostMode center_mode = CenterCostMode::kSoftCenterPrior;
  // literal mode: eta / max(d - epsilon, center_floor)
  double eta = 1.0;
  double epsilon = 0.0;
  double center_floor = 1e-7;
  // soft prior: alpha^(d - beta)
  double alpha = 10.0;
  double beta = 3.0;
  int dynamic_k_cap = 10;
  double iou_floor = 1e-7;
  double prob_clamp = 1e-7;
};

// Throws ConfigError for non-positive weights, negative epsilon, cap < 1 etc.
void validate(const AssignConfig& cfg);

// CE(pred, y) * (y - pred)^2 with pred clamped to [clamp, 1 - clamp].
double classification_cost(double pred, double soft_label, double clamp = 1e-7);
// -ln(max(iou, floor)).
double location_cost(double iou, double floor = 1e-7);
// `distance` is the center offset already divided by the stride.
double center_cost(double distance, const AssignConfig& cfg);
double total_cost(double cls, double loc, double center, const AssignConfig& cfg);

// (num_gt, num_anchors) costs, +inf for non-candidates, and the matching IoUs.
struct CostMatrix {
  int num_gt = 0;
  int num_anchors = 0;
  std::vector<double> cost;
  std::vector<double> iou;

  CostMatrix() = default;
  CostMatrix(int gts, int anchors);
  double& cost_at(int g, int a) { return cost[static_cast<std::size_t>(g) * num_anchors + a]; }
  double cost_at(int g, int a) const { return cost[static_cast<std::size_t>(g) * num_anchors + a]; }
  double& iou_at(int g, int a) { return iou[static_cast<std::size_t>(g) * num_anchors + a]; }
  double iou_at(int g, int a) const { return iou[static_cast<std::size_t>(g) * num_anchors + a]; }
  bool candidate(int g, int a) const;
};

struct AssignProblem {
  std::span<const AnchorPoint> anchors;
  std::span<const BoxCorner> pred_boxes;  // one per anchor
  std::span<const double> pred_probs;     // (anchors, classes), post-sigmoid
  int num_classes = 0;
  std::span<const BoxCorner> gt_boxes;
  std::span<const int> gt_classes;  // class index in [0, num_classes)
};

// Candidates are anchors whose point lies strictly inside the GT box.
CostMatrix build_cost_matrix(const AssignProblem& problem, const AssignConfig& cfg);

struct Assignment {
  std::vector<int> anchor_gt;        // -1 = background
  std::vector<double> soft_label;    // IoU with the matched GT, 0 for background
  std::vector<std::vector<int>> gt_anchors;  // ascending anchor index
  std::vector<int> dynamic_k;        // 0 for GTs without candidates
  std::vector<int> unassigned_gts;   // GTs left without any anchor
  int num_positive() const;
};

// Per GT: k = clamp(round(sum of its top-min(cap, #candidates) IoUs), 1,
// #candidates), then the k cheapest candidates (ties -> lower anchor index).
// An anchor claimed by several GTs stays with the cheapest one (ties -> lower
// GT index). A GT that loses all its anchors this way falls back to its
// cheapest candidate no GT holds, if any.
Assignment dynamic_assign(const CostMatrix& costs, const AssignConfig& cfg);

}  // namespace a4d
