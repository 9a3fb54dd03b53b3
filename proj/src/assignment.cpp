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
#include "a4d/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "a4d/error.hpp"

namespace a4d {

const char* center_cost_mode_name(CenterCostMode m) {
  return m == CenterCostMode::kPaperLiteral ? "paper_literal" : "soft_center_prior";
}

CenterCostMode parse_center_cost_mode(const std::string& s) {
  if (s == "paper_literal") return CenterCostMode::kPaperLiteral;
  if (s == "soft_center_prior") return CenterCostMode::kSoftCenterPrior;
  throw ConfigError("unknown center_cost_mode '" + s + "' (expected paper_literal or soft_center_prior)");
}

void validate(const AssignConfig& cfg) {
  if (!(cfg.cls_weight > 0 && cfg.iou_weight > 0 && cfg.center_weight > 0)) {
    throw ConfigError("assignment: cost weights must be positive");
  }
  if (!(cfg.epsilon >= 0)) throw ConfigError("assignment: epsilon must be >= 0");
  if (!(cfg.eta > 0) || !(cfg.center_floor > 0)) throw ConfigError("assignment: eta and center_floor must be positive");
  if (!(cfg.alpha > 1)) throw ConfigError("assignment: alpha must exceed 1");
  if (cfg.dynamic_k_cap < 1) throw ConfigError("assignment: dynamic_k_cap must be >= 1");
  if (!(cfg.iou_floor > 0 && cfg.iou_floor < 1)) throw ConfigError("assignment: iou_floor must be in (0, 1)");
  if (!(cfg.prob_clamp > 0 && cfg.prob_clamp < 0.5)) throw ConfigError("assignment: prob_clamp must be in (0, 0.5)");
}

double classification_cost(double pred, double soft_label, double clamp) {
  const double p = std::clamp(pred, clamp, 1.0 - clamp);
  const double ce = -(soft_label * std::log(p) + (1.0 - soft_label) * std::log(1.0 - p));
  const double gap = soft_label - p;
  return ce * gap * gap;
}

double location_cost(double iou, double floor) { return -std::log(std::max(iou, floor)); }

double center_cost(double distance, const AssignConfig& cfg) {
  if (cfg.center_mode == CenterCostMode::kSoftCenterPrior) return std::pow(cfg.alpha, distance - cfg.beta);
  return cfg.eta / std::max(distance - cfg.epsilon, cfg.center_floor);
}

double total_cost(double cls, double loc, double center, const AssignConfig& cfg) {
  return cfg.cls_weight * cls + cfg.iou_weight * loc + cfg.center_weight * center;
}

CostMatrix::CostMatrix(int gts, int anchors)
    : num_gt(gts),
      num_anchors(anchors),
      cost(static_cast<std::size_t>(gts) * anchors, std::numeric_limits<double>::infinity()),
      iou(static_cast<std::size_t>(gts) * anchors, 0.0) {}

bool CostMatrix::candidate(int g, int a) const { return std::isfinite(cost_at(g, a)); }

CostMatrix build_cost_matrix(const AssignProblem& pr, const AssignConfig& cfg) {
  const int na = static_cast<int>(pr.anchors.size());
  const int ng = static_cast<int>(pr.gt_boxes.size());
  if (static_cast<int>(pr.pred_boxes.size()) != na ||
      pr.pred_probs.size() != static_cast<std::size_t>(na) * pr.num_classes || pr.gt_classes.size() != pr.gt_boxes.size()) {
    throw InvalidInput("build_cost_matrix: inconsistent problem sizes");
  }
  CostMatrix m(ng, na);
  for (int g = 0; g < ng; ++g) {
    const BoxCorner& gt = pr.gt_boxes[g];
    const int cls = pr.gt_classes[g];
    if (cls < 0 || cls >= pr.num_classes) throw InvalidInput("build_cost_matrix: GT class out of range");
    iou_many(gt, pr.pred_boxes, std::span<double>(m.iou.data() + static_cast<std::size_t>(g) * na, na));
    const double gcx = 0.5 * (gt.x1 + gt.x2), gcy = 0.5 * (gt.y1 + gt.y2);
    for (int a = 0; a < na; ++a) {
      const AnchorPoint& p = pr.anchors[a];
      if (!(p.cx > gt.x1 && p.cx < gt.x2 && p.cy > gt.y1 && p.cy < gt.y2)) continue;
      const double y = m.iou_at(g, a);
      const double dist = std::hypot(p.cx - gcx, p.cy - gcy) / p.stride;
      const double c = total_cost(classification_cost(pr.pred_probs[static_cast<std::size_t>(a) * pr.num_classes + cls], y, cfg.prob_clamp),
                                  location_cost(y, cfg.iou_floor), center_cost(dist, cfg), cfg);
      m.cost_at(g, a) = std::min(c, std::numeric_limits<double>::max());
    }
  }
  return m;
}

int Assignment::num_positive() const {
  return static_cast<int>(std::count_if(anchor_gt.begin(), anchor_gt.end(), [](int g) { return g >= 0; }));
}

Assignment dynamic_assign(const CostMatrix& m, const AssignConfig& cfg) {
  const int ng = m.num_gt, na = m.num_anchors;
  Assignment out;
  out.anchor_gt.assign(na, -1);
  out.soft_label.assign(na, 0.0);
  out.gt_anchors.assign(ng, {});
  out.dynamic_k.assign(ng, 0);

  std::vector<std::vector<int>> ranked(ng);  // candidates by (cost, index)
  std::vector<int> claim(na, -1);
  for (int g = 0; g < ng; ++g) {
    std::vector<int>& cand = ranked[g];
    for (int a = 0; a < na; ++a) {
      if (m.candidate(g, a)) cand.push_back(a);
    }
    if (cand.empty()) continue;
    std::vector<double> ious;
    for (int a : cand) ious.push_back(m.iou_at(g, a));
    const std::size_t top = std::min<std::size_t>(cfg.dynamic_k_cap, ious.size());
    std::partial_sort(ious.begin(), ious.begin() + top, ious.end(), std::greater<>());
    const double s = std::accumulate(ious.begin(), ious.begin() + top, 0.0);
    const int k = std::clamp(static_cast<int>(std::round(s)), 1, static_cast<int>(cand.size()));
    out.dynamic_k[g] = k;
    std::stable_sort(cand.begin(), cand.end(), [&](int a, int b) { return m.cost_at(g, a) < m.cost_at(g, b); });
    for (int i = 0; i < k; ++i) {
      const int a = cand[i];
      const int h = claim[a];
      if (h < 0 || m.cost_at(g, a) < m.cost_at(h, a)) claim[a] = g;
    }
  }

  std::vector<int> held(ng, 0);
  for (int a = 0; a < na; ++a) {
    if (claim[a] >= 0) ++held[claim[a]];
  }
  for (int g = 0; g < ng; ++g) {
    if (held[g] > 0 || ranked[g].empty()) continue;
    for (int a : ranked[g]) {
      if (claim[a] < 0) {
        claim[a] = g;
        ++held[g];
        break;
      }
    }
  }

  for (int a = 0; a < na; ++a) {
    const int g = claim[a];
    if (g < 0) continue;
    out.anchor_gt[a] = g;
    out.soft_label[a] = m.iou_at(g, a);
    out.gt_anchors[g].push_back(a);
  }
  for (int g = 0; g < ng; ++g) {
    if (out.gt_anchors[g].empty()) out.unassigned_gts.push_back(g);
  }
  return out;
}

}  // namespace a4d
