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

// Training losses matching the assignment costs: a soft-label focal cross
// entropy on class logits and a GIoU box loss on the matched anchors.

#include <span>

#include "a4d/geometry.hpp"
#include "a4d/graph.hpp"

namespace a4d {

struct LossWeights {
  double cls = 1.0;
  double reg = 2.0;
};

struct LossBreakdown {
  double cls_loss = 0;
  double reg_loss = 0;
  double total = 0;
  int num_pos = 0;
};

// Sum over all entries of CE(sigmoid(z), y) * (y - sigmoid(z))^2, divided by
// max(1, num_pos). logits and targets share a shape; targets lie in [0, 1].
Var soft_cls_loss(Graph& g, Var logits, const Tensor& targets, int num_pos);

// One matched anchor: flat row `row` of boxes viewed as (rows, 4).
struct BoxTarget {
  int row = 0;
  BoxCorner gt;
};

// Mean over targets of 1 - GIoU(pred, gt); zero when there are none.
// boxes has a trailing dimension of 4 (x1, y1, x2, y2).
Var giou_loss(Graph& g, Var boxes, std::span<const BoxTarget> targets);

LossBreakdown total_loss(double cls, double reg, int num_pos, const LossWeights& w = {});

}  // namespace a4d
