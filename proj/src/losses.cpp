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
#include "a4d/losses.hpp"

#include <algorithm>
#include <cmath>

#include "a4d/error.hpp"

namespace a4d {

namespace {

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Var soft_cls_loss(Graph& g, Var logits, const Tensor& targets, int num_pos) {
  const Tensor& z = g.value(logits);
  if (z.shape() != targets.shape()) {
    throw InvalidInput("soft_cls_loss: logits " + shape_str(z.shape()) + " vs targets " + shape_str(targets.shape()));
  }
  const double norm = 1.0 / std::max(1, num_pos);
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double y = targets[i];
    const double p = sigmoid(z[i]);
    // CE(sigmoid(z), y) = softplus(z) - y z
    const double ce = softplus(z[i]) - y * z[i];
    total += ce * (y - p) * (y - p);
  }
  Tensor out(Shape{}, total * norm);
  return g.record("soft_cls_loss", std::move(out), {logits}, [logits, targets, norm](Graph& g, const Tensor& dy) {
    const Tensor& z = g.value(logits);
    Tensor& dz = g.grad_of(logits);
    const double s = dy[0] * norm;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double y = targets[i];
      const double p = sigmoid(z[i]);
      const double ce = softplus(z[i]) - y * z[i];
      const double gap = y - p;
      dz[i] += s * (-gap * gap * gap - 2.0 * ce * gap * p * (1.0 - p));
    }
  });
}

namespace {

// 1 - GIoU and its gradient with respect to the predicted corners.
double giou_term(const double* b, const BoxCorner& t, double* grad) {
  const double x1 = b[0], y1 = b[1], x2 = b[2], y2 = b[3];
  const double iw = std::min(x2, t.x2) - std::max(x1, t.x1);
  const double ih = std::min(y2, t.y2) - std::max(y1, t.y1);
  const bool overlap = iw > 0 && ih > 0;
  const double inter = overlap ? iw * ih : 0.0;
  const double pw = x2 - x1, ph = y2 - y1;
  const double uni = pw * ph + t.area() - inter;
  const double ew = std::max(x2, t.x2) - std::min(x1, t.x1);
  const double eh = std::max(y2, t.y2) - std::min(y1, t.y1);
  const double enc = ew * eh;
  std::fill(grad, grad + 4, 0.0);
  if (!(uni > 0) || !(enc > 0)) return 1.0 - giou(BoxCorner{x1, y1, x2, y2}, t);
  const double value = inter / uni - 1.0 + uni / enc;

  // d(giou)/d(inter), d(pred area), d(enclosing area)
  const double d_inter = 1.0 / uni + inter / (uni * uni) - 1.0 / enc;
  const double d_area = -inter / (uni * uni) + 1.0 / enc;
  const double d_enc = -uni / (enc * enc);
  double di[4] = {0, 0, 0, 0};
  if (overlap) {
    if (x1 > t.x1) di[0] = -ih;
    if (x2 < t.x2) di[2] = ih;
    if (y1 > t.y1) di[1] = -iw;
    if (y2 < t.y2) di[3] = iw;
  }
  const double da[4] = {-ph, -pw, ph, pw};
  double de[4] = {0, 0, 0, 0};
  if (x1 < t.x1) de[0] = -eh;
  if (x2 > t.x2) de[2] = eh;
  if (y1 < t.y1) de[1] = -ew;
  if (y2 > t.y2) de[3] = ew;
  for (int i = 0; i < 4; ++i) grad[i] = -(d_inter * di[i] + d_area * da[i] + d_enc * de[i]);
  return 1.0 - value;
}

}  // namespace

Var giou_loss(Graph& g, Var boxes, std::span<const BoxTarget> targets) {
  const Tensor& bv = g.value(boxes);
  if (bv.rank() < 1 || bv.dim(-1) != 4) throw InvalidInput("giou_loss: boxes need a trailing dimension of 4, got " + shape_str(bv.shape()));
  const int rows = static_cast<int>(bv.size() / 4);
  for (const BoxTarget& t : targets) {
    if (t.row < 0 || t.row >= rows) throw InvalidInput("giou_loss: target row " + std::to_string(t.row) + " out of range");
  }
  std::vector<BoxTarget> tg(targets.begin(), targets.end());
  double total = 0.0;
  double scratch[4];
  for (const BoxTarget& t : tg) total += giou_term(bv.ptr() + 4 * t.row, t.gt, scratch);
  const double norm = tg.empty() ? 0.0 : 1.0 / static_cast<double>(tg.size());
  return g.record("giou_loss", Tensor(Shape{}, total * norm), {boxes}, [boxes, tg, norm](Graph& g, const Tensor& dy) {
    if (tg.empty()) return;
    const Tensor& bv = g.value(boxes);
    Tensor& db = g.grad_of(boxes);
    double grad[4];
    for (const BoxTarget& t : tg) {
      giou_term(bv.ptr() + 4 * t.row, t.gt, grad);
      for (int i = 0; i < 4; ++i) db[4 * t.row + i] += dy[0] * norm * grad[i];
    }
  });
}

LossBreakdown total_loss(double cls, double reg, int num_pos, const LossWeights& w) {
  LossBreakdown b;
  b.cls_loss = cls;
  b.reg_loss = reg;
  b.total = w.cls * cls + w.reg * reg;
  b.num_pos = num_pos;
  return b;
}

}  // namespace a4d
