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
#include "a4d/geometry.hpp"

#include <algorithm>
#include <string>

#include "a4d/error.hpp"
#include "a4d/kernels.hpp"

namespace a4d {

double iou(const BoxCorner& a, const BoxCorner& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double giou(const BoxCorner& a, const BoxCorner& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  const double v = uni > 0.0 ? inter / uni : 0.0;
  const double enclosing =
      (std::max(a.x2, b.x2) - std::min(a.x1, b.x1)) * (std::max(a.y2, b.y2) - std::min(a.y1, b.y1));
  if (enclosing <= 0.0) return v;
  return v - (enclosing - uni) / enclosing;
}

void iou_many(const BoxCorner& a, std::span<const BoxCorner> others, std::span<double> out) {
  if (out.size() != others.size()) throw InvalidInput("iou_many: output size mismatch");
  const std::size_t n = others.size();
  std::vector<double> soa(4 * n);
  for (std::size_t i = 0; i < n; ++i) {
    soa[i] = others[i].x1;
    soa[n + i] = others[i].y1;
    soa[2 * n + i] = others[i].x2;
    soa[3 * n + i] = others[i].y2;
  }
  const double box[4] = {a.x1, a.y1, a.x2, a.y2};
  kernels::active().iou_row(box, static_cast<int>(n), soa.data(), soa.data() + n, soa.data() + 2 * n,
                            soa.data() + 3 * n, out.data());
}

std::vector<double> iou_many(const BoxCorner& a, std::span<const BoxCorner> others) {
  std::vector<double> out(others.size());
  iou_many(a, others, out);
  return out;
}

BoxCorner to_corner(const BoxCenter& c) {
  if (c.w < 0 || c.h < 0) {
    throw InvalidInput("box with negative size: w=" + std::to_string(c.w) + " h=" + std::to_string(c.h));
  }
  return {c.x - c.w / 2, c.y - c.h / 2, c.x + c.w / 2, c.y + c.h / 2};
}

BoxCenter to_center(const BoxCorner& b) {
  if (!b.valid()) throw InvalidInput("box with x2 < x1 or y2 < y1");
  return {(b.x1 + b.x2) / 2, (b.y1 + b.y2) / 2, b.x2 - b.x1, b.y2 - b.y1};
}

BoxCorner from_xywh(double x, double y, double w, double h) { return {x, y, x + w, y + h}; }

SizeBucket size_bucket(double area) {
  if (!(area >= 0.0)) throw InvalidInput("size_bucket: negative area " + std::to_string(area));
  if (area < kSmallAreaLimit) return SizeBucket::kSmall;
  if (area < kMediumAreaLimit) return SizeBucket::kMedium;
  return SizeBucket::kLarge;
}

const char* bucket_name(SizeBucket b) {
  switch (b) {
    case SizeBucket::kSmall:
      return "small";
    case SizeBucket::kMedium:
      return "medium";
    case SizeBucket::kLarge:
      return "large";
  }
  return "?";
}

}  // namespace a4d
