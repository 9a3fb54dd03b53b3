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

#include <span>
#include <vector>

namespace a4d {

// Axis-aligned box by corners, pixels. Valid when x1 <= x2 and y1 <= y2.
struct BoxCorner {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const { return x1 <= x2 && y1 <= y2; }
  bool operator==(const BoxCorner&) const = default;
};

// Center-size form used by center-convention annotation files.
struct BoxCenter {
  double x = 0, y = 0, w = 0, h = 0;
  bool operator==(const BoxCenter&) const = default;
};

enum class SizeBucket { kSmall, kMedium, kLarge };

inline constexpr double kSmallAreaLimit = 32.0 * 32.0;
inline constexpr double kMediumAreaLimit = 96.0 * 96.0;

// Intersection over union; 0 when the union is empty, so a zero-area box has
// IoU 0 with everything, itself included.
double iou(const BoxCorner& a, const BoxCorner& b);

// IoU minus the empty fraction of the smallest enclosing box. Falls back to
// IoU when the enclosing box has no area.
double giou(const BoxCorner& a, const BoxCorner& b);

// out[i] = iou(a, others[i]) through the dispatched SIMD kernel.
void iou_many(const BoxCorner& a, std::span<const BoxCorner> others, std::span<double> out);
std::vector<double> iou_many(const BoxCorner& a, std::span<const BoxCorner> others);

// Throws InvalidInput for negative width/height.
BoxCorner to_corner(const BoxCenter& c);
// Throws InvalidInput for an invalid box.
BoxCenter to_center(const BoxCorner& b);
// COCO [x, y, w, h] top-left form.
BoxCorner from_xywh(double x, double y, double w, double h);

// small: area < 32^2, medium: 32^2 <= area < 96^2, large: otherwise.
// Throws InvalidInput for negative (or NaN) area.
SizeBucket size_bucket(double area);
const char* bucket_name(SizeBucket b);

}  // namespace a4d
