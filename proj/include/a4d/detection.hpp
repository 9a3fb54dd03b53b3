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

#include "a4d/geometry.hpp"

namespace a4d {

// Scored class + box prediction for one image.
struct Detection {
  int image_id = 0;
  int category_id = 0;
  double score = 0.0;
  BoxCorner box;
};

// Labeled annotation box for one image.
struct GroundTruth {
  int image_id = 0;
  int category_id = 0;
  BoxCorner box;
};

}  // namespace a4d
