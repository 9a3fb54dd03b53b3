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

// Named gradient-check cases on small random inputs, one per differentiable
// building block. Every case draws its inputs and parameters from the seed and
// reads the output through a random linear functional.

#include <cstdint>
#include <string>
#include <vector>

#include "a4d/gradcheck.hpp"

namespace a4d {

// conv1x1, conv3x3, batchnorm, softmax, matmul, attention4d, csp_layer,
// neck_forward, backbone, head, soft_cls_loss, giou_loss
const std::vector<std::string>& gradient_case_names();

// Throws InvalidInput for an unknown name.
GradCheckResult run_gradient_case(const std::string& name, std::uint64_t seed, const GradCheckOptions& opt);

}  // namespace a4d
