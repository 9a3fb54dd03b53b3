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

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "a4d/graph.hpp"

namespace a4d {

struct GradCheckOptions {
  double step = 1e-5;
  // 0 probes every element; otherwise that many randomly chosen elements per
  // parameter (all of them when the parameter is smaller).
  int max_probes_per_param = 0;
  std::uint64_t probe_seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t probes = 0;
};

// Compares reverse-mode gradients of the scalar built by `f` against central
// differences, element by element of every Param in `params`:
//   max |analytic - numeric| / max(1, |analytic|).
// `f` must rebuild its computation from the params' current values on each
// call. A NaN/Inf anywhere raises NumericError naming the op.
GradCheckResult finite_diff_check(const std::function<Var(Graph&)>& f, std::span<Param* const> params,
                                  const GradCheckOptions& options = {});

}  // namespace a4d
