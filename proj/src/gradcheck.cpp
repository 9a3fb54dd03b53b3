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
#include "a4d/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "a4d/error.hpp"
#include "a4d/rng.hpp"

namespace a4d {
namespace {

double evaluate(const std::function<Var(Graph&)>& f) {
  Graph g;
  g.set_check_finite(true);
  const Var out = f(g);
  if (g.value(out).size() != 1) throw InvalidInput("finite_diff_check: f must return a scalar");
  return g.value(out)[0];
}

}  // namespace

GradCheckResult finite_diff_check(const std::function<Var(Graph&)>& f, std::span<Param* const> params,
                                  const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw InvalidInput("finite_diff_check: step must be positive");
  for (Param* p : params) p->grad = Tensor(p->value.shape());
  {
    Graph g;
    g.set_check_finite(true);
    const Var out = f(g);
    g.backward(out);
  }
  std::vector<Tensor> analytic;
  for (Param* p : params) analytic.push_back(p->grad);

  GradCheckResult result;
  Rng rng(options.probe_seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param* p = params[pi];
    std::vector<std::size_t> idx(p->value.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (options.max_probes_per_param > 0 && idx.size() > static_cast<std::size_t>(options.max_probes_per_param)) {
      // Partial Fisher-Yates: first max_probes entries become a uniform sample.
      for (int i = 0; i < options.max_probes_per_param; ++i) {
        std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
      }
      idx.resize(options.max_probes_per_param);
    }
    for (std::size_t i : idx) {
      const double saved = p->value[i];
      p->value[i] = saved + options.step;
      const double up = evaluate(f);
      p->value[i] = saved - options.step;
      const double down = evaluate(f);
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[pi][i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      ++result.probes;
      if (err > result.max_rel_error || result.worst_param.empty()) {
        if (err >= result.max_rel_error) {
          result.max_rel_error = err;
          result.worst_param = p->name;
          result.worst_index = i;
        }
      }
    }
  }
  return result;
}

}  // namespace a4d
