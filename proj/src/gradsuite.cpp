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
#include "a4d/gradsuite.hpp"

#include <functional>
#include <memory>

#include "a4d/attention4d.hpp"
#include "a4d/error.hpp"
#include "a4d/losses.hpp"
#include "a4d/model.hpp"
#include "a4d/neck.hpp"
#include "a4d/ops.hpp"
#include "a4d/rng.hpp"

namespace a4d {

namespace {

Tensor random_tensor(Shape s, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(s));
  for (double& v : t.data()) v = rng.normal() * scale;
  return t;
}

// Moves every trainable param off its init (zero projections, identity
// mixings) so no gradient path is trivially dead.
// Zero-initialized conv weights get the usual fan-in scale first: a batch
// norm behind a near-zero conv is scale invariant in its weights, and the
// curvature that comes with it swamps a central difference.
void jitter(ParamSet& ps, Rng& rng, double scale) {
  for (Param* p : ps.trainable()) {
    for (double& v : p->value.data()) v += rng.uniform(-scale, scale);
  }
}

struct Case {
  ParamSet ps;
  std::function<Var(Graph&)> f;
};

// Sum of the output weighted by a fixed random tensor drawn on first use.
std::function<Var(Graph&)> readout(std::function<Var(Graph&)> body, std::uint64_t seed) {
  auto weights = std::make_shared<Tensor>();
  return [body = std::move(body), weights, seed](Graph& g) {
    const Var y = body(g);
    if (weights->shape() != g.shape(y)) {
      Rng rng(seed ^ 0x5bd1e995ULL);
      *weights = random_tensor(g.shape(y), rng);
    }
    return ops::weighted_sum(g, y, *weights);
  };
}

// Random linear readout over several outputs.
std::function<Var(Graph&)> readout3(std::function<std::array<Var, 3>(Graph&)> body, std::uint64_t seed) {
  auto weights = std::make_shared<std::array<Tensor, 3>>();
  return [body = std::move(body), weights, seed](Graph& g) {
    const std::array<Var, 3> ys = body(g);
    Rng rng(seed ^ 0x5bd1e995ULL);
    for (int i = 0; i < 3; ++i) {
      if ((*weights)[i].shape() != g.shape(ys[i])) (*weights)[i] = random_tensor(g.shape(ys[i]), rng);
    }
    Var total = ops::weighted_sum(g, ys[0], (*weights)[0]);
    for (int i = 1; i < 3; ++i) total = ops::add(g, total, ops::weighted_sum(g, ys[i], (*weights)[i]));
    return total;
  };
}

const ops::BatchNormOptions kTrainBn{1e-5, 0.1, true};

void build(const std::string& name, std::uint64_t seed, Case& c) {
  Rng rng(seed);
  ParamSet& ps = c.ps;
  if (name == "conv1x1") {
    Param* x = ps.add("x", random_tensor({2, 3, 4, 4}, rng));
    Param* w = ps.add("w", random_tensor({5, 3}, rng));
    Param* b = ps.add("b", random_tensor({5}, rng));
    c.f = readout([=](Graph& g) { return ops::conv1x1(g, g.param(x), g.param(w), g.param(b)); }, seed);
  } else if (name == "conv3x3") {
    Param* x = ps.add("x", random_tensor({2, 3, 6, 6}, rng));
    Param* w = ps.add("w", random_tensor({4, 3, 3, 3}, rng, 0.5));
    Param* b = ps.add("b", random_tensor({4}, rng));
    c.f = readout([=](Graph& g) { return ops::conv3x3(g, g.param(x), g.param(w), g.param(b), 2); }, seed);
  } else if (name == "batchnorm") {
    Param* x = ps.add("x", random_tensor({4, 2, 3, 3}, rng));
    Param* gamma = ps.add("gamma", random_tensor({2}, rng));
    Param* beta = ps.add("beta", random_tensor({2}, rng));
    Param* rm = ps.add("running_mean", Tensor({2}), false);
    Param* rv = ps.add("running_var", Tensor({2}, 1.0), false);
    c.f = readout([=](Graph& g) {
      return ops::batchnorm(g, g.param(x), g.param(gamma), g.param(beta), {rm, rv}, kTrainBn);
    }, seed);
  } else if (name == "softmax") {
    Param* x = ps.add("x", random_tensor({3, 4, 5}, rng, 2.0));
    c.f = readout([=](Graph& g) { return ops::softmax_lastdim(g, g.param(x)); }, seed);
  } else if (name == "matmul") {
    Param* a = ps.add("a", random_tensor({2, 3, 4}, rng));
    Param* b = ps.add("b", random_tensor({2, 4, 5}, rng));
    c.f = readout([=](Graph& g) { return ops::matmul_tokens(g, g.param(a), g.param(b)); }, seed);
  } else if (name == "attention4d") {
    Attention4DConfig cfg;
    cfg.channels = 8, cfg.heads = 4, cfg.key_dim = 4, cfg.height = 6, cfg.width = 6;
    const auto p = std::make_shared<Attention4DParams>(init_attention4d(ps, "attn", cfg, rng));
    jitter(ps, rng, 0.3);
    Param* x = ps.add("x", random_tensor({2, 8, 6, 6}, rng));
    c.f = readout([=](Graph& g) { return attention4d_forward(g, g.param(x), *p, kTrainBn); }, seed);
  } else if (name == "csp_layer") {
    const auto layer = std::make_shared<CspLayer>(make_csp_layer(ps, "csp", 6, 8, 2, rng));
    jitter(ps, rng, 0.2);
    Param* x = ps.add("x", random_tensor({2, 6, 4, 4}, rng));
    c.f = readout([=](Graph& g) { return csp_layer(g, *layer, g.param(x), kTrainBn); }, seed);
  } else if (name == "neck_forward") {
    NeckConfig cfg;
    cfg.in_channels = {4, 6, 8};
    cfg.out_channels = 4;
    cfg.placement = Placement::kBoth;
    cfg.num_attention_blocks = 4;
    cfg.heads = 2;
    cfg.key_dim = 2;
    cfg.p5_height = cfg.p5_width = 2;
    const auto p = std::make_shared<NeckParams>(init_neck(ps, "neck", cfg, rng));
    jitter(ps, rng, 0.2);
    // batch 2 keeps 8 values in every stride-32 batch-norm slice
    Param* c3 = ps.add("c3", random_tensor({2, 4, 8, 8}, rng));
    Param* c4 = ps.add("c4", random_tensor({2, 6, 4, 4}, rng));
    Param* c5 = ps.add("c5", random_tensor({2, 8, 2, 2}, rng));
    c.f = readout3([=](Graph& g) {
      const PyramidFeatures out = neck_forward(g, {g.param(c3), g.param(c4), g.param(c5)}, *p, kTrainBn);
      return std::array<Var, 3>{out.p3, out.p4, out.p5};
    }, seed);
  } else if (name == "backbone") {
    ModelConfig cfg;
    cfg.backbone_widths = {4, 4, 6, 6, 8};
    cfg.image_height = cfg.image_width = 64;
    const auto p = std::make_shared<BackboneParams>(init_backbone(ps, cfg, rng));
    Param* x = ps.add("image", random_tensor({2, 3, 64, 64}, rng));
    c.f = readout3([=](Graph& g) {
      const PyramidFeatures f = backbone_forward(g, g.param(x), *p, kTrainBn);
      return std::array<Var, 3>{f.p3, f.p4, f.p5};
    }, seed);
  } else if (name == "head") {
    ModelConfig cfg;
    cfg.num_classes = 3;
    cfg.neck.out_channels = 6;
    const auto h = std::make_shared<HeadParams>(init_head(ps, cfg, rng));
    jitter(ps, rng, 0.2);
    Param* p3 = ps.add("p3", random_tensor({2, 6, 4, 4}, rng));
    Param* p4 = ps.add("p4", random_tensor({2, 6, 2, 2}, rng));
    Param* p5 = ps.add("p5", random_tensor({2, 6, 1, 1}, rng));
    const Tensor wc = random_tensor({2, 21, 3}, rng), wd = random_tensor({2, 21, 4}, rng);
    c.f = [=](Graph& g) {
      const RawPredictions r = head_forward(g, {g.param(p3), g.param(p4), g.param(p5)}, *h, kTrainBn);
      return ops::add(g, ops::weighted_sum(g, flatten_levels(g, r.cls), wc),
                      ops::weighted_sum(g, flatten_levels(g, r.dist), wd));
    };
  } else if (name == "soft_cls_loss") {
    Param* z = ps.add("logits", random_tensor({2, 5, 3}, rng, 2.0));
    Tensor targets({2, 5, 3});
    for (double& t : targets.data()) t = rng.uniform() < 0.3 ? rng.uniform() : 0.0;
    const int num_pos = 1 + static_cast<int>(rng.below(6));
    c.f = [=](Graph& g) { return soft_cls_loss(g, g.param(z), targets, num_pos); };
  } else if (name == "giou_loss") {
    const int rows = 6;
    Tensor boxes({rows, 4});
    std::vector<BoxTarget> targets;
    auto random_box = [&] {
      const double x = rng.uniform(0, 20), y = rng.uniform(0, 20);
      return BoxCorner{x, y, x + rng.uniform(2, 12), y + rng.uniform(2, 12)};
    };
    for (int r = 0; r < rows; ++r) {
      const BoxCorner b = random_box();
      boxes[4 * r] = b.x1, boxes[4 * r + 1] = b.y1, boxes[4 * r + 2] = b.x2, boxes[4 * r + 3] = b.y2;
      if (r % 3 != 2) targets.push_back({r, random_box()});
    }
    Param* bp = ps.add("boxes", std::move(boxes));
    c.f = [=](Graph& g) { return giou_loss(g, g.param(bp), targets); };
  } else {
    throw InvalidInput("unknown gradient case '" + name + "'");
  }
}

}  // namespace

const std::vector<std::string>& gradient_case_names() {
  static const std::vector<std::string> names = {"conv1x1",   "conv3x3",      "batchnorm", "softmax",
                                                 "matmul",    "attention4d",  "csp_layer", "neck_forward",
                                                 "backbone",  "head",         "soft_cls_loss", "giou_loss"};
  return names;
}

GradCheckResult run_gradient_case(const std::string& name, std::uint64_t seed, const GradCheckOptions& opt) {
  Case c;
  build(name, seed, c);
  const std::vector<Param*> params = c.ps.trainable();
  GradCheckOptions o = opt;
  o.probe_seed = opt.probe_seed ^ seed;
  return finite_diff_check(c.f, params, o);
}

}  // namespace a4d
