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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include <unistd.h>

#include "a4d/config.hpp"
#include "a4d/error.hpp"
#include "a4d/train.hpp"

namespace a4d {
namespace {

namespace fs = std::filesystem;

TEST(Config, DefaultsAndRoundTrip) {
  const RunConfig d = default_config();
  EXPECT_EQ(d.train.batch_size, 4);
  EXPECT_EQ(d.train.steps, 300);
  EXPECT_EQ(d.train.sgd.momentum, 0.9);
  EXPECT_EQ(d.train.sgd.weight_decay, 5e-4);
  EXPECT_EQ(d.assign.iou_weight, 3.0);
  EXPECT_EQ(d.synthetic.num_images, 200);
  EXPECT_EQ(d.synthetic.num_classes, d.model.num_classes);
  const std::string text = config_json(d);
  EXPECT_EQ(config_json(parse_config(text)), text);
}

TEST(Config, PartialDocumentKeepsOtherDefaults) {
  const RunConfig c = parse_config(R"({"train": {"steps": 12}, "neck": {"placement": "both", "num_attention_blocks": 3}})");
  EXPECT_EQ(c.train.steps, 12);
  EXPECT_EQ(c.train.batch_size, 4);
  EXPECT_EQ(c.model.neck.placement, Placement::kBoth);
  EXPECT_EQ(c.model.neck.num_attention_blocks, 3);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config(R"({"trian": {}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"train": {"stepz": 1}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"train": {"steps": "many"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"train": {"batch_size": 0}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"model": {"image_height": 50}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"assignment": {"center_cost_mode": "nope"}})"), ConfigError);
  EXPECT_THROW(parse_config("[1, 2"), ConfigError);
  try {
    parse_config(R"({"eval": {"wokers": 2}})", "run.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("wokers"), std::string::npos) << e.what();
  }
}

TEST(Config, Overrides) {
  RunConfig c = default_config();
  apply_override(c, "train.lr=0.01");
  apply_override(c, "assignment.center_cost_mode=paper_literal");
  apply_override(c, "train.literal_hparams=true");
  EXPECT_EQ(c.train.sgd.lr, 0.01);
  EXPECT_EQ(c.assign.center_mode, CenterCostMode::kPaperLiteral);
  EXPECT_EQ(c.train.assign.center_mode, CenterCostMode::kPaperLiteral);
  EXPECT_TRUE(c.train.sgd.literal_hparams);
  EXPECT_THROW(apply_override(c, "train.lr"), ConfigError);
  EXPECT_THROW(apply_override(c, "lr=3"), ConfigError);
  EXPECT_THROW(apply_override(c, "train.nothing=3"), ConfigError);
}

TEST(Sgd, MomentumAndDecayUpdate) {
  ParamSet ps;
  Param* p = ps.add("w", Tensor({2}, std::vector<double>{1.0, -2.0}));
  ps.add("frozen", Tensor({1}, 5.0), false);
  SgdConfig cfg;
  Sgd opt(ps, cfg);
  p->grad = Tensor({2}, std::vector<double>{0.5, 0.25});
  opt.step(0.1);
  // v = g + wd w
  const double v0 = 0.5 + 5e-4 * 1.0;
  EXPECT_DOUBLE_EQ(p->value[0], 1.0 - 0.1 * v0);
  opt.step(0.1);
  const double w1 = 1.0 - 0.1 * v0;
  EXPECT_DOUBLE_EQ(p->value[0], w1 - 0.1 * (0.9 * v0 + 0.5 + 5e-4 * w1));
  EXPECT_EQ(ps.find("frozen")->value[0], 5.0);

  cfg.literal_hparams = true;
  const Sgd lit(ps, cfg);
  EXPECT_EQ(lit.momentum(), 5e-4);
  EXPECT_EQ(lit.weight_decay(), 0.9);
}

TEST(Sgd, CosineSchedule) {
  ParamSet ps;
  SgdConfig cfg;
  const Sgd opt(ps, cfg);
  EXPECT_DOUBLE_EQ(opt.lr_at(0, 300), cfg.lr);
  EXPECT_NEAR(opt.lr_at(299, 300), cfg.lr * cfg.min_lr_ratio, 1e-15);
  const double mid = opt.lr_at(150, 301);
  EXPECT_NEAR(mid, cfg.lr * (cfg.min_lr_ratio + 0.5 * (1 - cfg.min_lr_ratio)), 1e-15);
  for (int s = 1; s < 300; ++s) EXPECT_LE(opt.lr_at(s, 300), opt.lr_at(s - 1, 300));
  cfg.cosine = false;
  EXPECT_EQ(Sgd(ps, cfg).lr_at(200, 300), cfg.lr);
  cfg.lr = -1;
  EXPECT_THROW(Sgd(ps, cfg), ConfigError);
}

RunConfig tiny_run() {
  RunConfig c = default_config();
  c.model.backbone_widths = {4, 4, 8, 8, 8};
  c.model.neck.out_channels = 8;
  c.model.neck.heads = 2;
  c.model.neck.key_dim = 2;
  c.synthetic.num_images = 8;
  c.train.steps = 4;
  c.train.batch_size = 2;
  validate(c);
  return c;
}

TEST(Train, DeterministicLossLog) {
  const RunConfig c = tiny_run();
  const SyntheticDataset ds = gen_synthetic(c.synthetic);
  const auto samples = make_samples(ds);
  Detector a(c.model, 1), b(c.model, 1);
  int calls = 0;
  const auto ra = train(a, samples, c.train, [&](const StepRecord&) { ++calls; });
  const auto rb = train(b, samples, c.train);
  EXPECT_EQ(calls, 4);
  ASSERT_EQ(ra.size(), 4u);
  EXPECT_EQ(loss_csv(ra), loss_csv(rb));
  EXPECT_EQ(loss_csv(ra).rfind("step,cls,reg,total,num_pos\n1,", 0), 0u);
  for (const StepRecord& r : ra) {
    EXPECT_TRUE(std::isfinite(r.loss.total));
    EXPECT_GT(r.loss.num_pos, 0);
  }
}

TEST(Train, EpochsOverrideSteps) {
  TrainConfig t;
  t.epochs = 3;
  t.batch_size = 4;
  EXPECT_EQ(total_steps(t, 10), 9);
  t.epochs = 0;
  EXPECT_EQ(total_steps(t, 10), 300);
}

TEST(Train, ImageTensorScaling) {
  RgbImage img{1, 1, {128, 192, 0}};
  const Tensor t = image_tensor(img);
  EXPECT_EQ(t.shape(), (Shape{3, 1, 1}));
  EXPECT_EQ(t[0], 0.0);
  EXPECT_EQ(t[1], 1.0);
  EXPECT_EQ(t[2], -2.0);
}

TEST(Checkpoint, RoundTripRestoresOutputs) {
  const RunConfig c = tiny_run();
  const SyntheticDataset ds = gen_synthetic(c.synthetic);
  const auto samples = make_samples(ds);
  Detector a(c.model, 3);
  train(a, samples, c.train);
  const fs::path path = fs::temp_directory_path() / ("a4d_ckpt_" + std::to_string(::getpid()));
  save_checkpoint(path, config_json(c), a.params());
  const Checkpoint ck = load_checkpoint(path);
  EXPECT_EQ(ck.config_json, config_json(c));
  Detector b(parse_config(ck.config_json).model, 99);
  restore(ck, b.params());

  const std::vector<const Tensor*> imgs{&samples[0].image, &samples[1].image};
  const std::vector<int> ids{1, 2}, cats{1, 2, 3};
  DecodeOptions opt;
  opt.score_threshold = 0.0;
  const auto da = infer(a, imgs, ids, cats, opt), db = infer(b, imgs, ids, cats, opt);
  ASSERT_EQ(da.size(), db.size());
  for (std::size_t i = 0; i < da.size(); ++i) {
    EXPECT_EQ(da[i].score, db[i].score);
    EXPECT_EQ(da[i].box, db[i].box);
  }

  RunConfig other = c;
  other.model.neck.out_channels = 6;
  validate(other);
  Detector wrong(other.model, 0);
  EXPECT_THROW(restore(ck, wrong.params()), InvalidInput);

  std::string bytes = read_file(path);
  write_file_atomic(path, bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(load_checkpoint(path), InvalidInput);
  write_file_atomic(path, "NOTACKPT");
  EXPECT_THROW(load_checkpoint(path), InvalidInput);
  fs::remove(path);
}

}  // namespace
}  // namespace a4d
