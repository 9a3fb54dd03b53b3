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

// Toy training on the synthetic set: per-image dynamic assignment against the
// current predictions, soft classification + GIoU losses, SGD with momentum
// and cosine decay. Also batched inference and checkpoints.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "a4d/assignment.hpp"
#include "a4d/dataio.hpp"
#include "a4d/losses.hpp"
#include "a4d/model.hpp"

namespace a4d {

struct SgdConfig {
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  // Use the published values as printed (momentum 5e-4, weight decay 0.9).
  bool literal_hparams = false;
  bool cosine = true;
  double min_lr_ratio = 0.05;
};

void validate(const SgdConfig& cfg);

class Sgd {
 public:
  Sgd(ParamSet& params, const SgdConfig& cfg);
  // lr for 0-based `step` of `total`.
  double lr_at(int step, int total) const;
  // v = m v + (grad + wd w); w -= lr v. Only trainable params move.
  void step(double lr);
  double momentum() const { return momentum_; }
  double weight_decay() const { return weight_decay_; }

 private:
  std::vector<Param*> params_;
  std::vector<Tensor> velocity_;
  SgdConfig cfg_;
  double momentum_;
  double weight_decay_;
};

struct TrainSample {
  int image_id = 0;
  Tensor image;  // (3, H, W)
  std::vector<BoxCorner> boxes;
  std::vector<int> classes;  // class index, 0-based
};

// Pixels to (3, H, W) in roughly [-2, 2].
Tensor image_tensor(const RgbImage& img);

// One sample per image; category ids map to class indices by their order in
// index.categories.
std::vector<TrainSample> make_samples(const SyntheticDataset& ds);

struct BatchLoss {
  Var total;
  LossBreakdown breakdown;
};

// Assigns every image of the batch against the detached predictions and
// records the weighted loss on g.
BatchLoss detection_loss(Graph& g, const Detector& model, const Detector::Output& out,
                         const std::vector<const TrainSample*>& batch, const AssignConfig& assign,
                         const LossWeights& weights);

struct TrainConfig {
  int steps = 300;
  int epochs = 0;  // when > 0, overrides steps with full passes over the data
  int batch_size = 4;
  std::uint64_t seed = 0;
  SgdConfig sgd;
  LossWeights loss;
  AssignConfig assign;
};

void validate(const TrainConfig& cfg);

struct StepRecord {
  int step = 0;  // 1-based
  double lr = 0;
  LossBreakdown loss;
};

int total_steps(const TrainConfig& cfg, std::size_t num_samples);

std::vector<StepRecord> train(Detector& model, const std::vector<TrainSample>& samples, const TrainConfig& cfg,
                              const std::function<void(const StepRecord&)>& on_step = {});

// step,cls,reg,total,num_pos with 6 decimals.
std::string loss_csv(const std::vector<StepRecord>& records);

// Eval-mode forward and decoding; category_ids maps class index to id.
std::vector<Detection> infer(const Detector& model, const std::vector<const Tensor*>& images,
                             const std::vector<int>& image_ids, const std::vector<int>& category_ids,
                             const DecodeOptions& opt, int batch_size = 8);

// Binary checkpoint: magic, the config JSON, then every parameter by name.
void save_checkpoint(const std::filesystem::path& path, const std::string& config_json, const ParamSet& params);
struct Checkpoint {
  std::string config_json;
  std::vector<std::pair<std::string, Tensor>> params;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Copies checkpoint values into matching params; throws on any name or shape
// mismatch.
void restore(const Checkpoint& ckpt, ParamSet& params);

}  // namespace a4d
