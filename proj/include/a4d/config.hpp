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

// Run configuration: every tunable default in one JSON document with the
// sections model, neck, batchnorm, assignment, loss, inference, eval,
// synthetic, train and gradcheck. Unknown keys are rejected.

#include <filesystem>
#include <string>
#include <vector>

#include "a4d/assignment.hpp"
#include "a4d/evaluator.hpp"
#include "a4d/model.hpp"
#include "a4d/train.hpp"

namespace a4d {

inline constexpr const char* kVersion = "a4d 0.1.0";

struct GradCheckConfig {
  int seeds = 3;
  double step = 1e-5;
  double tolerance = 1e-4;
  int max_probes_per_param = 12;
};

struct RunConfig {
  ModelConfig model;
  AssignConfig assign;
  LossWeights loss;
  DecodeOptions inference;
  EvalConfig eval;
  BreakdownConfig breakdown;
  SyntheticConfig synthetic;
  TrainConfig train;  // its assign/loss copies are filled from the sections above
  GradCheckConfig gradcheck;
};

// Defaults, validated.
RunConfig default_config();

// Starts from the defaults and applies the document; throws ConfigError
// naming the offending key.
RunConfig parse_config(const std::string& json_text, const std::string& source = "config");
RunConfig load_config(const std::filesystem::path& path);

// Applies "section.key=value" where value is JSON (bare words are taken as
// strings).
void apply_override(RunConfig& cfg, const std::string& assignment);

// Cross-section checks (model/neck/assignment/eval/...). Throws ConfigError.
void validate(RunConfig& cfg);

// Full effective configuration as a JSON string.
std::string config_json(const RunConfig& cfg, int indent = -1);

}  // namespace a4d
