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

// COCO-convention detection metrics: greedy score-ordered matching per
// (image, class), 101-point interpolated AP over IoU 0.50:0.05:0.95, AR at
// 100 detections per image, small/medium/large strata with -1 for empty
// strata, and the progressive seven-stage error breakdown.

#include <array>
#include <span>
#include <string>
#include <vector>

#include "a4d/dataio.hpp"
#include "a4d/detection.hpp"

namespace a4d {

inline constexpr double kNoGroundTruth = -1.0;

struct EvalConfig {
  std::vector<double> iou_thresholds = default_thresholds();
  int recall_points = 101;
  int max_detections = 100;
  int workers = 1;

  static std::vector<double> default_thresholds();
};

void validate(const EvalConfig& cfg);  // throws ConfigError

// ---- matching -------------------------------------------------------------------

struct MatchResult {
  std::vector<int> det_gt;        // matched GT index or -1
  std::vector<bool> det_ignored;  // matched an ignored GT
  std::vector<int> gt_det;        // matching detection index or -1
};

// `dets` are one image/class, sorted by descending score. Each detection takes
// the still-unmatched GT of highest IoU >= threshold, preferring GTs that are
// not ignored; a detection on an ignored GT is neither TP nor FP.
MatchResult match_detections(std::span<const BoxCorner> dets, std::span<const BoxCorner> gts, double iou_threshold,
                             const std::vector<bool>& gt_ignored = {});

// ---- precision / recall ---------------------------------------------------------

struct PrCurve {
  std::vector<double> precision;  // interpolated, one per recall grid point
  double ap = kNoGroundTruth;
  double max_recall = kNoGroundTruth;
};

// `tp` holds one flag per counted detection in descending score order.
// Precision is made non-increasing from the right and sampled at recall
// i / (points - 1); AP is their mean. num_gt == 0 yields the sentinel.
PrCurve compute_pr(const std::vector<bool>& tp, int num_gt, int recall_points = 101);
double compute_ap(const std::vector<bool>& tp, int num_gt, int recall_points = 101);

// ---- evaluation -----------------------------------------------------------------

enum AreaRange { kAreaAll = 0, kAreaSmall, kAreaMedium, kAreaLarge, kNumAreaRanges };
const char* area_range_name(int a);

struct Metrics {
  double ap = kNoGroundTruth, ap50 = kNoGroundTruth, ap75 = kNoGroundTruth;
  double ap_small = kNoGroundTruth, ap_medium = kNoGroundTruth, ap_large = kNoGroundTruth;
  double ar = kNoGroundTruth, ar_small = kNoGroundTruth, ar_medium = kNoGroundTruth, ar_large = kNoGroundTruth;
};

struct ClassReport {
  Category category;
  int num_gt = 0;
  int num_det = 0;
  Metrics metrics;
};

struct EvalReport {
  std::vector<ClassReport> classes;
  Metrics aggregate;  // mean over classes, skipping sentinels
};

struct EvalInput {
  std::span<const Category> categories;
  std::span<const GroundTruth> gts;
  std::span<const Detection> dets;
};

// Throws InvalidInput naming any category id missing from `categories`.
EvalReport evaluate(const EvalInput& in, const EvalConfig& cfg = {});

// ---- error breakdown --------------------------------------------------------------

enum Stage { kC75 = 0, kC50, kLoc, kSim, kOth, kBG, kFN, kNumStages };
const char* stage_name(int s);

struct ErrorCurves {
  std::array<double, kNumStages> ap{};
  std::array<std::vector<double>, kNumStages> precision;  // on the recall grid
};

struct ErrorBreakdown {
  std::vector<double> recall;  // the recall grid
  std::vector<std::pair<Category, ErrorCurves>> classes;  // classes with GT only
  ErrorCurves aggregate;                                   // mean over those classes
};

struct BreakdownConfig {
  // Parallel to categories; classes sharing a value are "similar". Empty
  // means every class belongs to one supercategory.
  std::vector<int> supercategory;
  double loose_iou = 0.1;
};

// Stages at area "all" and 100 detections per image:
//   C75 / C50: PR at IoU .75 / .50.  Loc: PR at IoU .10.
//   Sim: on top of Loc, a false positive overlapping (IoU >= .10) a GT of a
//     similar class is dropped, and a similar-class detection that found no GT
//     of its own class is credited to a still-unmatched GT of this class.
//   Oth: the same for every other class.  BG: all remaining false positives
//     dropped.  FN: precision 1 at every recall.
ErrorBreakdown error_breakdown(const EvalInput& in, const EvalConfig& cfg = {}, const BreakdownConfig& bc = {});

// ---- output -----------------------------------------------------------------------

double round6(double v);
std::string metrics_table(const EvalReport& r);
std::string breakdown_csv(const ErrorBreakdown& b);

}  // namespace a4d
