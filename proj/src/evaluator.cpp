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
#include "a4d/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <thread>

#include "a4d/error.hpp"

namespace a4d {

std::vector<double> EvalConfig::default_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((10 + i) / 20.0);
  return t;
}

void validate(const EvalConfig& cfg) {
  if (cfg.iou_thresholds.empty()) throw ConfigError("eval.iou_thresholds must not be empty");
  for (std::size_t i = 0; i < cfg.iou_thresholds.size(); ++i) {
    const double t = cfg.iou_thresholds[i];
    if (!(t > 0 && t <= 1)) throw ConfigError("eval.iou_thresholds must lie in (0, 1]");
    if (i > 0 && !(t > cfg.iou_thresholds[i - 1])) throw ConfigError("eval.iou_thresholds must be strictly ascending");
  }
  if (cfg.recall_points < 2) throw ConfigError("eval.recall_points must be >= 2");
  if (cfg.max_detections < 1) throw ConfigError("eval.max_detections must be >= 1");
  if (cfg.workers < 1) throw ConfigError("eval.workers must be >= 1");
}

MatchResult match_detections(std::span<const BoxCorner> dets, std::span<const BoxCorner> gts, double thr,
                             const std::vector<bool>& gt_ignored) {
  const int nd = static_cast<int>(dets.size()), ng = static_cast<int>(gts.size());
  if (!gt_ignored.empty() && gt_ignored.size() != gts.size()) throw InvalidInput("match_detections: ignore flags size");
  auto ignored = [&](int g) { return !gt_ignored.empty() && gt_ignored[g]; };
  std::vector<int> order(ng);
  std::iota(order.begin(), order.end(), 0);
  std::stable_partition(order.begin(), order.end(), [&](int g) { return !ignored(g); });

  MatchResult r{std::vector<int>(nd, -1), std::vector<bool>(nd, false), std::vector<int>(ng, -1)};
  for (int d = 0; d < nd; ++d) {
    double best = thr;
    int m = -1;
    for (int g : order) {
      if (r.gt_det[g] >= 0) continue;
      // once a regular GT is matched, ignored GTs can't take over
      if (m >= 0 && !ignored(m) && ignored(g)) break;
      const double v = iou(dets[d], gts[g]);
      if (v < best) continue;
      best = v;
      m = g;
    }
    if (m < 0) continue;
    r.det_gt[d] = m;
    r.det_ignored[d] = ignored(m);
    r.gt_det[m] = d;
  }
  return r;
}

PrCurve compute_pr(const std::vector<bool>& tp, int num_gt, int points) {
  PrCurve c;
  if (num_gt <= 0) {
    c.precision.assign(points, kNoGroundTruth);
    return c;
  }
  const std::size_t n = tp.size();
  std::vector<double> rc(n), pr(n);
  double t = 0, f = 0;
  for (std::size_t i = 0; i < n; ++i) {
    (tp[i] ? t : f) += 1.0;
    rc[i] = t / num_gt;
    pr[i] = t / (t + f);
  }
  for (std::size_t i = n; i > 1; --i) pr[i - 2] = std::max(pr[i - 2], pr[i - 1]);
  c.precision.assign(points, 0.0);
  double sum = 0.0;
  for (int j = 0; j < points; ++j) {
    const double r = static_cast<double>(j) / (points - 1);
    const auto it = std::lower_bound(rc.begin(), rc.end(), r);
    if (it != rc.end()) c.precision[j] = pr[it - rc.begin()];
    sum += c.precision[j];
  }
  c.ap = sum / points;
  c.max_recall = n ? rc.back() : 0.0;
  return c;
}

double compute_ap(const std::vector<bool>& tp, int num_gt, int points) { return compute_pr(tp, num_gt, points).ap; }

const char* area_range_name(int a) {
  static const char* names[] = {"all", "small", "medium", "large"};
  return names[a];
}

const char* stage_name(int s) {
  static const char* names[] = {"C75", "C50", "Loc", "Sim", "Oth", "BG", "FN"};
  return names[s];
}

namespace {

bool in_range(int a, double area) {
  if (a == kAreaAll) return true;
  return static_cast<int>(size_bucket(area)) == a - 1;
}

// Ground truths and top-scored detections grouped by image and class.
struct Grouped {
  std::vector<int> image_ids;  // ascending
  int num_classes = 0;
  // [image][class]
  std::vector<std::vector<std::vector<const GroundTruth*>>> gts;
  std::vector<std::vector<std::vector<const Detection*>>> dets;
};

Grouped group(const EvalInput& in, int max_dets) {
  std::map<int, int> cls;
  for (std::size_t i = 0; i < in.categories.size(); ++i) {
    if (!cls.emplace(in.categories[i].id, static_cast<int>(i)).second) {
      throw InvalidInput("duplicate category id " + std::to_string(in.categories[i].id));
    }
  }
  auto class_of = [&](int id, const char* what) {
    auto it = cls.find(id);
    if (it == cls.end()) throw InvalidInput(std::string("unknown category id ") + std::to_string(id) + " in " + what);
    return it->second;
  };
  std::map<int, int> img;
  for (const GroundTruth& g : in.gts) img.emplace(g.image_id, 0);
  for (const Detection& d : in.dets) img.emplace(d.image_id, 0);
  Grouped gr;
  gr.num_classes = static_cast<int>(in.categories.size());
  for (auto& [id, slot] : img) {
    slot = static_cast<int>(gr.image_ids.size());
    gr.image_ids.push_back(id);
  }
  const std::size_t ni = gr.image_ids.size(), nk = gr.num_classes;
  gr.gts.assign(ni, std::vector<std::vector<const GroundTruth*>>(nk));
  gr.dets.assign(ni, std::vector<std::vector<const Detection*>>(nk));
  for (const GroundTruth& g : in.gts) {
    if (!g.box.valid()) throw InvalidInput("ground truth on image " + std::to_string(g.image_id) + " has an inverted box");
    gr.gts[img[g.image_id]][class_of(g.category_id, "ground truth")].push_back(&g);
  }
  for (const Detection& d : in.dets) {
    if (!std::isfinite(d.score) || !d.box.valid()) {
      throw InvalidInput("detection on image " + std::to_string(d.image_id) + " has a bad score or box");
    }
    gr.dets[img[d.image_id]][class_of(d.category_id, "detections")].push_back(&d);
  }
  for (auto& per_image : gr.dets) {
    for (auto& v : per_image) {
      std::stable_sort(v.begin(), v.end(), [](const Detection* a, const Detection* b) { return a->score > b->score; });
      if (static_cast<int>(v.size()) > max_dets) v.resize(max_dets);
    }
  }
  return gr;
}

enum Verdict : unsigned char { kFp = 0, kTp = 1, kIgnored = 2 };

// Outcome of one (image, class, area range).
struct Cell {
  std::vector<double> scores;
  std::vector<std::vector<Verdict>> verdicts;  // [threshold][det]
  int num_gt = 0;                              // not ignored
};

std::vector<Cell> evaluate_image(const Grouped& gr, std::size_t i, const EvalConfig& cfg) {
  const int nk = gr.num_classes, nt = static_cast<int>(cfg.iou_thresholds.size());
  std::vector<Cell> cells(static_cast<std::size_t>(nk) * kNumAreaRanges);
  for (int k = 0; k < nk; ++k) {
    const auto& gts = gr.gts[i][k];
    const auto& dets = gr.dets[i][k];
    std::vector<BoxCorner> gb, db;
    for (const GroundTruth* g : gts) gb.push_back(g->box);
    for (const Detection* d : dets) db.push_back(d->box);
    for (int a = 0; a < kNumAreaRanges; ++a) {
      Cell& c = cells[static_cast<std::size_t>(k) * kNumAreaRanges + a];
      std::vector<bool> ignore(gb.size());
      for (std::size_t g = 0; g < gb.size(); ++g) {
        ignore[g] = !in_range(a, gb[g].area());
        if (!ignore[g]) ++c.num_gt;
      }
      for (const Detection* d : dets) c.scores.push_back(d->score);
      c.verdicts.assign(nt, std::vector<Verdict>(db.size(), kFp));
      for (int t = 0; t < nt; ++t) {
        const MatchResult m = match_detections(db, gb, cfg.iou_thresholds[t], ignore);
        for (std::size_t d = 0; d < db.size(); ++d) {
          if (m.det_gt[d] >= 0) {
            c.verdicts[t][d] = m.det_ignored[d] ? kIgnored : kTp;
          } else if (!in_range(a, db[d].area())) {
            c.verdicts[t][d] = kIgnored;
          }
        }
      }
    }
  }
  return cells;
}

// Concatenates per-image entries in image order and stable-sorts by score.
std::vector<bool> merged_flags(const std::vector<std::pair<double, Verdict>>& entries) {
  std::vector<std::size_t> idx(entries.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return entries[a].first > entries[b].first; });
  std::vector<bool> tp;
  for (std::size_t i : idx) {
    if (entries[i].second != kIgnored) tp.push_back(entries[i].second == kTp);
  }
  return tp;
}

double mean_skip_sentinel(const std::vector<double>& v) {
  double s = 0;
  int n = 0;
  for (double x : v) {
    if (x != kNoGroundTruth) s += x, ++n;
  }
  return n ? s / n : kNoGroundTruth;
}

int threshold_index(const EvalConfig& cfg, double t) {
  for (std::size_t i = 0; i < cfg.iou_thresholds.size(); ++i) {
    if (std::fabs(cfg.iou_thresholds[i] - t) < 1e-12) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

EvalReport evaluate(const EvalInput& in, const EvalConfig& cfg) {
  validate(cfg);
  const Grouped gr = group(in, cfg.max_detections);
  const std::size_t ni = gr.image_ids.size();
  std::vector<std::vector<Cell>> per_image(ni);
  const int workers = static_cast<int>(std::min<std::size_t>(cfg.workers, std::max<std::size_t>(ni, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < ni; ++i) per_image[i] = evaluate_image(gr, i, cfg);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w * ni / workers; i < (w + 1) * ni / workers; ++i) per_image[i] = evaluate_image(gr, i, cfg);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  const int nk = gr.num_classes, nt = static_cast<int>(cfg.iou_thresholds.size());
  const int i50 = threshold_index(cfg, 0.5), i75 = threshold_index(cfg, 0.75);
  EvalReport rep;
  for (int k = 0; k < nk; ++k) {
    ClassReport cr;
    cr.category = in.categories[k];
    std::array<std::vector<double>, kNumAreaRanges> ap, ar;
    for (int a = 0; a < kNumAreaRanges; ++a) {
      int num_gt = 0;
      for (std::size_t i = 0; i < ni; ++i) num_gt += per_image[i][static_cast<std::size_t>(k) * kNumAreaRanges + a].num_gt;
      for (int t = 0; t < nt; ++t) {
        std::vector<std::pair<double, Verdict>> entries;
        for (std::size_t i = 0; i < ni; ++i) {
          const Cell& c = per_image[i][static_cast<std::size_t>(k) * kNumAreaRanges + a];
          for (std::size_t d = 0; d < c.scores.size(); ++d) entries.emplace_back(c.scores[d], c.verdicts[t][d]);
        }
        const PrCurve pr = compute_pr(merged_flags(entries), num_gt, cfg.recall_points);
        ap[a].push_back(pr.ap);
        ar[a].push_back(pr.max_recall);
      }
      if (a == kAreaAll) {
        cr.num_gt = num_gt;
        for (std::size_t i = 0; i < ni; ++i) cr.num_det += static_cast<int>(gr.dets[i][k].size());
      }
    }
    Metrics& m = cr.metrics;
    m.ap = mean_skip_sentinel(ap[kAreaAll]);
    m.ap50 = i50 >= 0 ? ap[kAreaAll][i50] : kNoGroundTruth;
    m.ap75 = i75 >= 0 ? ap[kAreaAll][i75] : kNoGroundTruth;
    m.ap_small = mean_skip_sentinel(ap[kAreaSmall]);
    m.ap_medium = mean_skip_sentinel(ap[kAreaMedium]);
    m.ap_large = mean_skip_sentinel(ap[kAreaLarge]);
    m.ar = mean_skip_sentinel(ar[kAreaAll]);
    m.ar_small = mean_skip_sentinel(ar[kAreaSmall]);
    m.ar_medium = mean_skip_sentinel(ar[kAreaMedium]);
    m.ar_large = mean_skip_sentinel(ar[kAreaLarge]);
    rep.classes.push_back(cr);
  }
  auto agg = [&](double Metrics::*f) {
    std::vector<double> v;
    for (const ClassReport& c : rep.classes) v.push_back(c.metrics.*f);
    return mean_skip_sentinel(v);
  };
  for (double Metrics::*f : {&Metrics::ap, &Metrics::ap50, &Metrics::ap75, &Metrics::ap_small, &Metrics::ap_medium,
                             &Metrics::ap_large, &Metrics::ar, &Metrics::ar_small, &Metrics::ar_medium, &Metrics::ar_large}) {
    rep.aggregate.*f = agg(f);
  }
  return rep;
}

ErrorBreakdown error_breakdown(const EvalInput& in, const EvalConfig& cfg, const BreakdownConfig& bc) {
  validate(cfg);
  const Grouped gr = group(in, cfg.max_detections);
  const int nk = gr.num_classes;
  if (!bc.supercategory.empty() && static_cast<int>(bc.supercategory.size()) != nk) {
    throw ConfigError("supercategory map must have one entry per category");
  }
  auto similar = [&](int a, int b) { return bc.supercategory.empty() || bc.supercategory[a] == bc.supercategory[b]; };
  const double loose = bc.loose_iou;
  const std::size_t ni = gr.image_ids.size();

  // Own-class matching at the loose threshold, reused for cross-class checks.
  std::vector<std::vector<MatchResult>> own(ni, std::vector<MatchResult>(nk));
  std::vector<std::vector<std::vector<BoxCorner>>> gboxes(ni, std::vector<std::vector<BoxCorner>>(nk));
  std::vector<std::vector<std::vector<BoxCorner>>> dboxes(ni, std::vector<std::vector<BoxCorner>>(nk));
  for (std::size_t i = 0; i < ni; ++i) {
    for (int k = 0; k < nk; ++k) {
      for (const GroundTruth* g : gr.gts[i][k]) gboxes[i][k].push_back(g->box);
      for (const Detection* d : gr.dets[i][k]) dboxes[i][k].push_back(d->box);
      own[i][k] = match_detections(dboxes[i][k], gboxes[i][k], loose);
    }
  }

  ErrorBreakdown out;
  for (int j = 0; j < cfg.recall_points; ++j) out.recall.push_back(static_cast<double>(j) / (cfg.recall_points - 1));
  for (int s = 0; s < kNumStages; ++s) out.aggregate.precision[s].assign(cfg.recall_points, 0.0);

  for (int k = 0; k < nk; ++k) {
    int num_gt = 0;
    for (std::size_t i = 0; i < ni; ++i) num_gt += static_cast<int>(gr.gts[i][k].size());
    if (num_gt == 0) continue;
    std::array<std::vector<std::pair<double, Verdict>>, kNumStages> entries;
    for (std::size_t i = 0; i < ni; ++i) {
      const auto& dets = gr.dets[i][k];
      const auto& db = dboxes[i][k];
      const auto& gb = gboxes[i][k];
      const MatchResult m75 = match_detections(db, gb, 0.75);
      const MatchResult m50 = match_detections(db, gb, 0.5);
      const MatchResult& mloc = own[i][k];
      for (std::size_t d = 0; d < dets.size(); ++d) {
        entries[kC75].emplace_back(dets[d]->score, m75.det_gt[d] >= 0 ? kTp : kFp);
        entries[kC50].emplace_back(dets[d]->score, m50.det_gt[d] >= 0 ? kTp : kFp);
        entries[kLoc].emplace_back(dets[d]->score, mloc.det_gt[d] >= 0 ? kTp : kFp);
      }
      // Sim then Oth: each widens the set of forgiven classes; credits made by
      // Sim stay in place for Oth.
      std::vector<bool> gt_taken(gb.size());
      for (std::size_t g = 0; g < gb.size(); ++g) gt_taken[g] = mloc.gt_det[g] >= 0;
      std::vector<std::pair<double, Verdict>> credits;
      for (int stage : {kSim, kOth}) {
        auto forgiven = [&](int j) { return j != k && (stage == kOth || similar(j, k)); };
        for (std::size_t d = 0; d < dets.size(); ++d) {
          Verdict v = mloc.det_gt[d] >= 0 ? kTp : kFp;
          if (v == kFp) {
            for (int j = 0; j < nk && v == kFp; ++j) {
              if (!forgiven(j)) continue;
              for (const BoxCorner& og : gboxes[i][j]) {
                if (iou(db[d], og) >= loose) {
                  v = kIgnored;
                  break;
                }
              }
            }
          }
          entries[stage].emplace_back(dets[d]->score, v);
        }
        // cross-class detections that found nothing in their own class
        std::vector<std::pair<const Detection*, int>> cross;
        for (int j = 0; j < nk; ++j) {
          if (!forgiven(j) || (stage == kOth && similar(j, k))) continue;
          for (std::size_t d = 0; d < gr.dets[i][j].size(); ++d) {
            if (own[i][j].det_gt[d] < 0) cross.emplace_back(gr.dets[i][j][d], static_cast<int>(d));
          }
        }
        std::stable_sort(cross.begin(), cross.end(), [](const auto& a, const auto& b) { return a.first->score > b.first->score; });
        for (const auto& [det, idx] : cross) {
          double best = loose;
          int m = -1;
          for (std::size_t g = 0; g < gb.size(); ++g) {
            if (gt_taken[g]) continue;
            const double v = iou(det->box, gb[g]);
            if (v >= best) best = v, m = static_cast<int>(g);
          }
          if (m < 0) continue;
          gt_taken[m] = true;
          credits.emplace_back(det->score, kTp);
        }
        entries[stage].insert(entries[stage].end(), credits.begin(), credits.end());
      }
    }
    for (const auto& e : entries[kOth]) {
      if (e.second == kTp) entries[kBG].push_back(e);
    }

    ErrorCurves cur;
    for (int s = 0; s < kNumStages; ++s) {
      if (s == kFN) {
        cur.precision[s].assign(cfg.recall_points, 1.0);
        cur.ap[s] = 1.0;
      } else {
        const PrCurve pr = compute_pr(merged_flags(entries[s]), num_gt, cfg.recall_points);
        cur.precision[s] = pr.precision;
        cur.ap[s] = pr.ap;
      }
    }
    out.classes.emplace_back(in.categories[k], cur);
  }

  const double n = static_cast<double>(out.classes.size());
  for (int s = 0; s < kNumStages; ++s) {
    if (out.classes.empty()) {
      out.aggregate.ap[s] = kNoGroundTruth;
      out.aggregate.precision[s].assign(cfg.recall_points, kNoGroundTruth);
      continue;
    }
    double sum = 0;
    for (const auto& [cat, c] : out.classes) {
      sum += c.ap[s];
      for (int j = 0; j < cfg.recall_points; ++j) out.aggregate.precision[s][j] += c.precision[s][j];
    }
    out.aggregate.ap[s] = sum / n;
    for (double& p : out.aggregate.precision[s]) p /= n;
  }
  return out;
}

double round6(double v) {
  const double r = std::round(v * 1e6) / 1e6;
  return r == 0.0 ? 0.0 : r;  // no negative zero
}

std::string metrics_table(const EvalReport& r) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %7s %7s %7s %7s %7s %7s %7s %7s %7s %7s\n", "class", "AP", "AP50", "AP75", "AP_S",
                "AP_M", "AP_L", "AR", "AR_S", "AR_M", "AR_L");
  out += line;
  auto row = [&](const std::string& name, const Metrics& m) {
    std::snprintf(line, sizeof line, "%-16s %7.3f %7.3f %7.3f %7.3f %7.3f %7.3f %7.3f %7.3f %7.3f %7.3f\n",
                  name.substr(0, 16).c_str(), m.ap, m.ap50, m.ap75, m.ap_small, m.ap_medium, m.ap_large, m.ar, m.ar_small,
                  m.ar_medium, m.ar_large);
    out += line;
  };
  for (const ClassReport& c : r.classes) row(c.category.name, c.metrics);
  row("all", r.aggregate);
  return out;
}

std::string breakdown_csv(const ErrorBreakdown& b) {
  std::string out = "class,recall";
  for (int s = 0; s < kNumStages; ++s) out += std::string(",") + stage_name(s);
  out += "\n";
  char buf[64];
  auto rows = [&](const std::string& name, const ErrorCurves& c) {
    for (std::size_t j = 0; j < b.recall.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.2f", b.recall[j]);
      out += name + "," + buf;
      for (int s = 0; s < kNumStages; ++s) {
        std::snprintf(buf, sizeof buf, ",%.6f", round6(c.precision[s][j]));
        out += buf;
      }
      out += "\n";
    }
  };
  rows("all", b.aggregate);
  for (const auto& [cat, c] : b.classes) rows(cat.name, c);
  return out;
}

}  // namespace a4d
