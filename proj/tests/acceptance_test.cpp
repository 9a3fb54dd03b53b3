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

// Acceptance checks, one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <sstream>

#include <unistd.h>

#include "a4d/assignment.hpp"
#include "a4d/attention4d.hpp"
#include "a4d/dataio.hpp"
#include "a4d/evaluator.hpp"
#include "a4d/gradsuite.hpp"
#include "a4d/neck.hpp"
#include "cli.hpp"
#include "oracles.hpp"

namespace {

using namespace a4d;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

int g_failed = 0;

void report(int id, const char* name, const std::function<Outcome()>& check) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  std::printf("%s %d %s (%.1fs) %s\n", o.pass ? "PASS" : "FAIL", id, name, seconds_since(t0), o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++g_failed;
}

std::string fmt(const char* f, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome gradient_suite() {
  Outcome o;
  const std::vector<std::string> cases{"conv1x1",      "batchnorm",     "softmax",  "attention4d",
                                       "csp_layer",    "neck_forward",  "soft_cls_loss", "giou_loss"};
  const auto t0 = Clock::now();
  double worst = 0;
  std::string worst_case;
  for (const std::string& name : cases) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      GradCheckOptions opt;
      opt.step = 1e-5;
      opt.max_probes_per_param = 4;
      opt.probe_seed = seed;
      const GradCheckResult r = run_gradient_case(name, seed, opt);
      if (!(r.max_rel_error <= worst)) {
        worst = r.max_rel_error;
        worst_case = name + " seed " + std::to_string(seed) + " " + r.worst_param;
      }
    }
  }
  const double t = seconds_since(t0);
  o.require(worst < 1e-4, "max relative error " + fmt("%.3e", worst) + " at " + worst_case);
  o.require(t < 60.0, "runtime " + fmt("%.1f", t) + " s");
  if (o.pass) o.detail = "max relative error " + fmt("%.2e", worst) + " (" + worst_case + ")";
  return o;
}

Outcome attention_oracle() {
  Outcome o;
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    ParamSet ps;
    Attention4DConfig cfg;
    cfg.channels = 8;
    cfg.heads = 4;
    cfg.key_dim = 4;
    cfg.height = cfg.width = 4;
    const Attention4DParams p = init_attention4d(ps, "a", cfg, rng);
    for (Param* q : ps.all()) {
      const bool var = q->name.find("running_var") != std::string::npos;
      for (std::size_t i = 0; i < q->value.size(); ++i) q->value[i] = var ? rng.uniform(0.5, 2) : rng.uniform(-1, 1);
    }
    const Tensor x = oracle::random_tensor({1, 8, 4, 4}, rng);
    for (bool train : {true, false}) {
      ops::BatchNormOptions bn;
      bn.train = train;
      Graph g;
      const Tensor got = g.value(attention4d_forward(g, g.constant(x), p, bn));
      worst = std::max(worst, oracle::max_abs_diff(got, oracle::attention4d(x, p, train, bn.eps)));
    }
  }
  o.require(worst < 1e-10, "oracle gap " + fmt("%.3e", worst));

  double ident = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(1000 + seed);
    ParamSet ps;
    Attention4DConfig cfg;
    cfg.channels = 8;
    cfg.height = cfg.width = 4;
    const Attention4DParams p = init_attention4d(ps, "a", cfg, rng);
    const Tensor x = oracle::random_tensor({1, 8, 4, 4}, rng);
    Graph g;
    ident = std::max(ident, oracle::max_abs_diff(g.value(attention4d_forward(g, g.constant(x), p, {})), x));
  }
  o.require(ident < 1e-12, "identity gap " + fmt("%.3e", ident));
  if (o.pass) o.detail = "oracle gap " + fmt("%.2e", worst) + ", identity gap " + fmt("%.2e", ident);
  return o;
}

Outcome assignment_oracle() {
  Outcome o;
  Rng rng(77);
  AssignConfig cfg;
  int positives = 0;
  for (int t = 0; t < 200; ++t) {
    const int na = rng.range(1, 32), ng = rng.range(0, 6), nk = rng.range(1, 3);
    std::vector<AnchorPoint> anchors(na);
    std::vector<BoxCorner> pred(na);
    std::vector<double> probs(static_cast<std::size_t>(na) * nk);
    for (int a = 0; a < na; ++a) {
      const int stride = 8 << rng.range(0, 2);
      anchors[a] = {rng.uniform(0, 64), rng.uniform(0, 64), stride, 3};
      const double w = rng.uniform(2, 40), h = rng.uniform(2, 40);
      pred[a] = {anchors[a].cx - w * rng.uniform(), anchors[a].cy - h * rng.uniform(), 0, 0};
      pred[a].x2 = pred[a].x1 + w;
      pred[a].y2 = pred[a].y1 + h;
    }
    for (double& p : probs) p = rng.uniform();
    std::vector<BoxCorner> gts(ng);
    std::vector<int> cls(ng);
    for (int g = 0; g < ng; ++g) {
      const double x = rng.uniform(0, 50), y = rng.uniform(0, 50);
      gts[g] = {x, y, x + rng.uniform(4, 40), y + rng.uniform(4, 40)};
      cls[g] = rng.range(0, nk - 1);
    }
    const CostMatrix m = build_cost_matrix({anchors, pred, probs, nk, gts, cls}, cfg);
    const Assignment got = dynamic_assign(m, cfg);
    const oracle::AssignResult ref = oracle::assign(m, cfg.dynamic_k_cap);
    o.require(got.anchor_gt == ref.anchor_gt, "instance " + std::to_string(t) + " differs from the oracle");
    positives += got.num_positive();
    for (double s : {0.25, 7.0}) {
      CostMatrix scaled = m;
      for (double& c : scaled.cost) c *= s;
      o.require(dynamic_assign(scaled, cfg).anchor_gt == got.anchor_gt,
                "instance " + std::to_string(t) + " changes under scaling by " + fmt("%g", s));
    }
  }
  if (o.pass) o.detail = "200 instances, " + std::to_string(positives) + " positives";
  return o;
}

Outcome cost_arithmetic() {
  Outcome o;
  const double t1 = location_cost(1.0), th = location_cost(0.5), d = classification_cost(0.5, 1.0);
  o.require(t1 == 0.0, "theta(1) = " + fmt("%.9f", t1));
  o.require(std::fabs(th - 0.693147) <= 1e-6, "theta(0.5) = " + fmt("%.9f", th));
  o.require(std::fabs(d - 0.173287) <= 1e-6, "delta(1, 0.5) = " + fmt("%.9f", d));
  const AssignConfig cfg;
  o.require(cfg.cls_weight == 1 && cfg.iou_weight == 3 && cfg.center_weight == 1, "default weights");
  o.require(total_cost(2.0, 5.0, 7.0, cfg) == 2.0 + 15.0 + 7.0, "total cost weighting");
  if (o.pass) o.detail = "theta(0.5)=" + fmt("%.6f", th) + " delta=" + fmt("%.6f", d);
  return o;
}

struct Instance {
  std::vector<Category> cats;
  std::vector<GroundTruth> gts;
  std::vector<Detection> dets;
};

Instance random_instance(Rng& rng) {
  Instance in;
  const int nc = rng.range(1, 4);
  for (int c = 1; c <= nc; ++c) in.cats.push_back({c, "c" + std::to_string(c)});
  const int images = rng.range(1, 5);
  for (int img = 1; img <= images; ++img) {
    for (int i = rng.range(0, 5); i > 0; --i) {
      const double x = rng.uniform(0, 100), y = rng.uniform(0, 100);
      const BoxCorner b{x, y, x + rng.uniform(4, 120), y + rng.uniform(4, 120)};
      const int c = rng.range(1, nc);
      in.gts.push_back({img, c, b});
      if (rng.uniform() < 0.7) {
        const double j = rng.uniform(0, 0.5) * b.width();
        in.dets.push_back({img, rng.uniform() < 0.7 ? c : rng.range(1, nc), rng.uniform(), {b.x1 + j, b.y1, b.x2 + j, b.y2}});
      }
    }
    for (int i = rng.range(0, 3); i > 0; --i) {
      const double x = rng.uniform(0, 150), y = rng.uniform(0, 150);
      in.dets.push_back({img, rng.range(1, nc), rng.uniform(), {x, y, x + rng.uniform(4, 50), y + rng.uniform(4, 50)}});
    }
  }
  return in;
}

Outcome evaluator_cases() {
  Outcome o;
  const std::vector<Category> cats{{1, "crack"}};
  const std::vector<GroundTruth> gts{{1, 1, {0, 0, 10, 10}}};
  const std::vector<Detection> dets{{1, 1, 0.9, {0, 0, 10, 6}}};
  const Metrics m = evaluate({cats, gts, dets}).aggregate;
  o.require(m.ap50 == 1.0, "AP50 = " + fmt("%.6f", m.ap50));
  o.require(m.ap75 == 0.0, "AP75 = " + fmt("%.6f", m.ap75));
  o.require(round6(m.ap) == 0.3, "AP = " + fmt("%.9f", m.ap));
  o.require(m.ap_medium == -1.0 && m.ap_large == -1.0 && m.ar_medium == -1.0, "empty bucket sentinel");

  Rng rng(2718);
  int with_gt = 0;
  for (int t = 0; t < 100; ++t) {
    const Instance in = random_instance(rng);
    const ErrorBreakdown b = error_breakdown({in.cats, in.gts, in.dets});
    auto chain_ok = [](const ErrorCurves& e) {
      for (int s = 1; s < kNumStages; ++s)
        if (e.ap[s] < e.ap[s - 1]) return false;
      return e.ap[kFN] == 1.0;
    };
    if (b.classes.empty()) continue;
    ++with_gt;
    o.require(chain_ok(b.aggregate), "breakdown chain, instance " + std::to_string(t));
    for (const auto& [cat, c] : b.classes) o.require(chain_ok(c), "class chain, instance " + std::to_string(t));
  }
  if (o.pass) o.detail = "hand case AP=0.300 AP50=1.000 AP75=0.000; chain checked on " + std::to_string(with_gt) + " instances";
  return o;
}

Outcome ablation_structure() {
  Outcome o;
  ModelConfig mc;
  finalize(mc);
  NeckConfig n = mc.neck;
  n.placement = Placement::kBoth;
  std::vector<std::size_t> counts;
  for (int b = 1; b <= 4; ++b) {
    n.num_attention_blocks = b;
    counts.push_back(parameter_count(n));
  }
  for (int i = 1; i < 4; ++i) o.require(counts[i] > counts[i - 1], "count not increasing at " + std::to_string(i + 1) + " blocks");
  NeckConfig td = mc.neck, single = mc.neck;
  td.placement = Placement::kTopDownOnly;
  td.num_attention_blocks = 2;
  single.placement = Placement::kSingleAtEnd;
  single.num_attention_blocks = 1;
  n.num_attention_blocks = 4;
  const std::size_t both = parameter_count(n), top = parameter_count(td), one = parameter_count(single);
  o.require(both > top && top > one, "placement ordering");
  // the closed form agrees with what init_neck allocates
  for (const NeckConfig* c : {&n, &td, &single}) {
    ParamSet ps;
    Rng rng(0);
    init_neck(ps, "neck", *c, rng);
    o.require(ps.trainable_count() == parameter_count(*c), "closed form vs allocation");
  }
  std::ostringstream s;
  s << "blocks 1-4: " << counts[0] << " " << counts[1] << " " << counts[2] << " " << counts[3] << "; both " << both
    << " > top_down_only " << top << " > single_at_end " << one;
  if (o.pass) o.detail = s.str();
  return o;
}

fs::path g_work;

struct ToyRun {
  int code = -1;
  std::string err;
  double seconds = 0;
};

ToyRun train_toy(const std::string& out) {
  std::ostringstream so, se;
  const auto t0 = Clock::now();
  ToyRun r;
  r.code = cli::run({"train-toy", "--quiet", "--out", (g_work / out).string()}, so, se);
  r.seconds = seconds_since(t0);
  r.err = se.str();
  return r;
}

ToyRun g_first;

Outcome toy_training() {
  Outcome o;
  g_first = train_toy("run1");
  o.require(g_first.code == 0, "train-toy exited " + std::to_string(g_first.code) + ": " + g_first.err);
  if (!o.pass) return o;
  std::istringstream csv(read_file(g_work / "run1" / "loss.csv"));
  std::string line;
  std::getline(csv, line);
  std::vector<double> total;
  while (std::getline(csv, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
    total.push_back(std::stod(f.at(3)));
  }
  o.require(total.size() == 300, "expected 300 steps, got " + std::to_string(total.size()));
  if (!o.pass) return o;
  double first = 0, last = 0;
  for (int i = 0; i < 10; ++i) {
    first += total[i] / 10;
    last += total[total.size() - 10 + i] / 10;
  }
  const nlohmann::json rep = nlohmann::json::parse(read_file(g_work / "run1" / "report.json"));
  const double ap50 = rep["train_eval"]["aggregate"]["AP50"].get<double>();
  const auto& syn = rep["config"]["synthetic"];
  o.require(syn["num_images"] == 200 && syn["width"] == 64 && syn["height"] == 64 && syn["num_classes"] == 3 &&
                syn["seed"] == 0 && rep["config"]["train"]["batch_size"] == 4,
            "unexpected synthetic or batch settings");
  o.require(last <= 0.5 * first, "loss ratio " + fmt("%.3f", last / first));
  o.require(ap50 >= 0.5, "train AP50 " + fmt("%.3f", ap50));
  o.require(g_first.seconds < 600, "runtime " + fmt("%.0f", g_first.seconds) + " s");
  if (o.pass) {
    o.detail = "loss " + fmt("%.4f", first) + " -> " + fmt("%.4f", last) + " (ratio " + fmt("%.3f", last / first) +
               "), AP50 " + fmt("%.3f", ap50) + ", " + fmt("%.0f", g_first.seconds) + " s";
  }
  return o;
}

bool conserved(const DatasetIndex& idx) {
  const Histogram h = stats(idx);
  int sum = 0;
  for (std::size_t k = 0; k < h.categories.size(); ++k) {
    int per = 0;
    for (const Annotation& a : idx.annotations) per += a.category_id == h.categories[k].id;
    if (h.counts[k][0] + h.counts[k][1] + h.counts[k][2] != per) return false;
    sum += per;
  }
  return sum == h.total && h.total == static_cast<int>(idx.annotations.size());
}

Outcome round_trips() {
  Outcome o;
  SyntheticConfig sc;
  sc.num_images = 50;
  sc.num_classes = 5;
  sc.width = 96;
  sc.height = 96;
  sc.seed = 50;
  const SyntheticDataset fixture = gen_synthetic(sc);
  const fs::path dir = g_work / "fixture";
  save_voc(fixture.index, dir / "voc");
  const DatasetIndex v1 = load_voc(dir / "voc");
  o.require(v1.images.size() == 50, "fixture has " + std::to_string(v1.images.size()) + " images");
  bool integral = true;
  for (const Annotation& a : v1.annotations)
    for (double c : {a.box.x1, a.box.y1, a.box.x2, a.box.y2}) integral = integral && c == std::floor(c);
  o.require(integral, "fixture boxes are not integral");

  save_coco(v1, dir / "coco.json");
  const DatasetIndex c = load_coco(dir / "coco.json");
  o.require(c.images == v1.images && c.annotations == v1.annotations && c.categories == v1.categories,
            "VOC -> COCO changed the index");
  save_voc(c, dir / "voc2");
  const DatasetIndex v2 = load_voc(dir / "voc2");
  o.require(v2.images == v1.images && v2.annotations == v1.annotations && v2.categories == v1.categories,
            "COCO -> VOC changed the index");

  save_coco(fixture.index, dir / "direct.json");
  const DatasetIndex d = load_coco(dir / "direct.json");
  o.require(d.annotations == fixture.index.annotations && d.images == fixture.index.images,
            "COCO save/load changed the index");

  int datasets = 0;
  for (const DatasetIndex* idx : {&fixture.index, &v1, &c, &v2, &d}) {
    o.require(conserved(*idx), "stats conservation");
    ++datasets;
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SyntheticConfig s;
    s.seed = seed;
    s.num_classes = 1 + static_cast<int>(seed);
    o.require(conserved(gen_synthetic(s).index), "stats conservation, seed " + std::to_string(seed));
    ++datasets;
  }
  if (o.pass) {
    o.detail = std::to_string(v1.annotations.size()) + " boxes preserved; conservation on " + std::to_string(datasets) +
               " datasets";
  }
  return o;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

bool same_report(const EvalReport& a, const EvalReport& b) {
  auto same = [](const Metrics& x, const Metrics& y) {
    return same_bits(x.ap, y.ap) && same_bits(x.ap50, y.ap50) && same_bits(x.ap75, y.ap75) &&
           same_bits(x.ap_small, y.ap_small) && same_bits(x.ap_medium, y.ap_medium) &&
           same_bits(x.ap_large, y.ap_large) && same_bits(x.ar, y.ar) && same_bits(x.ar_small, y.ar_small) &&
           same_bits(x.ar_medium, y.ar_medium) && same_bits(x.ar_large, y.ar_large);
  };
  if (a.classes.size() != b.classes.size() || !same(a.aggregate, b.aggregate)) return false;
  for (std::size_t i = 0; i < a.classes.size(); ++i) {
    if (!same(a.classes[i].metrics, b.classes[i].metrics)) return false;
  }
  return true;
}

Outcome determinism() {
  Outcome o;
  if (g_first.code != 0) g_first = train_toy("run1");
  const ToyRun second = train_toy("run2");
  o.require(g_first.code == 0 && second.code == 0, "train-toy failed: " + g_first.err + second.err);
  if (!o.pass) return o;
  const std::string a = read_file(g_work / "run1" / "loss.csv"), b = read_file(g_work / "run2" / "loss.csv");
  o.require(a == b, "loss CSVs differ");

  // the trained model's detections on its training split, then random instances
  SyntheticConfig sc;
  const SyntheticDataset ds = gen_synthetic(sc);
  const std::vector<GroundTruth> gts = ds.index.ground_truths();
  const std::vector<Detection> dets = load_detections(g_work / "run1" / "detections.json");
  EvalConfig one, four;
  four.workers = 4;
  o.require(same_report(evaluate({ds.index.categories, gts, dets}, one), evaluate({ds.index.categories, gts, dets}, four)),
            "trained-model evaluation differs across worker counts");
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    const Instance in = random_instance(rng);
    o.require(same_report(evaluate({in.cats, in.gts, in.dets}, one), evaluate({in.cats, in.gts, in.dets}, four)),
              "random instance " + std::to_string(t) + " differs across worker counts");
  }
  if (o.pass) o.detail = "loss CSVs identical (" + std::to_string(a.size()) + " bytes); evaluator bitwise equal at 1 and 4 workers";
  return o;
}

}  // namespace

int main() {
  g_work = fs::temp_directory_path() / ("a4d_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  report(1, "gradient suite", gradient_suite);
  report(2, "attention oracle", attention_oracle);
  report(3, "assignment oracle", assignment_oracle);
  report(4, "cost arithmetic", cost_arithmetic);
  report(5, "evaluator hand cases", evaluator_cases);
  report(6, "ablation structure", ablation_structure);
  report(7, "toy training", toy_training);
  report(8, "data round trips", round_trips);
  report(9, "determinism", determinism);

  fs::remove_all(g_work);
  std::printf("%d of 9 criteria failed\n", g_failed);
  return g_failed;
}
