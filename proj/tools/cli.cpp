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

#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>

#include "a4d/config.hpp"
#include "a4d/dataio.hpp"
#include "a4d/error.hpp"
#include "a4d/evaluator.hpp"
#include "a4d/gradsuite.hpp"
#include "a4d/train.hpp"

namespace a4d::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct Common {
  std::string config;
  std::string out = ".";
  bool out_given = false;
  std::optional<std::uint64_t> seed;
  bool dump_arch = false;
  std::vector<std::string> sets;
};

struct DataArgs {
  std::string coco, voc, data, images;
  bool center_boxes = false;
};

RunConfig effective_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? default_config() : load_config(c.config);
  for (const std::string& s : c.sets) apply_override(cfg, s);
  if (c.seed) {
    cfg.train.seed = *c.seed;
    cfg.synthetic.seed = *c.seed;
  }
  validate(cfg);
  return cfg;
}

ordered_json provenance(const RunConfig& cfg) {
  ordered_json j;
  j["version"] = kVersion;
  j["config"] = ordered_json::parse(config_json(cfg));
  return j;
}

void write_text(const fs::path& dir, const std::string& name, const std::string& text) {
  write_file_atomic(dir / name, text);
}

void write_json(const fs::path& dir, const std::string& name, const ordered_json& j) {
  write_text(dir, name, j.dump(2) + "\n");
}

fs::path prepare_out(const Common& c) {
  const fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string() + ": cannot create output directory: " + ec.message());
  return dir;
}

ordered_json box_json(const BoxCorner& b) { return {round6(b.x1), round6(b.y1), round6(b.x2), round6(b.y2)}; }

ordered_json metrics_json(const Metrics& m) {
  return {{"AP", round6(m.ap)},           {"AP50", round6(m.ap50)},       {"AP75", round6(m.ap75)},
          {"AP_small", round6(m.ap_small)}, {"AP_medium", round6(m.ap_medium)}, {"AP_large", round6(m.ap_large)},
          {"AR", round6(m.ar)},           {"AR_small", round6(m.ar_small)}, {"AR_medium", round6(m.ar_medium)},
          {"AR_large", round6(m.ar_large)}};
}

ordered_json report_json(const EvalReport& r) {
  ordered_json classes = ordered_json::array();
  for (const ClassReport& c : r.classes) {
    classes.push_back({{"id", c.category.id},
                       {"name", c.category.name},
                       {"num_gt", c.num_gt},
                       {"num_det", c.num_det},
                       {"metrics", metrics_json(c.metrics)}});
  }
  return {{"aggregate", metrics_json(r.aggregate)}, {"classes", classes}};
}

// ---- data ------------------------------------------------------------------------

DatasetIndex load_index(const DataArgs& a) {
  const int given = !a.coco.empty() + !a.voc.empty() + !a.data.empty();
  if (given != 1) throw InvalidInput("exactly one of --coco, --voc, --data is required");
  if (!a.voc.empty()) return load_voc(a.voc);
  CocoLoadOptions opt;
  opt.center_boxes = a.center_boxes;
  if (!a.coco.empty()) return load_coco(a.coco, opt);
  return load_coco(fs::path(a.data) / "annotations.json", opt);
}

fs::path image_dir(const DataArgs& a) {
  if (!a.images.empty()) return a.images;
  if (!a.data.empty()) return fs::path(a.data) / "images";
  throw InvalidInput("--images DIR or --data DIR is required");
}

Tensor load_image(const fs::path& path, const ModelConfig& model) {
  const RgbImage img = read_ppm(path);
  if (img.width != model.image_width || img.height != model.image_height) {
    throw InvalidInput(path.string() + ": image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                       ", model expects " + std::to_string(model.image_width) + "x" +
                       std::to_string(model.image_height));
  }
  return image_tensor(img);
}

// Class index (0-based) of every category, in id order.
std::map<int, int> class_indices(const DatasetIndex& idx) {
  std::vector<int> ids;
  for (const Category& c : idx.categories) ids.push_back(c.id);
  std::sort(ids.begin(), ids.end());
  std::map<int, int> m;
  for (std::size_t i = 0; i < ids.size(); ++i) m[ids[i]] = static_cast<int>(i);
  return m;
}

void load_model(Detector& model, const std::string& checkpoint) {
  restore(load_checkpoint(checkpoint), model.params());
}

// ---- architecture ------------------------------------------------------------

ordered_json arch_json(const RunConfig& cfg) {
  const Detector model(cfg.model, cfg.train.seed);
  const NeckConfig& nc = cfg.model.neck;

  // Neck blocks in parameter registration order; attention blocks are keyed
  // one level deeper so each installed block gets its own entry.
  std::vector<std::pair<std::string, std::size_t>> groups;
  std::size_t model_total = 0;
  for (const Param* p : model.params().all()) {
    if (!p->trainable) continue;
    model_total += p->value.size();
    if (p->name.rfind("neck.", 0) != 0) continue;
    std::vector<std::string> parts;
    std::stringstream ss(p->name);
    for (std::string s; std::getline(ss, s, '.');) parts.push_back(s);
    const std::size_t depth = parts[1] == "attn" ? 4 : (parts[1] == "lateral3" || parts[1] == "lateral4" ||
                                                         parts[1] == "lateral5")
                                                            ? 2
                                                            : 3;
    std::string key;
    for (std::size_t i = 1; i < std::min(depth, parts.size()); ++i) key += (i > 1 ? "." : "") + parts[i];
    if (groups.empty() || groups.back().first != key) groups.push_back({key, 0});
    groups.back().second += p->value.size();
  }

  std::map<std::string, BlockInfo> attn;
  for (const BlockInfo& b : describe_blocks(nc)) attn.emplace(std::string("attn.") + slot_name(b.slot), b);

  ordered_json blocks = ordered_json::array();
  for (const auto& [key, count] : groups) {
    ordered_json b;
    b["name"] = key;
    if (auto it = attn.find(key); it != attn.end()) {
      b["kind"] = "attention4d";
      b["placement"] = slot_name(it->second.slot);
      b["level"] = it->second.level;
      b["size"] = {it->second.height, it->second.width};
    } else if (key.rfind("lateral", 0) == 0) {
      b["kind"] = "lateral";
      b["placement"] = "lateral";
    } else {
      b["kind"] = key.find("csp") != std::string::npos ? "csp_layer" : "downsample";
      b["placement"] = key.substr(0, key.find('.'));
    }
    b["params"] = count;
    blocks.push_back(b);
  }

  ordered_json j = provenance(cfg);
  j["neck"] = {{"placement", placement_name(nc.placement)},
               {"num_attention_blocks", nc.num_attention_blocks},
               {"parameter_count", parameter_count(nc)},
               {"blocks", blocks}};
  j["model_parameter_count"] = model_total;
  return j;
}

// ---- commands ----------------------------------------------------------------

int cmd_stats(const Common& c, const DataArgs& d, std::ostream& out) {
  const RunConfig cfg = effective_config(c);
  const DatasetIndex idx = load_index(d);
  const Histogram h = stats(idx);
  const fs::path dir = prepare_out(c);

  ordered_json rows = ordered_json::array();
  std::string table = "category              small  medium   large   total\n";
  char buf[160];
  for (std::size_t i = 0; i < h.categories.size(); ++i) {
    const auto& k = h.counts[i];
    const int total = k[0] + k[1] + k[2];
    rows.push_back({{"id", h.categories[i].id},
                    {"name", h.categories[i].name},
                    {"small", k[0]},
                    {"medium", k[1]},
                    {"large", k[2]},
                    {"total", total}});
    std::snprintf(buf, sizeof buf, "%-20s %6d  %6d  %6d  %6d\n", h.categories[i].name.c_str(), k[0], k[1], k[2],
                  total);
    table += buf;
  }
  std::snprintf(buf, sizeof buf, "%-20s %6s  %6s  %6s  %6d\n", "total", "", "", "", h.total);
  table += buf;

  ordered_json j = provenance(cfg);
  j["num_images"] = idx.images.size();
  j["num_annotations"] = idx.annotations.size();
  j["clamped_boxes"] = idx.clamped_boxes;
  j["classes"] = rows;
  j["total"] = h.total;
  write_json(dir, "stats.json", j);
  write_text(dir, "stats.txt", table);
  out << table;
  return kExitOk;
}

int cmd_eval(const Common& c, const DataArgs& d, const std::string& dets_path, std::optional<int> workers,
             std::ostream& out) {
  RunConfig cfg = effective_config(c);
  if (workers) {
    cfg.eval.workers = *workers;
    validate(cfg);
  }
  const DatasetIndex idx = load_index(d);
  const std::vector<GroundTruth> gts = idx.ground_truths();
  const std::vector<Detection> dets = load_detections(dets_path);
  const EvalReport r = evaluate({idx.categories, gts, dets}, cfg.eval);
  const fs::path dir = prepare_out(c);

  ordered_json j = provenance(cfg);
  j.update(report_json(r));
  write_json(dir, "eval.json", j);
  const std::string table = metrics_table(r);
  write_text(dir, "eval.txt", table);
  out << table;
  return kExitOk;
}

int cmd_analyze(const Common& c, const DataArgs& d, const std::string& dets_path, std::ostream& out) {
  const RunConfig cfg = effective_config(c);
  const DatasetIndex idx = load_index(d);
  const std::vector<GroundTruth> gts = idx.ground_truths();
  const std::vector<Detection> dets = load_detections(dets_path);
  const ErrorBreakdown b = error_breakdown({idx.categories, gts, dets}, cfg.eval, cfg.breakdown);
  const fs::path dir = prepare_out(c);

  auto stages = [](const ErrorCurves& e) {
    ordered_json s;
    for (int k = 0; k < kNumStages; ++k) s[stage_name(k)] = round6(e.ap[k]);
    return s;
  };
  ordered_json classes = ordered_json::array();
  for (const auto& [cat, curves] : b.classes) {
    classes.push_back({{"id", cat.id}, {"name", cat.name}, {"ap", stages(curves)}});
  }
  ordered_json j = provenance(cfg);
  j["aggregate"] = stages(b.aggregate);
  j["classes"] = classes;
  write_json(dir, "breakdown.json", j);
  write_text(dir, "breakdown.csv", breakdown_csv(b));

  char buf[64];
  out << "stage  AP\n";
  for (int k = 0; k < kNumStages; ++k) {
    std::snprintf(buf, sizeof buf, "%-5s  %.3f\n", stage_name(k), round6(b.aggregate.ap[k]));
    out << buf;
  }
  return kExitOk;
}

int cmd_assign_debug(const Common& c, const DataArgs& d, std::optional<int> image_id, const std::string& checkpoint,
                     std::ostream& out) {
  RunConfig cfg = effective_config(c);
  if (!checkpoint.empty()) {
    cfg.model = parse_config(load_checkpoint(checkpoint).config_json, checkpoint).model;
  }
  const DatasetIndex idx = load_index(d);
  if (idx.images.empty()) throw InvalidInput("dataset has no images");
  const ImageInfo* info = image_id ? idx.find_image(*image_id) : &idx.images.front();
  if (!info) throw InvalidInput("--image-id " + std::to_string(*image_id) + " not in dataset");
  const std::map<int, int> cls = class_indices(idx);
  if (static_cast<int>(cls.size()) != cfg.model.num_classes) {
    throw InvalidInput("dataset has " + std::to_string(cls.size()) + " categories, model has " +
                       std::to_string(cfg.model.num_classes) + " classes");
  }

  Detector model(cfg.model, cfg.train.seed);
  if (!checkpoint.empty()) load_model(model, checkpoint);
  const Tensor img = load_image(image_dir(d) / info->file_name, cfg.model);

  Graph g;
  const Detector::Output o = model.forward(g, g.constant(img.reshaped({1, 3, img.dim(1), img.dim(2)})), false);
  const Tensor& logits = g.value(o.logits);
  const Tensor& boxes = g.value(o.boxes);
  const std::vector<AnchorPoint>& anchors = model.anchors();
  const int na = static_cast<int>(anchors.size());
  const int nk = cfg.model.num_classes;

  std::vector<BoxCorner> pred(na);
  for (int a = 0; a < na; ++a) pred[a] = {boxes[4 * a], boxes[4 * a + 1], boxes[4 * a + 2], boxes[4 * a + 3]};
  std::vector<double> probs(logits.size());
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = 1.0 / (1.0 + std::exp(-logits[i]));
  std::vector<BoxCorner> gt_boxes;
  std::vector<int> gt_classes, gt_ann;
  for (const Annotation& an : idx.annotations) {
    if (an.image_id != info->id) continue;
    gt_boxes.push_back(an.box);
    gt_classes.push_back(cls.at(an.category_id));
    gt_ann.push_back(an.id);
  }
  const AssignProblem problem{anchors, pred, probs, nk, gt_boxes, gt_classes};
  const CostMatrix cm = build_cost_matrix(problem, cfg.assign);
  const Assignment as = dynamic_assign(cm, cfg.assign);

  ordered_json gts = ordered_json::array();
  for (int gi = 0; gi < cm.num_gt; ++gi) {
    ordered_json cands = ordered_json::array();
    for (int a = 0; a < na; ++a) {
      if (!cm.candidate(gi, a)) continue;
      cands.push_back({{"anchor", a},
                       {"point", {round6(anchors[a].cx), round6(anchors[a].cy)}},
                       {"stride", anchors[a].stride},
                       {"cost", round6(cm.cost_at(gi, a))},
                       {"iou", round6(cm.iou_at(gi, a))}});
    }
    gts.push_back({{"index", gi},
                   {"annotation_id", gt_ann[gi]},
                   {"class", gt_classes[gi]},
                   {"box", box_json(gt_boxes[gi])},
                   {"dynamic_k", as.dynamic_k[gi]},
                   {"anchors", as.gt_anchors[gi]},
                   {"candidates", cands}});
  }
  ordered_json assigned = ordered_json::array();
  for (int a = 0; a < na; ++a) {
    if (as.anchor_gt[a] < 0) continue;
    assigned.push_back({{"anchor", a}, {"gt", as.anchor_gt[a]}, {"soft_label", round6(as.soft_label[a])}});
  }

  ordered_json j = provenance(cfg);
  j["image_id"] = info->id;
  j["file_name"] = info->file_name;
  j["model"] = checkpoint.empty() ? ordered_json("initial weights") : ordered_json(checkpoint);
  j["num_anchors"] = na;
  j["num_positive"] = as.num_positive();
  j["gts"] = gts;
  j["assignment"] = assigned;
  j["unassigned_gts"] = as.unassigned_gts;
  const fs::path dir = prepare_out(c);
  write_json(dir, "assign_debug.json", j);
  out << "image " << info->id << ": " << cm.num_gt << " gts, " << as.num_positive() << " positive anchors, "
      << as.unassigned_gts.size() << " unassigned gts\n";
  return kExitOk;
}

int cmd_gradcheck(const Common& c, const std::vector<std::string>& only, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = effective_config(c);
  const GradCheckConfig& gc = cfg.gradcheck;
  const std::vector<std::string>& all = gradient_case_names();
  for (const std::string& n : only) {
    if (std::find(all.begin(), all.end(), n) == all.end()) throw InvalidInput("unknown gradient case: " + n);
  }
  const std::vector<std::string>& names = only.empty() ? all : only;

  ordered_json cases = ordered_json::array();
  std::vector<std::string> failed;
  char buf[256];
  for (const std::string& name : names) {
    GradCheckResult worst;
    std::uint64_t worst_seed = 0;
    std::size_t probes = 0;
    for (int s = 0; s < gc.seeds; ++s) {
      GradCheckOptions opt;
      opt.step = gc.step;
      opt.max_probes_per_param = gc.max_probes_per_param;
      opt.probe_seed = static_cast<std::uint64_t>(s);
      const GradCheckResult r = run_gradient_case(name, static_cast<std::uint64_t>(s), opt);
      probes += r.probes;
      if (s == 0 || !(r.max_rel_error <= worst.max_rel_error)) {
        worst = r;
        worst_seed = static_cast<std::uint64_t>(s);
      }
    }
    const bool ok = worst.max_rel_error < gc.tolerance;
    if (!ok) failed.push_back(name);
    cases.push_back({{"name", name},
                     {"max_rel_error", worst.max_rel_error},
                     {"worst_param", worst.worst_param},
                     {"worst_index", worst.worst_index},
                     {"worst_seed", worst_seed},
                     {"probes", probes},
                     {"pass", ok}});
    std::snprintf(buf, sizeof buf, "%-14s %.3e  %s\n", name.c_str(), worst.max_rel_error, ok ? "ok" : "FAIL");
    out << buf;
  }
  ordered_json j = provenance(cfg);
  j["tolerance"] = gc.tolerance;
  j["cases"] = cases;
  j["pass"] = failed.empty();
  write_json(prepare_out(c), "gradcheck.json", j);
  if (!failed.empty()) {
    std::string list;
    for (const std::string& f : failed) list += (list.empty() ? "" : ",") + f;
    err << error_line("numeric", "gradient check above tolerance: " + list) << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}

double mean_loss(const std::vector<StepRecord>& r, std::size_t begin, std::size_t end) {
  double s = 0;
  for (std::size_t i = begin; i < end; ++i) s += r[i].loss.total;
  return end > begin ? s / static_cast<double>(end - begin) : 0.0;
}

int cmd_train_toy(const Common& c, std::optional<int> epochs, bool quiet, std::ostream& out) {
  RunConfig cfg = effective_config(c);
  if (epochs) cfg.train.epochs = *epochs;
  cfg.model.num_classes = cfg.synthetic.num_classes;
  cfg.model.image_width = cfg.synthetic.width;
  cfg.model.image_height = cfg.synthetic.height;
  validate(cfg);

  const SyntheticDataset ds = gen_synthetic(cfg.synthetic);
  const std::vector<TrainSample> samples = make_samples(ds);
  if (samples.empty()) throw InvalidInput("synthetic dataset is empty");
  Detector model(cfg.model, cfg.train.seed);
  const int total = total_steps(cfg.train, samples.size());
  const std::vector<StepRecord> records = train(model, samples, cfg.train, [&](const StepRecord& r) {
    if (quiet || (r.step % 50 != 0 && r.step != total)) return;
    char buf[128];
    std::snprintf(buf, sizeof buf, "step %d/%d  lr %.5f  loss %.4f\n", r.step, total, r.lr, r.loss.total);
    out << buf;
  });

  std::vector<const Tensor*> images;
  std::vector<int> ids, cat_ids;
  for (const TrainSample& s : samples) {
    images.push_back(&s.image);
    ids.push_back(s.image_id);
  }
  for (const Category& k : ds.index.categories) cat_ids.push_back(k.id);
  const std::vector<Detection> dets = infer(model, images, ids, cat_ids, cfg.inference);
  const std::vector<GroundTruth> gts = ds.index.ground_truths();
  const EvalReport rep = evaluate({ds.index.categories, gts, dets}, cfg.eval);

  const fs::path dir = prepare_out(c);
  const std::string cfg_text = config_json(cfg);
  save_checkpoint(dir / "checkpoint.a4d", cfg_text, model.params());
  write_text(dir, "loss.csv", loss_csv(records));
  write_text(dir, "detections.json", dump_detections(dets));

  const std::size_t n = records.size(), w = std::min<std::size_t>(10, n);
  const double first = mean_loss(records, 0, w), last = mean_loss(records, n - w, n);
  ordered_json j = provenance(cfg);
  j["steps"] = n;
  j["skipped_shapes"] = ds.skipped_shapes;
  j["loss_first10"] = round6(first);
  j["loss_last10"] = round6(last);
  j["loss_ratio"] = round6(first > 0 ? last / first : 0.0);
  j["train_eval"] = report_json(rep);
  write_json(dir, "report.json", j);
  const std::string table = metrics_table(rep);
  write_text(dir, "report.txt", table);

  char buf[160];
  std::snprintf(buf, sizeof buf, "loss %.4f -> %.4f (ratio %.3f), train AP50 %.3f\n", first, last,
                first > 0 ? last / first : 0.0, rep.aggregate.ap50);
  out << table << buf;
  return kExitOk;
}

int cmd_infer(const Common& c, const DataArgs& d, const std::string& checkpoint, std::ostream& out) {
  if (checkpoint.empty()) throw InvalidInput("--checkpoint is required");
  RunConfig cfg = effective_config(c);
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  cfg.model = parse_config(ckpt.config_json, checkpoint).model;
  Detector model(cfg.model, 0);
  restore(ckpt, model.params());

  const fs::path dir_in = image_dir(d);
  std::vector<std::string> files;
  std::vector<int> ids, cat_ids;
  if (!d.coco.empty() || !d.data.empty() || !d.voc.empty()) {
    const DatasetIndex idx = load_index(d);
    for (const ImageInfo& im : idx.images) {
      files.push_back(im.file_name);
      ids.push_back(im.id);
    }
    for (const auto& [id, k] : class_indices(idx)) cat_ids.push_back(id);
    if (static_cast<int>(cat_ids.size()) != cfg.model.num_classes) {
      throw InvalidInput("dataset has " + std::to_string(cat_ids.size()) + " categories, model has " +
                         std::to_string(cfg.model.num_classes) + " classes");
    }
  } else {
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir_in, ec)) {
      if (e.path().extension() == ".ppm") files.push_back(e.path().filename().string());
    }
    if (ec) throw IoError(dir_in.string() + ": " + ec.message());
    std::sort(files.begin(), files.end());
    for (std::size_t i = 0; i < files.size(); ++i) ids.push_back(static_cast<int>(i) + 1);
    for (int k = 0; k < cfg.model.num_classes; ++k) cat_ids.push_back(k + 1);
  }

  std::vector<Tensor> tensors;
  tensors.reserve(files.size());
  for (const std::string& f : files) tensors.push_back(load_image(dir_in / f, cfg.model));
  std::vector<const Tensor*> ptrs;
  for (const Tensor& t : tensors) ptrs.push_back(&t);
  const std::vector<Detection> dets = infer(model, ptrs, ids, cat_ids, cfg.inference);

  const fs::path dir = prepare_out(c);
  write_text(dir, "detections.json", dump_detections(dets));
  ordered_json j = provenance(cfg);
  j["checkpoint"] = checkpoint;
  j["num_images"] = files.size();
  j["num_detections"] = dets.size();
  j["detections"] = "detections.json";
  write_json(dir, "infer.json", j);
  out << files.size() << " images, " << dets.size() << " detections\n";
  return kExitOk;
}

int cmd_gen_synth(const Common& c, std::ostream& out) {
  const RunConfig cfg = effective_config(c);
  const SyntheticDataset ds = gen_synthetic(cfg.synthetic);
  const fs::path dir = prepare_out(c);
  write_synthetic(ds, dir);
  ordered_json j = provenance(cfg);
  j["num_images"] = ds.index.images.size();
  j["num_annotations"] = ds.index.annotations.size();
  j["skipped_shapes"] = ds.skipped_shapes;
  write_json(dir, "synth.json", j);
  out << ds.index.images.size() << " images, " << ds.index.annotations.size() << " boxes, " << ds.skipped_shapes
      << " skipped shapes\n";
  return kExitOk;
}

int cmd_convert(const Common& c, const DataArgs& d, const std::string& to_coco, const std::string& to_voc,
                std::ostream& out) {
  effective_config(c);
  if (to_coco.empty() == to_voc.empty()) throw InvalidInput("exactly one of --to-coco, --to-voc is required");
  const DatasetIndex idx = load_index(d);
  if (!to_coco.empty()) {
    save_coco(idx, to_coco, d.center_boxes);
  } else {
    save_voc(idx, to_voc);
  }
  out << idx.images.size() << " images, " << idx.annotations.size() << " boxes, " << idx.clamped_boxes
      << " clamped\n";
  return kExitOk;
}

void add_data_options(CLI::App* sub, DataArgs& d, bool voc) {
  sub->add_option("--coco", d.coco, "COCO annotation file");
  if (voc) sub->add_option("--voc", d.voc, "directory of VOC XML files");
  sub->add_option("--data", d.data, "dataset directory with images/ and annotations.json");
  sub->add_flag("--center-boxes", d.center_boxes, "COCO bbox holds center x, center y, w, h");
}

}  // namespace

std::string error_line(const std::string& kind, const std::string& message) {
  std::string m;
  for (char ch : message) {
    if (ch == '"' || ch == '\\') {
      m += '\\';
      m += ch;
    } else if (ch == '\n') {
      m += "\\n";
    } else {
      m += ch;
    }
  }
  return "a4d: error kind=" + kind + " message=\"" + m + "\"";
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Detection kit: dataset statistics, evaluation, error analysis and toy training", "a4d"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  Common c;
  bool version = false;
  app.add_option("--config", c.config, "JSON config file");
  app.add_option("--out", c.out, "output directory");
  app.add_option("--seed", c.seed, "seed for training, model init and synthetic data");
  app.add_flag("--dump-arch", c.dump_arch, "print the neck layout as JSON");
  app.add_option("--set", c.sets, "override a config key, section.key=value")->allow_extra_args(false);
  app.add_flag("--version", version, "print the version");

  DataArgs d;
  std::string dets, checkpoint, to_coco, to_voc;
  std::optional<int> workers, image_id, epochs;
  std::vector<std::string> cases;
  bool quiet = false;

  CLI::App* stats_cmd = app.add_subcommand("stats", "class by size histogram of a dataset");
  add_data_options(stats_cmd, d, true);

  CLI::App* eval_cmd = app.add_subcommand("eval", "COCO-style evaluation of detections");
  add_data_options(eval_cmd, d, true);
  eval_cmd->add_option("--dets", dets, "COCO results file")->required();
  eval_cmd->add_option("--workers", workers, "evaluation threads");

  CLI::App* analyze_cmd = app.add_subcommand("analyze", "error-type breakdown of detections");
  add_data_options(analyze_cmd, d, true);
  analyze_cmd->add_option("--dets", dets, "COCO results file")->required();

  CLI::App* assign_cmd = app.add_subcommand("assign-debug", "cost matrix and assignment for one image");
  add_data_options(assign_cmd, d, true);
  assign_cmd->add_option("--images", d.images, "image directory");
  assign_cmd->add_option("--image-id", image_id, "image id (default: first image)");
  assign_cmd->add_option("--checkpoint", checkpoint, "model checkpoint (default: initial weights)");

  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  grad_cmd->add_option("--case", cases, "restrict to these cases")->allow_extra_args(false);

  CLI::App* train_cmd = app.add_subcommand("train-toy", "train on a synthetic dataset and self-evaluate");
  train_cmd->add_option("--epochs", epochs, "train for full passes instead of train.steps");
  train_cmd->add_flag("--quiet", quiet, "no progress lines");

  CLI::App* infer_cmd = app.add_subcommand("infer", "run a checkpoint over images");
  add_data_options(infer_cmd, d, false);
  infer_cmd->add_option("--images", d.images, "image directory");
  infer_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();

  CLI::App* synth_cmd = app.add_subcommand("gen-synth", "write a synthetic dataset");

  CLI::App* convert_cmd = app.add_subcommand("convert", "convert between COCO and VOC annotations");
  add_data_options(convert_cmd, d, true);
  convert_cmd->add_option("--to-coco", to_coco, "output COCO file");
  convert_cmd->add_option("--to-voc", to_voc, "output VOC directory");

  std::vector<const char*> argv{"a4d"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << error_line("usage", e.what()) << "\n";
    return kExitFailure;
  }
  if (version) {
    out << kVersion << "\n";
    return kExitOk;
  }
  c.out_given = app.count("--out") > 0;
  if (app.get_subcommands().empty() && !c.dump_arch) {
    err << error_line("usage", "a subcommand is required, see --help") << "\n";
    return kExitFailure;
  }

  try {
    if (c.dump_arch) {
      const std::string text = arch_json(effective_config(c)).dump(2) + "\n";
      if (c.out_given) write_text(prepare_out(c), "arch.json", text);
      out << text;
    }
    if (stats_cmd->parsed()) return cmd_stats(c, d, out);
    if (eval_cmd->parsed()) return cmd_eval(c, d, dets, workers, out);
    if (analyze_cmd->parsed()) return cmd_analyze(c, d, dets, out);
    if (assign_cmd->parsed()) return cmd_assign_debug(c, d, image_id, checkpoint, out);
    if (grad_cmd->parsed()) return cmd_gradcheck(c, cases, out, err);
    if (train_cmd->parsed()) return cmd_train_toy(c, epochs, quiet, out);
    if (infer_cmd->parsed()) return cmd_infer(c, d, checkpoint, out);
    if (synth_cmd->parsed()) return cmd_gen_synth(c, out);
    if (convert_cmd->parsed()) return cmd_convert(c, d, to_coco, to_voc, out);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << error_line("config", e.what()) << "\n";
  } catch (const InvalidInput& e) {
    err << error_line("input", e.what()) << "\n";
  } catch (const IoError& e) {
    err << error_line("io", e.what()) << "\n";
  } catch (const NumericError& e) {
    err << error_line("numeric", e.what()) << "\n";
    return kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    err << error_line("io", e.what()) << "\n";
  } catch (const std::exception& e) {
    err << error_line("internal", e.what()) << "\n";
  }
  return kExitFailure;
}

}  // namespace a4d::cli
