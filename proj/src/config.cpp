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
#include "a4d/config.hpp"

#include <set>

#include "a4d/error.hpp"
#include "json.hpp"

namespace a4d {

using nlohmann::json;

namespace {

// Reads one section, remembering which keys were consumed.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    auto it = doc.find(name_);
    if (it == doc.end()) return;
    if (!it->is_object()) throw ConfigError("config: '" + name_ + "' must be an object");
    obj_ = &*it;
  }

  template <typename T>
  void read(const char* key, T& out) {
    if (!obj_) return;
    auto it = obj_->find(key);
    if (it == obj_->end()) return;
    seen_.insert(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("expected true or false");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("expected a number");
      }
      out = it->get<T>();
    } catch (const std::exception& e) {
      throw ConfigError("config: " + name_ + "." + key + ": " + e.what());
    }
  }

  template <typename Enum, typename Parse>
  void read_enum(const char* key, Enum& out, Parse parse) {
    std::string s;
    bool present = obj_ && obj_->contains(key);
    read(key, s);
    if (!present) return;
    try {
      out = parse(s);
    } catch (const ConfigError& e) {
      throw ConfigError("config: " + name_ + "." + key + ": " + e.what());
    }
  }

  void finish() const {
    if (!obj_) return;
    for (const auto& [k, v] : obj_->items()) {
      if (!seen_.count(k)) throw ConfigError("config: unknown key '" + name_ + "." + k + "'");
    }
  }

 private:
  std::string name_;
  const json* obj_ = nullptr;
  std::set<std::string> seen_;
};

const std::set<std::string> kSections = {"model", "neck", "batchnorm", "assignment", "loss", "inference",
                                         "eval", "synthetic", "train", "gradcheck", "version"};

void apply_document(RunConfig& c, const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  for (const auto& [k, v] : doc.items()) {
    if (!kSections.count(k)) throw ConfigError("config: unknown section '" + k + "'");
  }
  if (doc.contains("version") && doc["version"] != kVersion) {
    throw ConfigError("config: version mismatch (file says " + doc["version"].dump() + ", this is " + kVersion + ")");
  }

  Section m(doc, "model");
  m.read("num_classes", c.model.num_classes);
  m.read("image_height", c.model.image_height);
  m.read("image_width", c.model.image_width);
  m.read("backbone_widths", c.model.backbone_widths);
  m.read("prior_prob", c.model.prior_prob);
  m.finish();

  NeckConfig& n = c.model.neck;
  Section nk(doc, "neck");
  nk.read("out_channels", n.out_channels);
  nk.read_enum("placement", n.placement, parse_placement);
  nk.read("num_attention_blocks", n.num_attention_blocks);
  nk.read("csp_depth", n.csp_depth);
  nk.read("heads", n.heads);
  nk.read("key_dim", n.key_dim);
  nk.read("value_dim", n.value_dim);
  nk.read("residual", n.residual);
  nk.read_enum("downsample", n.downsample, parse_downsample);
  nk.finish();

  Section bn(doc, "batchnorm");
  bn.read("eps", c.model.bn.eps);
  bn.read("momentum", c.model.bn.momentum);
  bn.finish();

  AssignConfig& a = c.assign;
  Section as(doc, "assignment");
  as.read("cls_weight", a.cls_weight);
  as.read("iou_weight", a.iou_weight);
  as.read("center_weight", a.center_weight);
  as.read_enum("center_cost_mode", a.center_mode, parse_center_cost_mode);
  as.read("eta", a.eta);
  as.read("epsilon", a.epsilon);
  as.read("center_floor", a.center_floor);
  as.read("alpha", a.alpha);
  as.read("beta", a.beta);
  as.read("dynamic_k_cap", a.dynamic_k_cap);
  as.read("iou_floor", a.iou_floor);
  as.read("prob_clamp", a.prob_clamp);
  as.finish();

  Section l(doc, "loss");
  l.read("cls_weight", c.loss.cls);
  l.read("reg_weight", c.loss.reg);
  l.finish();

  Section inf(doc, "inference");
  inf.read("score_threshold", c.inference.score_threshold);
  inf.read("nms_iou", c.inference.nms_iou);
  inf.read("max_detections", c.inference.max_detections);
  inf.finish();

  Section ev(doc, "eval");
  ev.read("iou_thresholds", c.eval.iou_thresholds);
  ev.read("recall_points", c.eval.recall_points);
  ev.read("max_detections", c.eval.max_detections);
  ev.read("workers", c.eval.workers);
  ev.read("supercategory", c.breakdown.supercategory);
  ev.read("loose_iou", c.breakdown.loose_iou);
  ev.finish();

  SyntheticConfig& s = c.synthetic;
  Section sy(doc, "synthetic");
  sy.read("num_images", s.num_images);
  sy.read("width", s.width);
  sy.read("height", s.height);
  sy.read("num_classes", s.num_classes);
  sy.read("min_shapes", s.min_shapes);
  sy.read("max_shapes", s.max_shapes);
  sy.read("min_side", s.min_side);
  sy.read("max_retries", s.max_retries);
  sy.read("seed", s.seed);
  sy.finish();

  TrainConfig& t = c.train;
  Section tr(doc, "train");
  tr.read("steps", t.steps);
  tr.read("epochs", t.epochs);
  tr.read("batch_size", t.batch_size);
  tr.read("seed", t.seed);
  tr.read("lr", t.sgd.lr);
  tr.read("momentum", t.sgd.momentum);
  tr.read("weight_decay", t.sgd.weight_decay);
  tr.read("literal_hparams", t.sgd.literal_hparams);
  tr.read("cosine", t.sgd.cosine);
  tr.read("min_lr_ratio", t.sgd.min_lr_ratio);
  tr.finish();

  Section gc(doc, "gradcheck");
  gc.read("seeds", c.gradcheck.seeds);
  gc.read("step", c.gradcheck.step);
  gc.read("tolerance", c.gradcheck.tolerance);
  gc.read("max_probes_per_param", c.gradcheck.max_probes_per_param);
  gc.finish();
}

json parse_or_throw(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": malformed JSON: " + e.what());
  }
}

}  // namespace

void validate(RunConfig& c) {
  finalize(c.model);
  validate(c.assign);
  validate(c.eval);
  validate(c.synthetic);
  c.train.assign = c.assign;
  c.train.loss = c.loss;
  validate(c.train);
  if (!(c.inference.score_threshold >= 0 && c.inference.score_threshold < 1)) {
    throw ConfigError("inference.score_threshold must be in [0, 1)");
  }
  if (!(c.inference.nms_iou > 0 && c.inference.nms_iou <= 1)) throw ConfigError("inference.nms_iou must be in (0, 1]");
  if (c.inference.max_detections < 1) throw ConfigError("inference.max_detections must be >= 1");
  if (!(c.model.bn.eps > 0)) throw ConfigError("batchnorm.eps must be positive");
  if (!(c.model.bn.momentum > 0 && c.model.bn.momentum <= 1)) throw ConfigError("batchnorm.momentum must be in (0, 1]");
  if (!(c.breakdown.loose_iou > 0 && c.breakdown.loose_iou <= 1)) throw ConfigError("eval.loose_iou must be in (0, 1]");
  if (c.gradcheck.seeds < 1 || !(c.gradcheck.step > 0) || !(c.gradcheck.tolerance > 0) ||
      c.gradcheck.max_probes_per_param < 0) {
    throw ConfigError("gradcheck: seeds >= 1, step > 0, tolerance > 0, max_probes_per_param >= 0 required");
  }
}

RunConfig default_config() {
  RunConfig c;
  validate(c);
  return c;
}

RunConfig parse_config(const std::string& text, const std::string& source) {
  RunConfig c;
  apply_document(c, parse_or_throw(text, source));
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path), path.string());
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("override '" + assignment + "' must look like section.key=value");
  }
  const std::string section = assignment.substr(0, dot), key = assignment.substr(dot + 1, eq - dot - 1);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  apply_document(cfg, json{{section, {{key, value}}}});
  validate(cfg);
}

std::string config_json(const RunConfig& c, int indent) {
  const NeckConfig& n = c.model.neck;
  const AssignConfig& a = c.assign;
  const TrainConfig& t = c.train;
  const json doc = {
      {"version", kVersion},
      {"model",
       {{"num_classes", c.model.num_classes},
        {"image_height", c.model.image_height},
        {"image_width", c.model.image_width},
        {"backbone_widths", c.model.backbone_widths},
        {"prior_prob", c.model.prior_prob}}},
      {"neck",
       {{"out_channels", n.out_channels},
        {"placement", placement_name(n.placement)},
        {"num_attention_blocks", n.num_attention_blocks},
        {"csp_depth", n.csp_depth},
        {"heads", n.heads},
        {"key_dim", n.key_dim},
        {"value_dim", n.value_dim},
        {"residual", n.residual},
        {"downsample", downsample_name(n.downsample)}}},
      {"batchnorm", {{"eps", c.model.bn.eps}, {"momentum", c.model.bn.momentum}}},
      {"assignment",
       {{"cls_weight", a.cls_weight},
        {"iou_weight", a.iou_weight},
        {"center_weight", a.center_weight},
        {"center_cost_mode", center_cost_mode_name(a.center_mode)},
        {"eta", a.eta},
        {"epsilon", a.epsilon},
        {"center_floor", a.center_floor},
        {"alpha", a.alpha},
        {"beta", a.beta},
        {"dynamic_k_cap", a.dynamic_k_cap},
        {"iou_floor", a.iou_floor},
        {"prob_clamp", a.prob_clamp}}},
      {"loss", {{"cls_weight", c.loss.cls}, {"reg_weight", c.loss.reg}}},
      {"inference",
       {{"score_threshold", c.inference.score_threshold},
        {"nms_iou", c.inference.nms_iou},
        {"max_detections", c.inference.max_detections}}},
      {"eval",
       {{"iou_thresholds", c.eval.iou_thresholds},
        {"recall_points", c.eval.recall_points},
        {"max_detections", c.eval.max_detections},
        {"workers", c.eval.workers},
        {"supercategory", c.breakdown.supercategory},
        {"loose_iou", c.breakdown.loose_iou}}},
      {"synthetic",
       {{"num_images", c.synthetic.num_images},
        {"width", c.synthetic.width},
        {"height", c.synthetic.height},
        {"num_classes", c.synthetic.num_classes},
        {"min_shapes", c.synthetic.min_shapes},
        {"max_shapes", c.synthetic.max_shapes},
        {"min_side", c.synthetic.min_side},
        {"max_retries", c.synthetic.max_retries},
        {"seed", c.synthetic.seed}}},
      {"train",
       {{"steps", t.steps},
        {"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"seed", t.seed},
        {"lr", t.sgd.lr},
        {"momentum", t.sgd.momentum},
        {"weight_decay", t.sgd.weight_decay},
        {"literal_hparams", t.sgd.literal_hparams},
        {"cosine", t.sgd.cosine},
        {"min_lr_ratio", t.sgd.min_lr_ratio}}},
      {"gradcheck",
       {{"seeds", c.gradcheck.seeds},
        {"step", c.gradcheck.step},
        {"tolerance", c.gradcheck.tolerance},
        {"max_probes_per_param", c.gradcheck.max_probes_per_param}}},
  };
  return doc.dump(indent);
}

}  // namespace a4d
