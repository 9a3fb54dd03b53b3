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
#include "a4d/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>

#include "a4d/error.hpp"
#include "a4d/ops.hpp"
#include "a4d/rng.hpp"

namespace a4d {

void validate(const SgdConfig& cfg) {
  if (!(cfg.lr > 0)) throw ConfigError("train.lr must be positive");
  if (!(cfg.momentum >= 0 && cfg.momentum < 1)) throw ConfigError("train.momentum must be in [0, 1)");
  if (!(cfg.weight_decay >= 0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(cfg.min_lr_ratio >= 0 && cfg.min_lr_ratio <= 1)) throw ConfigError("train.min_lr_ratio must be in [0, 1]");
}

Sgd::Sgd(ParamSet& params, const SgdConfig& cfg)
    : params_(params.trainable()),
      cfg_(cfg),
      momentum_(cfg.literal_hparams ? 5e-4 : cfg.momentum),
      weight_decay_(cfg.literal_hparams ? 0.9 : cfg.weight_decay) {
  validate(cfg);
  for (Param* p : params_) velocity_.emplace_back(p->value.shape());
}

double Sgd::lr_at(int step, int total) const {
  if (!cfg_.cosine || total <= 1) return cfg_.lr;
  const double t = static_cast<double>(step) / (total - 1);
  const double floor = cfg_.lr * cfg_.min_lr_ratio;
  return floor + 0.5 * (cfg_.lr - floor) * (1.0 + std::cos(std::numbers::pi * t));
}

void Sgd::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    Tensor& v = velocity_[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      v[j] = momentum_ * v[j] + p.grad[j] + weight_decay_ * p.value[j];
      p.value[j] -= lr * v[j];
    }
  }
}

Tensor image_tensor(const RgbImage& img) {
  Tensor t(Shape{3, img.height, img.width});
  const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) t[c * plane + i] = (img.pixels[3 * i + c] - 128.0) / 64.0;
  }
  return t;
}

std::vector<TrainSample> make_samples(const SyntheticDataset& ds) {
  std::vector<TrainSample> out;
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    TrainSample s;
    s.image_id = ds.index.images[i].id;
    s.image = image_tensor(ds.images[i]);
    for (const Annotation& a : ds.index.annotations) {
      if (a.image_id != s.image_id) continue;
      const auto it = std::find_if(ds.index.categories.begin(), ds.index.categories.end(),
                                   [&](const Category& c) { return c.id == a.category_id; });
      s.boxes.push_back(a.box);
      s.classes.push_back(static_cast<int>(it - ds.index.categories.begin()));
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

Tensor stack_images(const std::vector<const Tensor*>& images) {
  const Shape& s = images.front()->shape();
  Tensor out(Shape{static_cast<int>(images.size()), s[0], s[1], s[2]});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->shape() != s) throw InvalidInput("batch images differ in shape");
    std::copy(images[i]->data().begin(), images[i]->data().end(), out.ptr() + i * images[i]->size());
  }
  return out;
}

}  // namespace

BatchLoss detection_loss(Graph& g, const Detector& model, const Detector::Output& out,
                         const std::vector<const TrainSample*>& batch, const AssignConfig& assign,
                         const LossWeights& weights) {
  const Tensor& logits = g.value(out.logits);
  const Tensor& boxes = g.value(out.boxes);
  const int na = logits.dim(1), nk = logits.dim(2);
  const auto& anchors = model.anchors();
  Tensor targets(logits.shape());
  std::vector<BoxTarget> box_targets;
  int num_pos = 0;
  std::vector<BoxCorner> pred(na);
  std::vector<double> probs(static_cast<std::size_t>(na) * nk);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const TrainSample& s = *batch[b];
    if (s.boxes.empty()) continue;
    const double* bx = boxes.ptr() + b * na * 4;
    for (int a = 0; a < na; ++a) pred[a] = {bx[4 * a], bx[4 * a + 1], bx[4 * a + 2], bx[4 * a + 3]};
    const double* lg = logits.ptr() + b * na * nk;
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = sigmoid(lg[i]);
    AssignProblem pr{anchors, pred, probs, nk, s.boxes, s.classes};
    const Assignment as = dynamic_assign(build_cost_matrix(pr, assign), assign);
    for (int a = 0; a < na; ++a) {
      const int gi = as.anchor_gt[a];
      if (gi < 0) continue;
      targets[(b * na + a) * nk + s.classes[gi]] = as.soft_label[a];
      box_targets.push_back({static_cast<int>(b) * na + a, s.boxes[gi]});
      ++num_pos;
    }
  }
  const Var cls = soft_cls_loss(g, out.logits, targets, num_pos);
  const Var reg = giou_loss(g, out.boxes, box_targets);
  BatchLoss r;
  r.total = ops::add(g, ops::scale(g, cls, weights.cls), ops::scale(g, reg, weights.reg));
  r.breakdown = total_loss(g.value(cls)[0], g.value(reg)[0], num_pos, weights);
  return r;
}

void validate(const TrainConfig& cfg) {
  if (cfg.steps < 1 && cfg.epochs < 1) throw ConfigError("train.steps must be >= 1");
  if (cfg.epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (cfg.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  validate(cfg.sgd);
  validate(cfg.assign);
  if (!(cfg.loss.cls >= 0 && cfg.loss.reg >= 0)) throw ConfigError("loss weights must be >= 0");
}

int total_steps(const TrainConfig& cfg, std::size_t n) {
  if (cfg.epochs > 0) {
    return cfg.epochs * static_cast<int>((n + cfg.batch_size - 1) / cfg.batch_size);
  }
  return cfg.steps;
}

std::vector<StepRecord> train(Detector& model, const std::vector<TrainSample>& samples, const TrainConfig& cfg,
                              const std::function<void(const StepRecord&)>& on_step) {
  validate(cfg);
  if (samples.empty()) throw InvalidInput("train: no samples");
  Sgd opt(model.params(), cfg.sgd);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(samples.size());
  std::size_t cursor = order.size();
  const int steps = total_steps(cfg, samples.size());
  std::vector<StepRecord> log;
  for (int step = 0; step < steps; ++step) {
    std::vector<const TrainSample*> batch;
    while (static_cast<int>(batch.size()) < cfg.batch_size) {
      if (cursor == order.size()) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        cursor = 0;
      }
      batch.push_back(&samples[order[cursor++]]);
    }
    std::vector<const Tensor*> imgs;
    for (const TrainSample* s : batch) imgs.push_back(&s->image);
    Graph g;
    const Detector::Output out = model.forward(g, g.constant(stack_images(imgs)), true);
    const BatchLoss loss = detection_loss(g, model, out, batch, cfg.assign, cfg.loss);
    if (!std::isfinite(loss.breakdown.total)) throw NumericError("train: non-finite loss at step " + std::to_string(step + 1));
    model.params().zero_grad();
    g.backward(loss.total);
    StepRecord rec{step + 1, opt.lr_at(step, steps), loss.breakdown};
    opt.step(rec.lr);
    log.push_back(rec);
    if (on_step) on_step(rec);
  }
  return log;
}

std::string loss_csv(const std::vector<StepRecord>& records) {
  std::string out = "step,cls,reg,total,num_pos\n";
  char line[160];
  for (const StepRecord& r : records) {
    std::snprintf(line, sizeof line, "%d,%.6f,%.6f,%.6f,%d\n", r.step, r.loss.cls_loss, r.loss.reg_loss, r.loss.total,
                  r.loss.num_pos);
    out += line;
  }
  return out;
}

std::vector<Detection> infer(const Detector& model, const std::vector<const Tensor*>& images,
                             const std::vector<int>& image_ids, const std::vector<int>& category_ids,
                             const DecodeOptions& opt, int batch_size) {
  if (images.size() != image_ids.size()) throw InvalidInput("infer: one image id per image required");
  std::vector<Detection> all;
  for (std::size_t start = 0; start < images.size(); start += batch_size) {
    const std::size_t end = std::min(images.size(), start + batch_size);
    std::vector<const Tensor*> chunk(images.begin() + start, images.begin() + end);
    Graph g;
    const Detector::Output out = model.forward(g, g.constant(stack_images(chunk)), false);
    const std::vector<int> ids(image_ids.begin() + start, image_ids.begin() + end);
    for (auto& per_image : decode(g.value(out.logits), g.value(out.boxes), ids, category_ids, opt)) {
      all.insert(all.end(), per_image.begin(), per_image.end());
    }
  }
  return all;
}

// ---- checkpoints ---------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'A', '4', 'D', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Cursor {
 public:
  Cursor(const std::string& data, std::string source) : data_(data), source_(std::move(source)) {}
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string bytes(std::uint64_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > data_.size() - pos_) throw InvalidInput(source_ + ": truncated checkpoint");
  }
  const std::string& data_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::string& config_json, const ParamSet& params) {
  std::string out(kMagic, sizeof kMagic);
  put_u64(out, config_json.size());
  out += config_json;
  put_u64(out, params.all().size());
  for (const Param* pp : params.all()) {
    const Param& p = *pp;
    put_u64(out, p.name.size());
    out += p.name;
    put_u64(out, p.value.shape().size());
    for (int d : p.value.shape()) put_u64(out, static_cast<std::uint64_t>(d));
    for (double v : p.value.data()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      put_u64(out, bits);
    }
  }
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  if (data.size() < sizeof kMagic || data.compare(0, sizeof kMagic, kMagic, sizeof kMagic) != 0) {
    throw InvalidInput(path.string() + ": not an a4d checkpoint");
  }
  Cursor c(data, path.string());
  c.bytes(sizeof kMagic);
  Checkpoint ck;
  ck.config_json = c.bytes(c.u64());
  const std::uint64_t n = c.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string name = c.bytes(c.u64());
    const std::uint64_t rank = c.u64();
    if (rank > 8) throw InvalidInput(path.string() + ": bad rank for " + name);
    Shape shape;
    for (std::uint64_t r = 0; r < rank; ++r) shape.push_back(static_cast<int>(c.u64()));
    Tensor t(shape);
    for (double& v : t.data()) {
      const std::uint64_t bits = c.u64();
      std::memcpy(&v, &bits, sizeof v);
    }
    ck.params.emplace_back(std::move(name), std::move(t));
  }
  if (!c.done()) throw InvalidInput(path.string() + ": trailing bytes in checkpoint");
  return ck;
}

void restore(const Checkpoint& ckpt, ParamSet& params) {
  if (ckpt.params.size() != params.all().size()) {
    throw InvalidInput("checkpoint has " + std::to_string(ckpt.params.size()) + " params, model has " +
                       std::to_string(params.all().size()));
  }
  for (const auto& [name, value] : ckpt.params) {
    Param* p = params.find(name);
    if (!p) throw InvalidInput("checkpoint param '" + name + "' not in model");
    if (p->value.shape() != value.shape()) {
      throw InvalidInput("checkpoint param '" + name + "' has shape " + shape_str(value.shape()) + ", model expects " +
                         shape_str(p->value.shape()));
    }
    p->value = value;
  }
}

}  // namespace a4d
