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
#include "a4d/dataio.hpp"

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unistd.h>

#include "a4d/error.hpp"
#include "a4d/rng.hpp"
#include "json.hpp"

namespace a4d {

namespace fs = std::filesystem;
using nlohmann::json;

const ImageInfo* DatasetIndex::find_image(int id) const {
  for (const ImageInfo& im : images) {
    if (im.id == id) return &im;
  }
  return nullptr;
}

const Category* DatasetIndex::find_category(int id) const {
  for (const Category& c : categories) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

std::vector<GroundTruth> DatasetIndex::ground_truths() const {
  std::vector<GroundTruth> out;
  out.reserve(annotations.size());
  for (const Annotation& a : annotations) out.push_back({a.image_id, a.category_id, a.box});
  return out;
}

void validate(const DatasetIndex& index) {
  std::set<int> images, cats, anns;
  for (const ImageInfo& im : index.images) {
    if (!images.insert(im.id).second) throw InvalidInput("duplicate image id " + std::to_string(im.id));
    if (im.width < 0 || im.height < 0) throw InvalidInput("image " + std::to_string(im.id) + " has negative size");
  }
  for (const Category& c : index.categories) {
    if (!cats.insert(c.id).second) throw InvalidInput("duplicate category id " + std::to_string(c.id));
  }
  for (const Annotation& a : index.annotations) {
    const std::string id = std::to_string(a.id);
    if (!anns.insert(a.id).second) throw InvalidInput("duplicate annotation id " + id);
    if (!images.count(a.image_id)) {
      throw InvalidInput("annotation " + id + " references missing image_id " + std::to_string(a.image_id));
    }
    if (!cats.count(a.category_id)) {
      throw InvalidInput("annotation " + id + " references missing category_id " + std::to_string(a.category_id));
    }
    if (!a.box.valid()) throw InvalidInput("annotation " + id + " has an inverted box");
  }
}

// ---- COCO -------------------------------------------------------------------

namespace {

// Integral values are written as JSON integers so integer boxes survive
// byte-for-byte; anything else keeps full double precision.
json number(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::fabs(v) < 9e15) return static_cast<std::int64_t>(v);
  return v;
}

class JsonReader {
 public:
  explicit JsonReader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    throw InvalidInput(source_ + ": " + path + ": " + what);
  }

  const json& field(const json& obj, const std::string& path, const char* key) const {
    if (!obj.is_object()) fail(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(path + "." + key, "missing field");
    return *it;
  }

  const json& array(const json& obj, const std::string& path, const char* key) const {
    const json& a = field(obj, path, key);
    if (!a.is_array()) fail(path + "." + key, "expected an array");
    return a;
  }

  int integer(const json& obj, const std::string& path, const char* key) const {
    const json& v = field(obj, path, key);
    if (v.is_number_integer()) return v.get<int>();
    if (v.is_number_float() && v.get<double>() == std::floor(v.get<double>())) return static_cast<int>(v.get<double>());
    fail(path + "." + key, "expected an integer");
  }

  double real(const json& v, const std::string& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(path, "not finite");
    return d;
  }

  std::string string(const json& obj, const std::string& path, const char* key) const {
    const json& v = field(obj, path, key);
    if (!v.is_string()) fail(path + "." + key, "expected a string");
    return v.get<std::string>();
  }

  std::array<double, 4> box(const json& obj, const std::string& path) const {
    const json& b = field(obj, path, "bbox");
    if (!b.is_array() || b.size() != 4) fail(path + ".bbox", "expected 4 numbers");
    std::array<double, 4> out;
    for (int i = 0; i < 4; ++i) out[i] = real(b[i], path + ".bbox[" + std::to_string(i) + "]");
    return out;
  }

 private:
  std::string source_;
};

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(source + ": malformed JSON: " + e.what());
  }
}

BoxCorner box_from_array(const std::array<double, 4>& b, bool center, const JsonReader& r, const std::string& path) {
  if (b[2] < 0 || b[3] < 0) r.fail(path + ".bbox", "negative width or height");
  return center ? to_corner(BoxCenter{b[0], b[1], b[2], b[3]}) : from_xywh(b[0], b[1], b[2], b[3]);
}

}  // namespace

DatasetIndex parse_coco(const std::string& text, const std::string& source, const CocoLoadOptions& opt) {
  const json doc = parse_json(text, source);
  JsonReader r(source);
  DatasetIndex idx;
  const json& images = r.array(doc, "$", "images");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string p = "images[" + std::to_string(i) + "]";
    idx.images.push_back({r.integer(images[i], p, "id"), r.string(images[i], p, "file_name"),
                          r.integer(images[i], p, "width"), r.integer(images[i], p, "height")});
  }
  const json& cats = r.array(doc, "$", "categories");
  for (std::size_t i = 0; i < cats.size(); ++i) {
    const std::string p = "categories[" + std::to_string(i) + "]";
    idx.categories.push_back({r.integer(cats[i], p, "id"), r.string(cats[i], p, "name")});
  }
  std::map<int, const ImageInfo*> by_id;
  for (const ImageInfo& im : idx.images) by_id[im.id] = &im;
  const json& anns = r.array(doc, "$", "annotations");
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string p = "annotations[" + std::to_string(i) + "]";
    Annotation a;
    a.id = r.integer(anns[i], p, "id");
    a.image_id = r.integer(anns[i], p, "image_id");
    a.category_id = r.integer(anns[i], p, "category_id");
    a.box = box_from_array(r.box(anns[i], p), opt.center_boxes, r, p);
    auto it = by_id.find(a.image_id);
    if (it == by_id.end()) r.fail(p + ".image_id", "references missing image id " + std::to_string(a.image_id));
    const BoxCorner c{std::clamp(a.box.x1, 0.0, double(it->second->width)), std::clamp(a.box.y1, 0.0, double(it->second->height)),
                      std::clamp(a.box.x2, 0.0, double(it->second->width)), std::clamp(a.box.y2, 0.0, double(it->second->height))};
    if (!(c == a.box)) {
      a.box = c;
      ++idx.clamped_boxes;
    }
    idx.annotations.push_back(a);
  }
  try {
    validate(idx);
  } catch (const InvalidInput& e) {
    throw InvalidInput(source + ": " + e.what());
  }
  return idx;
}

DatasetIndex load_coco(const fs::path& path, const CocoLoadOptions& opt) {
  return parse_coco(read_file(path), path.string(), opt);
}

std::string dump_coco(const DatasetIndex& idx, bool center_boxes) {
  json doc = {{"images", json::array()}, {"annotations", json::array()}, {"categories", json::array()}};
  for (const ImageInfo& im : idx.images) {
    doc["images"].push_back({{"id", im.id}, {"file_name", im.file_name}, {"width", im.width}, {"height", im.height}});
  }
  for (const Annotation& a : idx.annotations) {
    json bbox;
    if (center_boxes) {
      const BoxCenter c = to_center(a.box);
      bbox = {number(c.x), number(c.y), number(c.w), number(c.h)};
    } else {
      bbox = {number(a.box.x1), number(a.box.y1), number(a.box.width()), number(a.box.height())};
    }
    doc["annotations"].push_back({{"id", a.id}, {"image_id", a.image_id}, {"category_id", a.category_id}, {"bbox", bbox}});
  }
  for (const Category& c : idx.categories) doc["categories"].push_back({{"id", c.id}, {"name", c.name}});
  return doc.dump(1) + "\n";
}

void save_coco(const DatasetIndex& idx, const fs::path& path, bool center_boxes) {
  write_file_atomic(path, dump_coco(idx, center_boxes));
}

std::vector<Detection> parse_detections(const std::string& text, const std::string& source) {
  const json doc = parse_json(text, source);
  JsonReader r(source);
  if (!doc.is_array()) r.fail("$", "expected a list of detections");
  std::vector<Detection> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string p = "[" + std::to_string(i) + "]";
    Detection d;
    d.image_id = r.integer(doc[i], p, "image_id");
    d.category_id = r.integer(doc[i], p, "category_id");
    d.score = r.real(r.field(doc[i], p, "score"), p + ".score");
    d.box = box_from_array(r.box(doc[i], p), false, r, p);
    out.push_back(d);
  }
  return out;
}

std::vector<Detection> load_detections(const fs::path& path) { return parse_detections(read_file(path), path.string()); }

std::string dump_detections(const std::vector<Detection>& dets) {
  auto r6 = [](double v) { return std::round(v * 1e6) / 1e6; };
  json doc = json::array();
  for (const Detection& d : dets) {
    doc.push_back({{"image_id", d.image_id},
                   {"category_id", d.category_id},
                   {"bbox", {number(r6(d.box.x1)), number(r6(d.box.y1)), number(r6(d.box.width())), number(r6(d.box.height()))}},
                   {"score", r6(d.score)}});
  }
  return doc.dump(1) + "\n";
}

// ---- VOC --------------------------------------------------------------------

namespace {

namespace pt = boost::property_tree;

std::string coord(double v) {
  if (v == std::floor(v) && std::fabs(v) < 9e15) return std::to_string(static_cast<std::int64_t>(v));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
T voc_get(const pt::ptree& tree, const std::string& key, const fs::path& file) {
  try {
    return tree.get<T>(key);
  } catch (const pt::ptree_error& e) {
    throw InvalidInput(file.string() + ": " + key + ": " + e.what());
  }
}

}  // namespace

DatasetIndex load_voc(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".xml") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  struct Object {
    std::string name;
    BoxCorner box;
  };
  std::vector<std::vector<Object>> objects;
  DatasetIndex idx;
  std::set<std::string> names;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const fs::path& f = files[i];
    pt::ptree tree;
    try {
      std::istringstream in(read_file(f));
      pt::read_xml(in, tree);
    } catch (const pt::xml_parser_error& e) {
      throw InvalidInput(f.string() + ": malformed XML: " + e.what());
    }
    const auto root_opt = tree.get_child_optional("annotation");
    if (!root_opt) throw InvalidInput(f.string() + ": missing <annotation> root");
    const pt::ptree& root = *root_opt;
    ImageInfo im;
    im.id = static_cast<int>(i) + 1;
    im.file_name = root.get<std::string>("filename", f.stem().string());
    im.width = voc_get<int>(root, "size.width", f);
    im.height = voc_get<int>(root, "size.height", f);
    idx.images.push_back(im);
    std::vector<Object>& objs = objects.emplace_back();
    for (const auto& [tag, node] : root) {
      if (tag != "object") continue;
      Object o;
      o.name = voc_get<std::string>(node, "name", f);
      o.box = {voc_get<double>(node, "bndbox.xmin", f), voc_get<double>(node, "bndbox.ymin", f),
               voc_get<double>(node, "bndbox.xmax", f), voc_get<double>(node, "bndbox.ymax", f)};
      if (o.box.x2 < o.box.x1 || o.box.y2 < o.box.y1) {
        throw InvalidInput(f.string() + ": object '" + o.name + "' has xmax < xmin or ymax < ymin");
      }
      names.insert(o.name);
      objs.push_back(o);
    }
  }
  std::map<std::string, int> cat_id;
  for (const std::string& n : names) {
    const int id = static_cast<int>(cat_id.size()) + 1;
    cat_id[n] = id;
    idx.categories.push_back({id, n});
  }
  int next = 1;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    for (const Object& o : objects[i]) idx.annotations.push_back({next++, idx.images[i].id, cat_id[o.name], o.box});
  }
  validate(idx);
  return idx;
}

void save_voc(const DatasetIndex& idx, const fs::path& dir) {
  validate(idx);
  fs::create_directories(dir);
  std::map<int, std::vector<const Annotation*>> per_image;
  for (const Annotation& a : idx.annotations) per_image[a.image_id].push_back(&a);
  std::set<std::string> stems;
  for (const ImageInfo& im : idx.images) {
    const std::string stem = fs::path(im.file_name).stem().string();
    if (!stems.insert(stem).second) throw InvalidInput("save_voc: two images share the file stem '" + stem + "'");
    pt::ptree root;
    root.put("filename", im.file_name);
    root.put("size.width", im.width);
    root.put("size.height", im.height);
    root.put("size.depth", 3);
    for (const Annotation* a : per_image[im.id]) {
      pt::ptree obj;
      obj.put("name", idx.find_category(a->category_id)->name);
      obj.put("bndbox.xmin", coord(a->box.x1));
      obj.put("bndbox.ymin", coord(a->box.y1));
      obj.put("bndbox.xmax", coord(a->box.x2));
      obj.put("bndbox.ymax", coord(a->box.y2));
      root.add_child("object", obj);
    }
    pt::ptree tree;
    tree.add_child("annotation", root);
    std::ostringstream out;
    pt::write_xml(out, tree, pt::xml_writer_make_settings<std::string>(' ', 2));
    write_file_atomic(dir / (stem + ".xml"), out.str());
  }
}

// ---- PPM --------------------------------------------------------------------

std::string encode_ppm(const RgbImage& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  return out;
}

RgbImage decode_ppm(const std::string& bytes, const std::string& source) {
  std::istringstream in(bytes);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (!in || magic != "P6" || w <= 0 || h <= 0 || maxval != 255) throw InvalidInput(source + ": not a binary 8-bit PPM");
  in.get();
  RgbImage img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) throw InvalidInput(source + ": truncated pixel data");
  return img;
}

void write_ppm(const RgbImage& img, const fs::path& path) { write_file_atomic(path, encode_ppm(img)); }
RgbImage read_ppm(const fs::path& path) { return decode_ppm(read_file(path), path.string()); }

// ---- synthetic data -----------------------------------------------------------

void validate(const SyntheticConfig& cfg) {
  if (cfg.num_images < 0) throw ConfigError("synthetic.num_images must be >= 0");
  if (cfg.num_classes < 1 || cfg.num_classes > static_cast<int>(kDamageClasses.size())) {
    throw ConfigError("synthetic.num_classes must be in 1..5");
  }
  if (cfg.min_side < 4) throw ConfigError("synthetic.min_side must be >= 4");
  if (cfg.width < 3 * cfg.min_side || cfg.height < 3 * cfg.min_side) {
    throw ConfigError("synthetic image must be at least 3 * min_side on each side");
  }
  if (cfg.min_shapes < 0 || cfg.max_shapes < cfg.min_shapes) throw ConfigError("synthetic shape range is empty");
  if (cfg.max_retries < 1) throw ConfigError("synthetic.max_retries must be >= 1");
}

namespace {

struct Mask {
  int width, height;
  std::vector<std::uint8_t> on;
  void set(int x, int y) {
    if (x >= 0 && y >= 0 && x < width && y < height) on[static_cast<std::size_t>(y) * width + x] = 1;
  }
};

// Draws class `cls` into `m` inside the proposal [x0, x0 + w) x [y0, y0 + h).
void draw_shape(int cls, int x0, int y0, int w, int h, Rng& rng, Mask& m) {
  switch (cls) {
    case 0:  // transverse: a long horizontal strip with ragged edges
    case 1: {  // longitudinal: the same, vertical
      const bool horiz = cls == 0;
      const int len = horiz ? w : h, across = horiz ? h : w;
      for (int t = 0; t < len; ++t) {
        const int lo = static_cast<int>(rng.below(across / 4 + 1));
        const int hi = across - static_cast<int>(rng.below(across / 4 + 1));
        for (int s = lo; s < hi; ++s) {
          if (horiz) m.set(x0 + t, y0 + s); else m.set(x0 + s, y0 + t);
        }
      }
      break;
    }
    case 2:  // alligator: a mesh of cells
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (x % 4 == 0 || y % 4 == 0 || x == w - 1 || y == h - 1) m.set(x0 + x, y0 + y);
        }
      }
      break;
    case 3:  // block: thick rectangular outline
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (x < 2 || y < 2 || x >= w - 2 || y >= h - 2) m.set(x0 + x, y0 + y);
        }
      }
      break;
    default: {  // pothole: filled ellipse
      const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double dx = (x - cx) / (w / 2.0), dy = (y - cy) / (h / 2.0);
          if (dx * dx + dy * dy <= 1.0) m.set(x0 + x, y0 + y);
        }
      }
      break;
    }
  }
}

// Proposal size for a class, before placement.
std::pair<int, int> shape_size(int cls, const SyntheticConfig& cfg, Rng& rng) {
  const int s = cfg.min_side;
  switch (cls) {
    case 0: return {rng.range(3 * s, std::max(3 * s, cfg.width * 4 / 5)), rng.range(s, s + s / 2)};
    case 1: return {rng.range(s, s + s / 2), rng.range(3 * s, std::max(3 * s, cfg.height * 4 / 5))};
    default: {
      const int hi = std::max(s + s / 2, std::min(cfg.width, cfg.height) / 2);
      return {rng.range(s + s / 2, hi), rng.range(s + s / 2, hi)};
    }
  }
}

bool overlaps(const BoxCorner& a, const BoxCorner& b, double margin) {
  return a.x1 < b.x2 + margin && b.x1 < a.x2 + margin && a.y1 < b.y2 + margin && b.y1 < a.y2 + margin;
}

}  // namespace

SyntheticDataset gen_synthetic(const SyntheticConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  SyntheticDataset ds;
  for (int c = 0; c < cfg.num_classes; ++c) ds.index.categories.push_back({c + 1, kDamageClasses[c]});
  int next_ann = 1;
  char name[32];
  for (int i = 0; i < cfg.num_images; ++i) {
    std::snprintf(name, sizeof name, "%06d.ppm", i + 1);
    const int image_id = i + 1;
    ds.index.images.push_back({image_id, name, cfg.width, cfg.height});
    RgbImage img{cfg.width, cfg.height, std::vector<std::uint8_t>(static_cast<std::size_t>(cfg.width) * cfg.height * 3)};
    // asphalt-like background: a base tone with per-pixel grain
    const int base = rng.range(110, 170);
    for (int y = 0; y < cfg.height; ++y) {
      for (int x = 0; x < cfg.width; ++x) {
        const int v = std::clamp(base + static_cast<int>(std::lround(rng.normal() * 12.0)), 0, 255);
        std::uint8_t* px = img.at(x, y);
        px[0] = static_cast<std::uint8_t>(v);
        px[1] = static_cast<std::uint8_t>(std::clamp(v + 3, 0, 255));
        px[2] = static_cast<std::uint8_t>(std::clamp(v + 6, 0, 255));
      }
    }
    std::vector<BoxCorner> placed;
    const int count = rng.range(cfg.min_shapes, cfg.max_shapes);
    for (int s = 0; s < count; ++s) {
      const int cls = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.num_classes)));
      bool done = false;
      for (int attempt = 0; attempt < cfg.max_retries && !done; ++attempt) {
        const auto [w, h] = shape_size(cls, cfg, rng);
        if (w > cfg.width || h > cfg.height) continue;
        const int x0 = rng.range(0, cfg.width - w), y0 = rng.range(0, cfg.height - h);
        const BoxCorner proposal{double(x0), double(y0), double(x0 + w), double(y0 + h)};
        if (std::any_of(placed.begin(), placed.end(), [&](const BoxCorner& b) { return overlaps(b, proposal, 2.0); })) {
          continue;
        }
        Mask m{cfg.width, cfg.height, std::vector<std::uint8_t>(static_cast<std::size_t>(cfg.width) * cfg.height)};
        draw_shape(cls, x0, y0, w, h, rng, m);
        int bx1 = cfg.width, by1 = cfg.height, bx2 = -1, by2 = -1;
        const int dark = rng.range(20, 60);
        for (int y = 0; y < cfg.height; ++y) {
          for (int x = 0; x < cfg.width; ++x) {
            if (!m.on[static_cast<std::size_t>(y) * cfg.width + x]) continue;
            bx1 = std::min(bx1, x), by1 = std::min(by1, y), bx2 = std::max(bx2, x), by2 = std::max(by2, y);
            const int v = std::clamp(dark + static_cast<int>(std::lround(rng.normal() * 6.0)), 0, 255);
            std::uint8_t* px = img.at(x, y);
            px[0] = px[1] = px[2] = static_cast<std::uint8_t>(v);
          }
        }
        if (bx2 < bx1) continue;
        const BoxCorner tight{double(bx1), double(by1), double(bx2 + 1), double(by2 + 1)};
        placed.push_back(proposal);
        ds.index.annotations.push_back({next_ann++, image_id, cls + 1, tight});
        done = true;
      }
      if (!done) ++ds.skipped_shapes;
    }
    ds.images.push_back(std::move(img));
  }
  return ds;
}

void write_synthetic(const SyntheticDataset& ds, const fs::path& dir) {
  fs::create_directories(dir / "images");
  for (std::size_t i = 0; i < ds.images.size(); ++i) write_ppm(ds.images[i], dir / "images" / ds.index.images[i].file_name);
  save_coco(ds.index, dir / "annotations.json");
}

// ---- statistics ----------------------------------------------------------------

Histogram stats(const DatasetIndex& idx) {
  Histogram h;
  h.categories = idx.categories;
  h.counts.assign(idx.categories.size(), {0, 0, 0});
  std::map<int, std::size_t> row;
  for (std::size_t i = 0; i < idx.categories.size(); ++i) row[idx.categories[i].id] = i;
  for (const Annotation& a : idx.annotations) {
    auto it = row.find(a.category_id);
    if (it == row.end()) throw InvalidInput("stats: annotation " + std::to_string(a.id) + " has unknown category");
    ++h.counts[it->second][static_cast<int>(size_bucket(a.box.area()))];
    ++h.total;
  }
  return h;
}

// ---- files ---------------------------------------------------------------------

void write_file_atomic(const fs::path& path, const std::string& contents) {
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out.flush()) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot rename into " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace a4d
