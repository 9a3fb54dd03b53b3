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

#include <filesystem>
#include <fstream>
#include <set>

#include <unistd.h>

#include <json.hpp>

#include "a4d/dataio.hpp"
#include "a4d/error.hpp"

namespace a4d {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("a4d_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kCoco = R"({
  "images": [{"id": 1, "file_name": "a.ppm", "width": 100, "height": 80},
             {"id": 2, "file_name": "b.ppm", "width": 50, "height": 50}],
  "annotations": [{"id": 10, "image_id": 1, "category_id": 3, "bbox": [10, 20, 30, 15]},
                  {"id": 11, "image_id": 2, "category_id": 3, "bbox": [40, 40, 20, 20]}],
  "categories": [{"id": 3, "name": "pothole"}]
})";

TEST(Coco, ParseConvertsAndClamps) {
  const DatasetIndex idx = parse_coco(kCoco, "mem");
  ASSERT_EQ(idx.annotations.size(), 2u);
  EXPECT_EQ(idx.annotations[0].box, (BoxCorner{10, 20, 40, 35}));
  EXPECT_EQ(idx.annotations[1].box, (BoxCorner{40, 40, 50, 50}));
  EXPECT_EQ(idx.clamped_boxes, 1);
  EXPECT_EQ(idx.find_category(3)->name, "pothole");
  EXPECT_EQ(idx.find_image(2)->width, 50);
  EXPECT_EQ(idx.find_image(9), nullptr);
  const auto gts = idx.ground_truths();
  ASSERT_EQ(gts.size(), 2u);
  EXPECT_EQ(gts[0].category_id, 3);
}

TEST(Coco, CenterBoxesFlag) {
  CocoLoadOptions opt;
  opt.center_boxes = true;
  const DatasetIndex idx = parse_coco(kCoco, "mem", opt);
  // center (10, 20), 30x15 -> x1 = -5, pulled back to 0
  EXPECT_EQ(idx.annotations[0].box, (BoxCorner{0, 12.5, 25, 27.5}));
  EXPECT_EQ(idx.annotations[1].box, (BoxCorner{30, 30, 50, 50}));
  EXPECT_EQ(idx.clamped_boxes, 1);
  // center form survives dump/parse
  const DatasetIndex back = parse_coco(dump_coco(idx, true), "mem", opt);
  EXPECT_EQ(back.annotations, idx.annotations);
}

TEST(Coco, ErrorsNameThePath) {
  const std::string missing_img = R"({"images": [], "annotations": [{"id": 1, "image_id": 999, "category_id": 1,
      "bbox": [0, 0, 1, 1]}], "categories": [{"id": 1, "name": "x"}]})";
  try {
    parse_coco(missing_img, "gt.json");
    FAIL();
  } catch (const InvalidInput& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("gt.json"), std::string::npos) << m;
    EXPECT_NE(m.find("annotations[0].image_id"), std::string::npos) << m;
    EXPECT_NE(m.find("999"), std::string::npos) << m;
  }
  EXPECT_THROW(parse_coco("{not json", "x"), InvalidInput);
  EXPECT_THROW(parse_coco(R"({"images": []})", "x"), InvalidInput);
  EXPECT_THROW(parse_coco(R"({"images": [{"id": "1"}], "annotations": [], "categories": []})", "x"), InvalidInput);
  const std::string neg = R"({"images": [{"id": 1, "file_name": "a", "width": 9, "height": 9}], "annotations":
      [{"id": 1, "image_id": 1, "category_id": 1, "bbox": [0, 0, -2, 1]}], "categories": [{"id": 1, "name": "x"}]})";
  EXPECT_THROW(parse_coco(neg, "x"), InvalidInput);
  EXPECT_THROW(load_coco("/nonexistent/a4d.json"), IoError);
}

TEST(Coco, DumpLoadIsLossless) {
  const DatasetIndex idx = parse_coco(kCoco, "mem");
  const fs::path dir = scratch("coco");
  save_coco(idx, dir / "c.json");
  const DatasetIndex back = load_coco(dir / "c.json");
  EXPECT_EQ(back.images, idx.images);
  EXPECT_EQ(back.annotations, idx.annotations);
  EXPECT_EQ(back.categories, idx.categories);
  EXPECT_EQ(dump_coco(back), dump_coco(idx));
  // integral values stay integers in the text
  const auto doc = nlohmann::json::parse(dump_coco(idx));
  EXPECT_TRUE(doc["annotations"][0]["bbox"][0].is_number_integer());
  EXPECT_EQ(doc["annotations"][0]["bbox"], nlohmann::json::parse("[10, 20, 30, 15]"));
  fs::remove_all(dir);
}

TEST(Detections, RoundTripAtSixDecimals) {
  const std::vector<Detection> d{{1, 2, 0.1234567891, {1.5, 2.25, 10.0000004, 20}}, {3, 1, 0.5, {0, 0, 1, 1}}};
  const auto back = parse_detections(dump_detections(d), "mem");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].score, 0.123457);
  EXPECT_EQ(back[0].box.x1, 1.5);
  EXPECT_NEAR(back[0].box.x2, 10.0, 1e-12);
  EXPECT_EQ(back[1].category_id, 1);
  EXPECT_THROW(parse_detections(R"({"a": 1})", "mem"), InvalidInput);
  EXPECT_THROW(parse_detections(R"([{"image_id": 1, "category_id": 1, "bbox": [0, 0, 1]}])", "mem"), InvalidInput);
}

TEST(Voc, RoundTripThroughCoco) {
  SyntheticConfig sc;
  sc.num_images = 12;
  sc.num_classes = 5;
  sc.seed = 4;
  const SyntheticDataset ds = gen_synthetic(sc);
  const fs::path dir = scratch("voc");
  save_voc(ds.index, dir / "a");
  const DatasetIndex v1 = load_voc(dir / "a");
  ASSERT_EQ(v1.images.size(), 12u);
  ASSERT_EQ(v1.annotations.size(), ds.index.annotations.size());
  for (std::size_t i = 0; i < v1.annotations.size(); ++i) {
    EXPECT_EQ(v1.annotations[i].box, ds.index.annotations[i].box);
    EXPECT_EQ(v1.find_category(v1.annotations[i].category_id)->name,
              ds.index.find_category(ds.index.annotations[i].category_id)->name);
  }
  const DatasetIndex c = parse_coco(dump_coco(v1), "mem");
  save_voc(c, dir / "b");
  const DatasetIndex v2 = load_voc(dir / "b");
  EXPECT_EQ(v2.images, v1.images);
  EXPECT_EQ(v2.annotations, v1.annotations);
  EXPECT_EQ(v2.categories, v1.categories);
  fs::remove_all(dir);
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

TEST(Voc, ErrorsNameTheFile) {
  const fs::path dir = scratch("vocbad");
  write(dir / "x.xml", R"(<annotation><filename>x.jpg</filename><size><width>10</width><height>10</height></size>
    <object><name>pothole</name><bndbox><xmin>5</xmin><ymin>1</ymin><xmax>2</xmax><ymax>4</ymax></bndbox></object>
    </annotation>)");
  try {
    load_voc(dir);
    FAIL();
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("x.xml"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("xmax < xmin"), std::string::npos) << e.what();
  }
  write(dir / "x.xml", "<annotation><filename>");
  EXPECT_THROW(load_voc(dir), InvalidInput);
  write(dir / "x.xml", "<other/>");
  EXPECT_THROW(load_voc(dir), InvalidInput);
  EXPECT_THROW(load_voc(dir / "missing"), IoError);
  fs::remove_all(dir);
}

TEST(Ppm, RoundTripAndBadHeader) {
  RgbImage img{3, 2, {}};
  for (int i = 0; i < 18; ++i) img.pixels.push_back(static_cast<std::uint8_t>(i * 13));
  const RgbImage back = decode_ppm(encode_ppm(img), "mem");
  EXPECT_EQ(back.width, 3);
  EXPECT_EQ(back.height, 2);
  EXPECT_EQ(back.pixels, img.pixels);
  EXPECT_THROW(decode_ppm("P5\n3 2\n255\n", "mem"), InvalidInput);
  EXPECT_THROW(decode_ppm("P6\n3 2\n255\nabc", "mem"), InvalidInput);
}

TEST(Synthetic, SameSeedSameBytes) {
  SyntheticConfig c;
  c.num_images = 20;
  c.seed = 7;
  const SyntheticDataset a = gen_synthetic(c), b = gen_synthetic(c);
  EXPECT_EQ(dump_coco(a.index), dump_coco(b.index));
  for (std::size_t i = 0; i < a.images.size(); ++i) EXPECT_EQ(a.images[i].pixels, b.images[i].pixels);
  c.seed = 8;
  EXPECT_NE(dump_coco(gen_synthetic(c).index), dump_coco(a.index));
}

TEST(Synthetic, EmptyAndBounds) {
  SyntheticConfig c;
  c.num_images = 0;
  const SyntheticDataset e = gen_synthetic(c);
  EXPECT_TRUE(e.index.images.empty());
  EXPECT_TRUE(e.index.annotations.empty());

  c.num_images = 60;
  c.num_classes = 5;
  c.width = 96;
  c.height = 64;
  const SyntheticDataset ds = gen_synthetic(c);
  std::set<int> classes;
  for (const Annotation& a : ds.index.annotations) {
    const ImageInfo* im = ds.index.find_image(a.image_id);
    ASSERT_NE(im, nullptr);
    EXPECT_GE(a.box.x1, 0);
    EXPECT_GE(a.box.y1, 0);
    EXPECT_LE(a.box.x2, im->width);
    EXPECT_LE(a.box.y2, im->height);
    EXPECT_GT(a.box.area(), 0);
    classes.insert(a.category_id);
  }
  EXPECT_EQ(classes.size(), 5u);
  EXPECT_EQ(ds.images[0].width, 96);
}

TEST(Synthetic, ConfigValidation) {
  SyntheticConfig c;
  c.num_classes = 6;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.min_shapes = 4;
  c.max_shapes = 2;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Synthetic, WriteProducesDirectoryLayout) {
  SyntheticConfig c;
  c.num_images = 3;
  const SyntheticDataset ds = gen_synthetic(c);
  const fs::path dir = scratch("synth");
  write_synthetic(ds, dir);
  EXPECT_TRUE(fs::exists(dir / "annotations.json"));
  EXPECT_TRUE(fs::exists(dir / "images" / "000001.ppm"));
  EXPECT_EQ(read_ppm(dir / "images" / "000001.ppm").pixels, ds.images[0].pixels);
  EXPECT_EQ(load_coco(dir / "annotations.json").annotations, ds.index.annotations);
  fs::remove_all(dir);
}

TEST(Stats, HandCasesAndConservation) {
  DatasetIndex empty;
  EXPECT_EQ(stats(empty).total, 0);

  DatasetIndex one;
  one.images.push_back({1, "a", 100, 100});
  one.categories = {{1, "a"}, {2, "b"}};
  one.annotations.push_back({1, 1, 2, {0, 0, 30, 30}});
  const Histogram h = stats(one);
  ASSERT_EQ(h.counts.size(), 2u);
  EXPECT_EQ(h.counts[1], (std::array<int, 3>{1, 0, 0}));
  EXPECT_EQ(h.counts[0], (std::array<int, 3>{0, 0, 0}));

  SyntheticConfig c;
  c.num_images = 40;
  c.num_classes = 5;
  c.width = c.height = 128;
  const SyntheticDataset ds = gen_synthetic(c);
  const Histogram s = stats(ds.index);
  int sum = 0;
  for (std::size_t k = 0; k < s.categories.size(); ++k) {
    int per = 0;
    for (const Annotation& a : ds.index.annotations) per += a.category_id == s.categories[k].id;
    EXPECT_EQ(s.counts[k][0] + s.counts[k][1] + s.counts[k][2], per);
    sum += per;
  }
  EXPECT_EQ(s.total, sum);
  EXPECT_EQ(s.total, static_cast<int>(ds.index.annotations.size()));
}

TEST(Files, AtomicWriteReplacesAndLeavesNoTemp) {
  const fs::path dir = scratch("atomic");
  write_file_atomic(dir / "f.txt", "one");
  write_file_atomic(dir / "f.txt", "two");
  EXPECT_EQ(read_file(dir / "f.txt"), "two");
  int n = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++n;
  EXPECT_EQ(n, 1);  // no temp file left behind
  write_file_atomic(dir / "sub" / "g.txt", "three");  // parents are created
  EXPECT_EQ(read_file(dir / "sub" / "g.txt"), "three");
  EXPECT_THROW(write_file_atomic(dir / "f.txt" / "under_a_file", "x"), IoError);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace a4d
