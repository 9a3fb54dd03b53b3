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

// Annotation I/O (COCO JSON subset, Pascal VOC XML), PPM images, a seeded
// synthetic road-damage generator, and class x size histograms.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "a4d/detection.hpp"
#include "a4d/geometry.hpp"

namespace a4d {

struct ImageInfo {
  int id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
  bool operator==(const ImageInfo&) const = default;
};

struct Annotation {
  int id = 0;
  int image_id = 0;
  int category_id = 0;
  BoxCorner box;
  bool operator==(const Annotation&) const = default;
};

struct Category {
  int id = 0;
  std::string name;
  bool operator==(const Category&) const = default;
};

struct DatasetIndex {
  std::vector<ImageInfo> images;
  std::vector<Annotation> annotations;
  std::vector<Category> categories;
  int clamped_boxes = 0;  // boxes pulled inside their image on load

  const ImageInfo* find_image(int id) const;
  const Category* find_category(int id) const;
  std::vector<GroundTruth> ground_truths() const;
};

// Unique ids, existing references, valid boxes. Throws InvalidInput.
void validate(const DatasetIndex& index);

struct CocoLoadOptions {
  // bbox holds [center x, center y, w, h] instead of COCO's top-left form.
  bool center_boxes = false;
};

DatasetIndex load_coco(const std::filesystem::path& path, const CocoLoadOptions& opt = {});
// Same from an in-memory document; `source` prefixes error messages.
DatasetIndex parse_coco(const std::string& text, const std::string& source, const CocoLoadOptions& opt = {});
std::string dump_coco(const DatasetIndex& index, bool center_boxes = false);
void save_coco(const DatasetIndex& index, const std::filesystem::path& path, bool center_boxes = false);

// One XML file per image. Category ids follow the sorted unique class names,
// image ids the sorted file names, both from 1.
DatasetIndex load_voc(const std::filesystem::path& dir);
void save_voc(const DatasetIndex& index, const std::filesystem::path& dir);

// COCO results list: [{image_id, category_id, bbox [x, y, w, h], score}].
std::vector<Detection> load_detections(const std::filesystem::path& path);
std::vector<Detection> parse_detections(const std::string& text, const std::string& source);
std::string dump_detections(const std::vector<Detection>& dets);

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB

  std::uint8_t* at(int x, int y) { return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
};

std::string encode_ppm(const RgbImage& img);
RgbImage decode_ppm(const std::string& bytes, const std::string& source);
void write_ppm(const RgbImage& img, const std::filesystem::path& path);
RgbImage read_ppm(const std::filesystem::path& path);

inline constexpr std::array<const char*, 5> kDamageClasses = {"transverse", "longitudinal", "alligator", "block",
                                                               "pothole"};

struct SyntheticConfig {
  int num_images = 200;
  int width = 64;
  int height = 64;
  int num_classes = 3;  // 1..5, taken from kDamageClasses in order
  int min_shapes = 1;
  int max_shapes = 3;
  int min_side = 10;
  int max_retries = 20;
  std::uint64_t seed = 0;
};

void validate(const SyntheticConfig& cfg);  // throws ConfigError

struct SyntheticDataset {
  std::vector<RgbImage> images;  // parallel to index.images
  DatasetIndex index;
  int skipped_shapes = 0;
};

// Pure function of cfg: the same config yields byte-identical output.
SyntheticDataset gen_synthetic(const SyntheticConfig& cfg);
// Writes images/<file_name> and annotations.json.
void write_synthetic(const SyntheticDataset& ds, const std::filesystem::path& dir);

struct Histogram {
  std::vector<Category> categories;
  std::vector<std::array<int, 3>> counts;  // per category: small, medium, large
  int total = 0;
};

Histogram stats(const DatasetIndex& index);

// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace a4d
