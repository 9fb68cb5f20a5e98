/* Copyright 2026 The ALA-Net Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "alanet/data_pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>

#include "alanet/error.hpp"
#include "alanet/random.hpp"

namespace alanet {

int encode_gender(Gender gender) { return gender == Gender::kMale ? 1 : 0; }

Gender decode_gender(int code) {
  if (code == 0) return Gender::kFemale;
  if (code == 1) return Gender::kMale;
  throw InvalidInput("gender code must be 0 or 1, got " + std::to_string(code));
}

std::string gender_name(Gender gender) { return gender == Gender::kMale ? "male" : "female"; }

Gender parse_gender(std::string_view text) {
  if (text == "female" || text == "F" || text == "f") return Gender::kFemale;
  if (text == "male" || text == "M" || text == "m") return Gender::kMale;
  throw InvalidInput("unknown gender '" + std::string(text) + "'");
}

void ImageRecord::validate(int num_ranks) const {
  if (image.empty()) throw InvalidInput("record has an empty image");
  if (age_months < 0 || age_months >= num_ranks) {
    throw InvalidInput("age " + std::to_string(age_months) + " outside [0, " +
                       std::to_string(num_ranks) + ")");
  }
  for (const Point& p : keypoints) {
    if (!(p.x >= 0.0 && p.x <= image.width && p.y >= 0.0 && p.y <= image.height)) {
      throw InvalidInput("keypoint outside image bounds");
    }
  }
}

std::string split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  throw InvalidInput("unknown split '" + std::string(text) + "'");
}

void DatasetManifest::validate(int num_ranks) const {
  std::set<std::string> seen;
  for (const ManifestEntry& e : entries) {
    if (!seen.insert(e.image_path).second) {
      throw InvalidInput("duplicate manifest path " + e.image_path);
    }
    if (e.age_months < 0 || e.age_months >= num_ranks) {
      throw InvalidInput("manifest age " + std::to_string(e.age_months) + " outside [0, " +
                         std::to_string(num_ranks) + ") for " + e.image_path);
    }
  }
}

namespace {

void append_number(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw InvalidInput("bad number '" + std::string(s) + "' in manifest");
  }
  return v;
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      break;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

}  // namespace

std::string format_manifest_line(const ManifestEntry& entry) {
  std::string line = entry.image_path;
  line += '\t';
  line += std::to_string(entry.age_months);
  line += '\t';
  line += gender_name(entry.gender);
  line += '\t';
  for (std::size_t i = 0; i < entry.keypoints.size(); ++i) {
    if (i) line += ';';
    append_number(line, entry.keypoints[i].x);
    line += ',';
    append_number(line, entry.keypoints[i].y);
  }
  return line;
}

ManifestEntry parse_manifest_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto fields = split_on(line, '\t');
  if (fields.size() != 4) {
    throw InvalidInput("manifest line needs 4 tab-separated fields, got " +
                       std::to_string(fields.size()));
  }
  ManifestEntry e;
  e.image_path = std::string(fields[0]);
  if (e.image_path.empty()) throw InvalidInput("manifest line has an empty path");
  int age = -1;
  auto res = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), age);
  if (res.ec != std::errc() || res.ptr != fields[1].data() + fields[1].size()) {
    throw InvalidInput("bad age '" + std::string(fields[1]) + "'");
  }
  if (age < 0) throw InvalidInput("negative age in manifest");
  e.age_months = age;
  e.gender = parse_gender(fields[2]);
  const auto points = split_on(fields[3], ';');
  if (points.size() != kNumKeypoints) {
    throw InvalidInput("expected 17 keypoints, got " + std::to_string(points.size()));
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto xy = split_on(points[i], ',');
    if (xy.size() != 2) throw InvalidInput("keypoint must be 'x,y'");
    e.keypoints[i] = Point{parse_double(xy[0]), parse_double(xy[1])};
  }
  return e;
}

DatasetManifest read_manifest(const std::filesystem::path& path, Split split) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  DatasetManifest m;
  m.split = split;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    try {
      m.entries.push_back(parse_manifest_line(line));
    } catch (const InvalidInput& err) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + err.what());
    }
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (const ManifestEntry& e : manifest.entries) out << format_manifest_line(e) << '\n';
}

ImageRecord load_record(const ManifestEntry& entry, const std::filesystem::path& base_dir) {
  std::filesystem::path p(entry.image_path);
  if (p.is_relative()) p = base_dir / p;
  ImageRecord r;
  r.image = read_pgm(p);
  r.age_months = entry.age_months;
  r.gender = entry.gender;
  r.keypoints = entry.keypoints;
  return r;
}

ResizedSample resize_keep_aspect(const Image& image, const Keypoints& keypoints, int long_side) {
  if (image.height <= 0 || image.width <= 0) throw InvalidInput("resize: degenerate image");
  if (long_side <= 0) throw InvalidInput("resize: long side must be positive");
  ResizedSample out;
  const int longest = std::max(image.height, image.width);
  out.scale = static_cast<double>(long_side) / longest;
  const int h = image.height >= image.width
                    ? long_side
                    : std::max(1, static_cast<int>(std::lround(image.height * out.scale)));
  const int w = image.width >= image.height
                    ? long_side
                    : std::max(1, static_cast<int>(std::lround(image.width * out.scale)));
  out.image = resample_bilinear(image, h, w);
  for (std::size_t i = 0; i < keypoints.size(); ++i) {
    out.keypoints[i] = Point{keypoints[i].x * out.scale, keypoints[i].y * out.scale};
  }
  return out;
}

std::vector<Box> keypoints_to_boxes(std::span<const Point> keypoints, int box_size,
                                    double image_w, double image_h) {
  if (box_size <= 0) throw InvalidInput("box size must be positive");
  const double half = 0.5 * box_size;
  std::vector<Box> boxes;
  boxes.reserve(keypoints.size());
  for (const Point& p : keypoints) {
    boxes.push_back(clip_box(Box{p.x - half, p.y - half, p.x + half, p.y + half}, image_w, image_h));
  }
  return boxes;
}

AugmentedSample augment(const Image& image, std::span<const Box> boxes, bool hflip,
                        double scale_factor) {
  if (!(scale_factor > 0.0)) throw InvalidInput("augment: scale factor must be positive");
  AugmentedSample out;
  out.boxes.assign(boxes.begin(), boxes.end());
  out.image = hflip ? flip_horizontal(image) : image;
  if (hflip) {
    const double w = image.width;
    for (Box& b : out.boxes) b = Box{w - b.x2, b.y1, w - b.x1, b.y2};
  }
  if (scale_factor != 1.0) {
    const int h = std::max(1, static_cast<int>(std::lround(image.height * scale_factor)));
    const int w = std::max(1, static_cast<int>(std::lround(image.width * scale_factor)));
    out.image = resample_bilinear(out.image, h, w);
    for (Box& b : out.boxes) {
      b = Box{b.x1 * scale_factor, b.y1 * scale_factor, b.x2 * scale_factor, b.y2 * scale_factor};
    }
  }
  return out;
}

ImageRecord SynthDataset::record(std::size_t i) const {
  ImageRecord r;
  r.image = images.at(i);
  r.age_months = manifest.entries.at(i).age_months;
  r.gender = manifest.entries.at(i).gender;
  r.keypoints = manifest.entries.at(i).keypoints;
  return r;
}

namespace {

// Canonical hand in unit coordinates: two wrist bones, then thumb, index,
// middle, ring and little finger, three joints each (proximal to distal).
constexpr std::array<Point, kNumKeypoints> kCanonicalHand = {{
    {0.44, 0.86}, {0.58, 0.86},                // wrist
    {0.30, 0.70}, {0.22, 0.58}, {0.16, 0.47},  // thumb
    {0.38, 0.52}, {0.36, 0.38}, {0.35, 0.25},  // index
    {0.50, 0.50}, {0.50, 0.35}, {0.50, 0.20},  // middle
    {0.62, 0.52}, {0.64, 0.38}, {0.65, 0.26},  // ring
    {0.73, 0.57}, {0.77, 0.46}, {0.80, 0.36},  // little
}};

// Relative blob size per bone; wrist ossification centers are larger.
constexpr double kMaturityAgeMonths = 239.0;

constexpr std::array<double, kNumKeypoints> kBoneScale = {
    1.25, 1.15, 0.95, 0.9, 0.85, 1.0, 0.95, 0.85, 1.05, 1.0, 0.9, 1.0, 0.95, 0.85, 0.9, 0.85, 0.8};

// Bone shafts drawn between consecutive joints of the same finger.
constexpr std::array<std::array<int, 2>, 12> kShafts = {{
    {2, 3}, {3, 4}, {5, 6}, {6, 7}, {8, 9}, {9, 10}, {11, 12}, {12, 13}, {14, 15}, {15, 16},
    {0, 8}, {1, 8},
}};

double segment_distance(double px, double py, const Point& a, const Point& b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - a.x) * vx + (py - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (a.x + t * vx), dy = py - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

SynthDataset synth_generate(int n, std::uint64_t seed, const SynthConfig& cfg) {
  if (n <= 0) throw InvalidInput("synth_generate: n must be positive");
  if (cfg.image_size < 32) throw InvalidInput("synth_generate: image_size must be >= 32");
  if (cfg.age_min < 0 || cfg.age_max < cfg.age_min) throw InvalidInput("synth_generate: bad age range");

  SynthDataset out;
  out.manifest.split = Split::kTrain;
  Rng rng(seed);
  const double size = cfg.image_size;
  const double margin = 4.0;

  for (int i = 0; i < n; ++i) {
    ManifestEntry e;
    char name[64];
    std::snprintf(name, sizeof(name), "images/synth_%05d.pgm", i);
    e.image_path = name;
    e.age_months = rng.uniform_int(cfg.age_min, cfg.age_max);
    e.gender = rng.bernoulli(0.5) ? Gender::kMale : Gender::kFemale;

    const double hand_scale = rng.uniform(0.9, 1.05);
    const double angle = rng.uniform(-10.0, 10.0) * std::numbers::pi / 180.0;
    const double tx = rng.uniform(-0.04, 0.04) * size;
    const double ty = rng.uniform(-0.04, 0.04) * size;
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (int k = 0; k < kNumKeypoints; ++k) {
      const double u = (kCanonicalHand[k].x - 0.5) * hand_scale;
      const double v = (kCanonicalHand[k].y - 0.55) * hand_scale;
      double x = size * (0.5 + ca * u - sa * v) + tx + rng.normal(0.0, 1.5);
      double y = size * (0.55 + sa * u + ca * v) + ty + rng.normal(0.0, 1.5);
      e.keypoints[k] = Point{std::clamp(x, margin, size - margin), std::clamp(y, margin, size - margin)};
    }

    // Maturity drives every age cue and is tied to the absolute age, not the
    // sampled range; girls mature slightly earlier.
    double maturity = e.age_months / kMaturityAgeMonths;
    if (e.gender == Gender::kFemale) maturity += 0.04;
    maturity = std::clamp(maturity, 0.0, 1.0);

    std::vector<SynthBlob> blobs(kNumKeypoints);
    for (int k = 0; k < kNumKeypoints; ++k) {
      blobs[k].center = e.keypoints[k];
      blobs[k].radius = kBoneScale[k] * (cfg.blob_radius_min +
                                         (cfg.blob_radius_max - cfg.blob_radius_min) * maturity);
      blobs[k].intensity =
          cfg.blob_intensity_min + (cfg.blob_intensity_max - cfg.blob_intensity_min) * maturity;
    }

    const double shaft_level = 0.08 + 0.10 * maturity;
    const double shaft_width = 2.0 + 1.5 * maturity;
    const Point palm{0.5 * (e.keypoints[0].x + e.keypoints[8].x),
                     0.5 * (e.keypoints[0].y + e.keypoints[8].y)};
    const double palm_radius = 0.16 * size * hand_scale;
    const double palm_level = 0.05 + 0.08 * maturity;

    Image img(cfg.image_size, cfg.image_size);
    for (int r = 0; r < cfg.image_size; ++r) {
      const double py = r + 0.5;
      for (int c = 0; c < cfg.image_size; ++c) {
        const double px = c + 0.5;
        double v = 0.03;
        const double pd = std::hypot(px - palm.x, py - palm.y);
        if (pd < palm_radius) v += palm_level;
        for (const auto& s : kShafts) {
          if (segment_distance(px, py, e.keypoints[s[0]], e.keypoints[s[1]]) < shaft_width) {
            v += shaft_level;
            break;
          }
        }
        for (const SynthBlob& b : blobs) {
          const double dx = px - b.center.x, dy = py - b.center.y;
          const double d2 = dx * dx + dy * dy;
          if (d2 < 16.0 * b.radius * b.radius) {
            v += b.intensity * std::exp(-d2 / (2.0 * b.radius * b.radius));
          }
        }
        img.at(r, c) = v;
      }
    }
    for (double& px : img.pixels) px += rng.normal(0.0, cfg.noise_std);
    quantize_8bit(img);

    out.manifest.entries.push_back(std::move(e));
    out.images.push_back(std::move(img));
    out.blobs.push_back(std::move(blobs));
  }
  return out;
}

void write_synth_dataset(const SynthDataset& data, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "images");
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    write_pgm(out_dir / data.manifest.entries[i].image_path, data.images[i]);
  }
  write_manifest(out_dir / "manifest.tsv", data.manifest);
}

}  // namespace alanet
