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

#ifndef ALANET_DATA_PIPELINE_HPP_
#define ALANET_DATA_PIPELINE_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alanet/geometry.hpp"
#include "alanet/image.hpp"

namespace alanet {

inline constexpr int kNumKeypoints = 17;

enum class Gender { kFemale = 0, kMale = 1 };

int encode_gender(Gender gender);
// Throws InvalidInput for anything but 0 or 1.
Gender decode_gender(int code);
std::string gender_name(Gender gender);
// Accepts "female"/"male" (also "F"/"M"); throws InvalidInput otherwise.
Gender parse_gender(std::string_view text);

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

using Keypoints = std::array<Point, kNumKeypoints>;

/// One training sample: normalized grayscale image plus annotations.
struct ImageRecord {
  Image image;
  int age_months = 0;
  Gender gender = Gender::kFemale;
  Keypoints keypoints{};

  // Throws InvalidInput if a keypoint leaves [0, W] x [0, H] or the age is
  // outside [0, num_ranks).
  void validate(int num_ranks) const;
};

enum class Split { kTrain, kVal, kTest };

std::string split_name(Split split);
Split parse_split(std::string_view text);

struct ManifestEntry {
  std::string image_path;
  int age_months = 0;
  Gender gender = Gender::kFemale;
  Keypoints keypoints{};

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  Split split = Split::kTrain;

  // Unique paths, ages in [0, num_ranks). Throws InvalidInput.
  void validate(int num_ranks) const;
};

// `path<TAB>age<TAB>gender<TAB>x1,y1;...;x17,y17`, coordinates written in
// shortest round-trip form.
std::string format_manifest_line(const ManifestEntry& entry);
ManifestEntry parse_manifest_line(std::string_view line);

DatasetManifest read_manifest(const std::filesystem::path& path, Split split = Split::kTrain);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// Loads an entry's image (relative paths resolve against `base_dir`).
ImageRecord load_record(const ManifestEntry& entry, const std::filesystem::path& base_dir);

struct ResizedSample {
  Image image;
  Keypoints keypoints{};
  double scale = 1.0;
};

/// Rescales so the longer side equals `long_side`, keeping the aspect ratio;
/// keypoints are multiplied by the same factor. Throws InvalidInput on an
/// empty image or non-positive `long_side`.
ResizedSample resize_keep_aspect(const Image& image, const Keypoints& keypoints,
                                 int long_side = 512);

// box_size x box_size squares centered on the keypoints, clamped into
// [0, image_w] x [0, image_h].
std::vector<Box> keypoints_to_boxes(std::span<const Point> keypoints, int box_size,
                                    double image_w, double image_h);

struct AugmentedSample {
  Image image;
  std::vector<Box> boxes;
};

/// Optional horizontal flip (x -> W - x, applied first) followed by uniform
/// scaling of the image and every box coordinate by `scale_factor`.
AugmentedSample augment(const Image& image, std::span<const Box> boxes, bool hflip,
                        double scale_factor);

struct AugmentConfig {
  double hflip_probability = 0.5;
  double scale_min = 0.8;
  double scale_max = 1.2;

  bool operator==(const AugmentConfig&) const = default;
};

/// Parameters of the synthetic hand generator.
struct SynthConfig {
  int image_size = 256;
  int age_min = 0;
  int age_max = 239;  // inclusive
  double blob_radius_min = 3.0;
  double blob_radius_max = 9.0;
  double blob_intensity_min = 0.35;
  double blob_intensity_max = 0.95;
  double noise_std = 0.02;
};

struct SynthBlob {
  Point center;
  double radius = 0.0;
  double intensity = 0.0;
};

struct SynthDataset {
  DatasetManifest manifest;
  std::vector<Image> images;                 // 8-bit quantized, aligned with manifest
  std::vector<std::vector<SynthBlob>> blobs;  // per record, one per keypoint

  ImageRecord record(std::size_t i) const;
};

/// Deterministic synthetic hands: 17 Gaussian blobs on a dark background laid
/// out like finger joints and wrist bones. Blob radius, blob intensity and a
/// faint palm silhouette all grow with age. Image paths are
/// "images/synth_NNNNN.pgm".
SynthDataset synth_generate(int n, std::uint64_t seed, const SynthConfig& config = {});

// Writes manifest.tsv and images/ under `out_dir`.
void write_synth_dataset(const SynthDataset& data, const std::filesystem::path& out_dir);

}  // namespace alanet

#endif  // ALANET_DATA_PIPELINE_HPP_
