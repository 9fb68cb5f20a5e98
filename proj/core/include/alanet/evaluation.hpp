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


#ifndef ALANET_EVALUATION_HPP_
#define ALANET_EVALUATION_HPP_

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "alanet/data_pipeline.hpp"
#include "alanet/geometry.hpp"
#include "alanet/image.hpp"
#include "alanet/network.hpp"

namespace alanet {

// Published reference values. Documentation only; desk-scale runs do not
// reproduce them.
inline constexpr double kReferenceMaeFull = 3.91;
inline constexpr double kReferenceMaeBackbone = 4.92;
inline constexpr double kReferenceAp = 0.892;
inline constexpr double kReferenceAp50 = 0.980;
inline constexpr double kReferenceAp75 = 0.980;

/// Mean absolute error in months. Throws InvalidInput on empty or mismatched
/// inputs.
double mae(std::span<const double> predictions, std::span<const int> truths);

struct ScoredBox {
  Box box;
  double score = 0.0;

  bool operator==(const ScoredBox&) const = default;
};

/// Single-class AP at one IoU threshold. Detections of all images are ranked
/// by descending score (ties by image, then detection index) and greedily
/// matched to the best-overlapping unmatched gt of their image with
/// IoU >= iou_thresh. The PR curve is integrated with the precision envelope
/// over all recall points. Throws InvalidInput when there is no gt box.
double average_precision(std::span<const std::vector<ScoredBox>> detections,
                         std::span<const std::vector<Box>> gts, double iou_thresh);

struct CocoMap {
  double ap = 0.0;    // mean over IoU 0.50:0.05:0.95
  double ap50 = 0.0;
  double ap75 = 0.0;
};

// Thresholds are formed as (50 + 5i) / 100 so that 0.6 is exactly 0.60.
std::vector<double> coco_thresholds();
CocoMap coco_map(std::span<const std::vector<ScoredBox>> detections,
                 std::span<const std::vector<Box>> gts);

struct ImageResult {
  std::string path;
  double predicted_age = 0.0;
  int true_age = 0;
  std::vector<ScoredBox> proposals;  // original image coordinates

  bool operator==(const ImageResult&) const = default;
};

struct EvalReport {
  double mae_months = 0.0;
  // Detection metrics exist only for models with local extraction.
  std::optional<double> ap;
  std::optional<double> ap50;
  std::optional<double> ap75;
  std::vector<ImageResult> per_image;

  bool operator==(const EvalReport&) const = default;
};

void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

void write_report(const std::filesystem::path& path, const EvalReport& report);
EvalReport read_report(const std::filesystem::path& path);

struct Prediction {
  double age = 0.0;
  std::vector<ScoredBox> proposals;  // original image coordinates; empty without local extraction
};

// Inference on one image (no augmentation, model switched to eval mode).
Prediction predict(ALANet& model, const Image& image, Gender gender);

/// Evaluates in-memory records; `paths` labels the per-image entries and may
/// be empty.
EvalReport evaluate(ALANet& model, std::span<const ImageRecord> records,
                    std::span<const std::string> paths = {});

/// Loads the checkpoint and every manifest entry. Throws ConfigError when the
/// checkpoint's rank count differs from what the manifest requires.
EvalReport evaluate(const std::filesystem::path& checkpoint, const DatasetManifest& manifest,
                    const std::filesystem::path& manifest_dir);

/// PPM overlay: gt boxes in green, proposals in red, and a caption with the
/// predicted (P) and true (T) age when `true_age` is given.
void render_overlay(const std::filesystem::path& path, const Image& image,
                    std::span<const Box> gt_boxes, std::span<const ScoredBox> proposals,
                    double predicted_age, std::optional<int> true_age = std::nullopt);

}  // namespace alanet

#endif  // ALANET_EVALUATION_HPP_
