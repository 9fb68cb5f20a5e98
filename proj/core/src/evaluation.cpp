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


#include "alanet/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "alanet/checkpoint.hpp"
#include "alanet/error.hpp"
#include "alanet/ordinal.hpp"
#include "alanet/training.hpp"

namespace alanet {

namespace {

using nlohmann::json;

struct Ranked {
  int image;
  int index;
  double score;
};

Box scaled(const Box& b, double s) { return Box{b.x1 * s, b.y1 * s, b.x2 * s, b.y2 * s}; }

// 3x5 glyphs, one row per entry, bit 2 is the leftmost column.
const std::array<std::uint8_t, 5>* glyph(char c) {
  static const std::array<std::array<std::uint8_t, 5>, 14> kGlyphs = {{
      {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7}, {5, 5, 7, 1, 1},
      {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1}, {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7},
      {0, 0, 0, 0, 2},  // .
      {7, 5, 7, 4, 4},  // P
      {7, 2, 2, 2, 2},  // T
      {0, 0, 7, 0, 0},  // -
  }};
  if (c >= '0' && c <= '9') return &kGlyphs[c - '0'];
  if (c == '.') return &kGlyphs[10];
  if (c == 'P') return &kGlyphs[11];
  if (c == 'T') return &kGlyphs[12];
  if (c == '-') return &kGlyphs[13];
  return nullptr;
}

void draw_text(RgbImage& img, int row, int col, const std::string& text, int scale,
               std::array<std::uint8_t, 3> color) {
  for (char c : text) {
    if (const auto* g = glyph(c)) {
      for (int r = 0; r < 5; ++r) {
        for (int k = 0; k < 3; ++k) {
          if (!((*g)[r] & (4 >> k))) continue;
          for (int dy = 0; dy < scale; ++dy) {
            for (int dx = 0; dx < scale; ++dx) {
              const int y = row + r * scale + dy;
              const int x = col + k * scale + dx;
              if (y >= 0 && y < img.height && x >= 0 && x < img.width) img.set(y, x, color);
            }
          }
        }
      }
    }
    col += 4 * scale;
  }
}

void draw_box(RgbImage& img, const Box& b, std::array<std::uint8_t, 3> color) {
  const int x1 = std::clamp(static_cast<int>(std::floor(b.x1)), 0, img.width - 1);
  const int x2 = std::clamp(static_cast<int>(std::ceil(b.x2)) - 1, 0, img.width - 1);
  const int y1 = std::clamp(static_cast<int>(std::floor(b.y1)), 0, img.height - 1);
  const int y2 = std::clamp(static_cast<int>(std::ceil(b.y2)) - 1, 0, img.height - 1);
  for (int x = x1; x <= x2; ++x) {
    img.set(y1, x, color);
    img.set(y2, x, color);
  }
  for (int y = y1; y <= y2; ++y) {
    img.set(y, x1, color);
    img.set(y, x2, color);
  }
}

std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

}  // namespace

double mae(std::span<const double> predictions, std::span<const int> truths) {
  if (predictions.empty()) throw InvalidInput("mae: empty input");
  if (predictions.size() != truths.size()) throw InvalidInput("mae: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) sum += std::abs(predictions[i] - truths[i]);
  return sum / static_cast<double>(predictions.size());
}

double average_precision(std::span<const std::vector<ScoredBox>> detections,
                         std::span<const std::vector<Box>> gts, double iou_thresh) {
  if (detections.size() != gts.size()) throw InvalidInput("average_precision: one entry per image");
  std::size_t num_gt = 0;
  for (const auto& g : gts) num_gt += g.size();
  if (num_gt == 0) throw InvalidInput("average_precision: no ground-truth boxes");

  std::vector<Ranked> ranked;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    for (std::size_t k = 0; k < detections[i].size(); ++k) {
      ranked.push_back({static_cast<int>(i), static_cast<int>(k), detections[i][k].score});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

  std::vector<std::vector<char>> used(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) used[i].assign(gts[i].size(), 0);
  std::vector<double> precision;
  std::vector<double> recall;
  std::size_t tp = 0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const Box& d = detections[ranked[r].image][ranked[r].index].box;
    const auto& g = gts[ranked[r].image];
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (used[ranked[r].image][k]) continue;
      const double v = iou(d, g[k]);
      if (v >= iou_thresh && v > best_iou) {
        best = static_cast<int>(k);
        best_iou = v;
      }
    }
    if (best >= 0) {
      used[ranked[r].image][best] = 1;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(r + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
  }
  for (std::size_t r = precision.size(); r-- > 1;) {
    precision[r - 1] = std::max(precision[r - 1], precision[r]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t r = 0; r < recall.size(); ++r) {
    ap += (recall[r] - prev_recall) * precision[r];
    prev_recall = recall[r];
  }
  return ap;
}

std::vector<double> coco_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
  return t;
}

CocoMap coco_map(std::span<const std::vector<ScoredBox>> detections,
                 std::span<const std::vector<Box>> gts) {
  CocoMap out;
  const std::vector<double> thresholds = coco_thresholds();
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    const double ap = average_precision(detections, gts, thresholds[i]);
    out.ap += ap;
    if (i == 0) out.ap50 = ap;
    if (i == 5) out.ap75 = ap;
  }
  out.ap /= static_cast<double>(thresholds.size());
  return out;
}

void to_json(json& j, const EvalReport& r) {
  j = json::object();
  j["mae_months"] = r.mae_months;
  j["ap"] = r.ap ? json(*r.ap) : json(nullptr);
  j["ap50"] = r.ap50 ? json(*r.ap50) : json(nullptr);
  j["ap75"] = r.ap75 ? json(*r.ap75) : json(nullptr);
  json images = json::array();
  for (const ImageResult& im : r.per_image) {
    json props = json::array();
    for (const ScoredBox& p : im.proposals) {
      props.push_back({{"box", {p.box.x1, p.box.y1, p.box.x2, p.box.y2}}, {"score", p.score}});
    }
    images.push_back({{"path", im.path},
                      {"predicted_age", im.predicted_age},
                      {"true_age", im.true_age},
                      {"proposals", props}});
  }
  j["per_image"] = images;
}

void from_json(const json& j, EvalReport& r) {
  auto opt = [&](const char* key) -> std::optional<double> {
    const json& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
  };
  r.mae_months = j.at("mae_months").get<double>();
  r.ap = opt("ap");
  r.ap50 = opt("ap50");
  r.ap75 = opt("ap75");
  r.per_image.clear();
  for (const json& im : j.at("per_image")) {
    ImageResult res;
    res.path = im.at("path").get<std::string>();
    res.predicted_age = im.at("predicted_age").get<double>();
    res.true_age = im.at("true_age").get<int>();
    for (const json& p : im.at("proposals")) {
      const auto b = p.at("box").get<std::vector<double>>();
      if (b.size() != 4) throw IoError("report: box needs 4 coordinates");
      res.proposals.push_back({Box{b[0], b[1], b[2], b[3]}, p.at("score").get<double>()});
    }
    r.per_image.push_back(std::move(res));
  }
}

void write_report(const std::filesystem::path& path, const EvalReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << json(report).dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

EvalReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in).get<EvalReport>();
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

namespace {

struct ForwardResult {
  double age = 0.0;
  std::vector<ScoredBox> proposals;  // network frame
};

ForwardResult run_single(ALANet& model, const Image& image, Gender gender) {
  PreparedSample s;
  s.image = image;
  s.gender = gender;
  TrainingBatch batch = collate(std::span<const PreparedSample>(&s, 1));
  model.set_training(false);
  NetworkOutputs out = model.forward(batch.input);
  ForwardResult r;
  r.age = ordinal::decode_logits(out.age_logits.value().values());
  if (!out.proposals.empty()) {
    const RoiSelection& sel = out.proposals[0];
    for (std::size_t k = 0; k < sel.boxes.size(); ++k) r.proposals.push_back({sel.boxes[k], sel.scores[k]});
  }
  return r;
}

}  // namespace

Prediction predict(ALANet& model, const Image& image, Gender gender) {
  if (image.empty()) throw InvalidInput("predict: empty image");
  ResizedSample resized = resize_keep_aspect(image, Keypoints{}, model.config().input_long_side);
  ForwardResult r = run_single(model, resized.image, gender);
  Prediction p;
  p.age = r.age;
  for (const ScoredBox& b : r.proposals) p.proposals.push_back({scaled(b.box, 1.0 / resized.scale), b.score});
  return p;
}

EvalReport evaluate(ALANet& model, std::span<const ImageRecord> records,
                    std::span<const std::string> paths) {
  if (records.empty()) throw InvalidInput("evaluate: no records");
  if (!paths.empty() && paths.size() != records.size()) {
    throw InvalidInput("evaluate: one path per record");
  }
  EvalReport report;
  std::vector<double> predictions;
  std::vector<int> truths;
  std::vector<std::vector<ScoredBox>> dets;
  std::vector<std::vector<Box>> gts;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ImageRecord& rec = records[i];
    if (rec.age_months < 0 || rec.age_months >= model.config().num_ranks) {
      throw ConfigError("record age " + std::to_string(rec.age_months) +
                        " exceeds the checkpoint's rank count");
    }
    PreparedSample s = prepare_sample(rec, model.config());
    ForwardResult r = run_single(model, s.image, s.gender);
    ImageResult res;
    res.path = paths.empty() ? std::to_string(i) : paths[i];
    res.predicted_age = r.age;
    res.true_age = rec.age_months;
    for (const ScoredBox& b : r.proposals) res.proposals.push_back({scaled(b.box, 1.0 / s.scale), b.score});
    predictions.push_back(r.age);
    truths.push_back(rec.age_months);
    dets.push_back(std::move(r.proposals));
    gts.push_back(std::move(s.boxes));
    report.per_image.push_back(std::move(res));
  }
  report.mae_months = mae(predictions, truths);
  if (model.config().use_local_extraction) {
    const CocoMap m = coco_map(dets, gts);
    report.ap = m.ap;
    report.ap50 = m.ap50;
    report.ap75 = m.ap75;
  }
  return report;
}

EvalReport evaluate(const std::filesystem::path& checkpoint, const DatasetManifest& manifest,
                    const std::filesystem::path& manifest_dir) {
  ALANet model = load_model(checkpoint);
  int max_age = 0;
  for (const ManifestEntry& e : manifest.entries) max_age = std::max(max_age, e.age_months);
  if (max_age >= model.config().num_ranks) {
    throw ConfigError("manifest ages reach " + std::to_string(max_age) + " but the checkpoint has " +
                      std::to_string(model.config().num_ranks) + " ranks");
  }
  manifest.validate(model.config().num_ranks);
  std::vector<ImageRecord> records;
  std::vector<std::string> paths;
  for (const ManifestEntry& e : manifest.entries) {
    records.push_back(load_record(e, manifest_dir));
    paths.push_back(e.image_path);
  }
  return evaluate(model, records, paths);
}

void render_overlay(const std::filesystem::path& path, const Image& image,
                    std::span<const Box> gt_boxes, std::span<const ScoredBox> proposals,
                    double predicted_age, std::optional<int> true_age) {
  if (image.empty()) throw InvalidInput("render_overlay: empty image");
  RgbImage canvas(image);
  for (const Box& b : gt_boxes) draw_box(canvas, b, {40, 220, 40});
  for (const ScoredBox& p : proposals) draw_box(canvas, p.box, {230, 40, 40});
  std::string caption = "P" + fixed1(predicted_age);
  if (true_age) caption += " T" + std::to_string(*true_age);
  const int scale = std::max(1, image.width / 160);
  draw_text(canvas, 2 * scale, 2 * scale, caption, scale, {255, 230, 0});
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_ppm(path, canvas);
}

}  // namespace alanet
