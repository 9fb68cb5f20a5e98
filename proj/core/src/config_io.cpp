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

#include "alanet/config_io.hpp"

#include <set>
#include <string>

#include "alanet/error.hpp"

namespace alanet {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& section) {
  if (!j.is_object()) throw ConfigError(section + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError(section + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(section + ": key '" + key + "' has the wrong type");
  }
}

}  // namespace

void to_json(json& j, const ALANetConfig& c) {
  j = json{{"backbone", backbone_name(c.backbone)},
           {"backbone_channels", c.backbone_channels},
           {"num_ranks", c.num_ranks},
           {"num_rois", c.num_rois},
           {"roi_box_size", c.roi_box_size},
           {"anchor_sizes", c.anchor_sizes},
           {"roi_align_size", {c.roi_align_h, c.roi_align_w}},
           {"roi_align_samples", c.roi_align_samples},
           {"roi_head_channels", c.roi_head_channels},
           {"local_dim", c.local_dim},
           {"gender_dim", c.gender_dim},
           {"mlp_hidden", c.mlp_hidden},
           {"use_local_extraction", c.use_local_extraction},
           {"use_patch_training", c.use_patch_training},
           {"input_long_side", c.input_long_side},
           {"nms_thresh", c.nms_thresh},
           {"rpn_pos_iou", c.rpn_pos_iou},
           {"rpn_neg_iou", c.rpn_neg_iou},
           {"rpn_anchors_per_image", c.rpn_anchors_per_image},
           {"rpn_positive_fraction", c.rpn_positive_fraction},
           {"init_seed", c.init_seed}};
}

void from_json(const json& j, ALANetConfig& c) {
  const std::string s = "network";
  reject_unknown(j,
                 {"backbone", "backbone_channels", "num_ranks", "num_rois", "roi_box_size",
                  "anchor_sizes", "roi_align_size", "roi_align_samples", "roi_head_channels",
                  "local_dim", "gender_dim", "mlp_hidden", "use_local_extraction",
                  "use_patch_training", "input_long_side", "nms_thresh", "rpn_pos_iou",
                  "rpn_neg_iou", "rpn_anchors_per_image", "rpn_positive_fraction", "init_seed"},
                 s);
  if (auto it = j.find("backbone"); it != j.end()) {
    if (!it->is_string()) throw ConfigError("network: 'backbone' must be a string");
    c.backbone = parse_backbone(it->get<std::string>());
  }
  read(j, "backbone_channels", c.backbone_channels, s);
  read(j, "num_ranks", c.num_ranks, s);
  read(j, "num_rois", c.num_rois, s);
  read(j, "roi_box_size", c.roi_box_size, s);
  read(j, "anchor_sizes", c.anchor_sizes, s);
  if (auto it = j.find("roi_align_size"); it != j.end()) {
    std::vector<int> hw;
    read(j, "roi_align_size", hw, s);
    if (hw.size() != 2) throw ConfigError("network: roi_align_size must be [h, w]");
    c.roi_align_h = hw[0];
    c.roi_align_w = hw[1];
  }
  read(j, "roi_align_samples", c.roi_align_samples, s);
  read(j, "roi_head_channels", c.roi_head_channels, s);
  read(j, "local_dim", c.local_dim, s);
  read(j, "gender_dim", c.gender_dim, s);
  read(j, "mlp_hidden", c.mlp_hidden, s);
  read(j, "use_local_extraction", c.use_local_extraction, s);
  read(j, "use_patch_training", c.use_patch_training, s);
  read(j, "input_long_side", c.input_long_side, s);
  read(j, "nms_thresh", c.nms_thresh, s);
  read(j, "rpn_pos_iou", c.rpn_pos_iou, s);
  read(j, "rpn_neg_iou", c.rpn_neg_iou, s);
  read(j, "rpn_anchors_per_image", c.rpn_anchors_per_image, s);
  read(j, "rpn_positive_fraction", c.rpn_positive_fraction, s);
  read(j, "init_seed", c.init_seed, s);
}

void to_json(json& j, const AugmentConfig& c) {
  j = json{{"hflip_probability", c.hflip_probability},
           {"scale_range", {c.scale_min, c.scale_max}}};
}

void from_json(const json& j, AugmentConfig& c) {
  const std::string s = "training.augmentation";
  reject_unknown(j, {"hflip_probability", "scale_range"}, s);
  read(j, "hflip_probability", c.hflip_probability, s);
  if (j.contains("scale_range")) {
    std::vector<double> r;
    read(j, "scale_range", r, s);
    if (r.size() != 2) throw ConfigError(s + ": scale_range must be [min, max]");
    c.scale_min = r[0];
    c.scale_max = r[1];
  }
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"iterations", c.iterations},
           {"batch_size", c.batch_size},
           {"lr", c.lr},
           {"lr_decay_steps", c.lr_decay_steps},
           {"lr_decay_factor", c.lr_decay_factor},
           {"adam_betas", {c.adam_beta1, c.adam_beta2}},
           {"adam_eps", c.adam_eps},
           {"weight_decay", c.weight_decay},
           {"seed", c.seed},
           {"augment", c.augment},
           {"augmentation", c.augmentation},
           {"loss_weights", {{"ord", c.ord_weight}, {"patch", c.patch_weight}, {"rpn", c.rpn_weight}}},
           {"patch_rois", patch_roi_source_name(c.patch_rois)},
           {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const json& j, TrainConfig& c) {
  const std::string s = "training";
  reject_unknown(j,
                 {"iterations", "batch_size", "lr", "lr_decay_steps", "lr_decay_factor",
                  "adam_betas", "adam_eps", "weight_decay", "seed", "augment", "augmentation",
                  "loss_weights", "patch_rois", "checkpoint_every"},
                 s);
  read(j, "iterations", c.iterations, s);
  read(j, "batch_size", c.batch_size, s);
  read(j, "lr", c.lr, s);
  read(j, "lr_decay_steps", c.lr_decay_steps, s);
  read(j, "lr_decay_factor", c.lr_decay_factor, s);
  if (j.contains("adam_betas")) {
    std::vector<double> b;
    read(j, "adam_betas", b, s);
    if (b.size() != 2) throw ConfigError(s + ": adam_betas must be [beta1, beta2]");
    c.adam_beta1 = b[0];
    c.adam_beta2 = b[1];
  }
  read(j, "adam_eps", c.adam_eps, s);
  read(j, "weight_decay", c.weight_decay, s);
  read(j, "seed", c.seed, s);
  read(j, "augment", c.augment, s);
  if (j.contains("augmentation")) from_json(j.at("augmentation"), c.augmentation);
  if (j.contains("loss_weights")) {
    const json& w = j.at("loss_weights");
    reject_unknown(w, {"ord", "patch", "rpn"}, s + ".loss_weights");
    read(w, "ord", c.ord_weight, s);
    read(w, "patch", c.patch_weight, s);
    read(w, "rpn", c.rpn_weight, s);
  }
  if (j.contains("patch_rois")) {
    std::string name;
    read(j, "patch_rois", name, s);
    c.patch_rois = parse_patch_roi_source(name);
  }
  read(j, "checkpoint_every", c.checkpoint_every, s);
}

json parse_json_with_comments(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

}  // namespace alanet
