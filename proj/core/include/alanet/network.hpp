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

#ifndef ALANET_NETWORK_HPP_
#define ALANET_NETWORK_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "alanet/autograd.hpp"
#include "alanet/geometry.hpp"
#include "alanet/tensor.hpp"

namespace alanet {

enum class BackboneKind { kResNet50, kTiny };

std::string backbone_name(BackboneKind kind);
BackboneKind parse_backbone(const std::string& name);

inline constexpr int kFeatureStride = 16;

/// Full hyperparameter record of the network. The two toggles select the
/// ablation rows: (off, off) plain backbone, (on, off) local extraction,
/// (off, on) patch training on annotated boxes, (on, on) the full model.
struct ALANetConfig {
  BackboneKind backbone = BackboneKind::kResNet50;
  // Tiny: width of the last two stages (stages are w/4, w/2, w, w).
  // ResNet-50: stem width (64 for the standard network).
  int backbone_channels = 64;
  int num_ranks = 240;
  int num_rois = 17;
  int roi_box_size = 64;
  std::vector<int> anchor_sizes = {32, 64, 128};
  int roi_align_h = 7;
  int roi_align_w = 7;
  int roi_align_samples = 2;
  int roi_head_channels = 256;
  int local_dim = 512;
  int gender_dim = 32;
  int mlp_hidden = 512;
  bool use_local_extraction = true;
  bool use_patch_training = true;

  int input_long_side = 512;
  double nms_thresh = 0.7;
  double rpn_pos_iou = 0.7;
  double rpn_neg_iou = 0.3;
  int rpn_anchors_per_image = 256;
  double rpn_positive_fraction = 0.5;
  std::uint64_t init_seed = 0;

  // Throws ConfigError on inconsistent values.
  void validate() const;

  int feature_channels() const;
  int global_dim() const;
  int fusion_input_dim() const;
  RoiAlignParams roi_align_params() const;

  bool operator==(const ALANetConfig&) const = default;
};

/// Parameter groups; each trainable tensor belongs to exactly one.
enum class ParamGroup { kBackbone, kRpn, kRoiHead, kGender, kFusion, kPatchHead };

std::string group_name(ParamGroup group);

struct NamedParameter {
  std::string name;
  ParamGroup group;
  ag::Var var;
};

/// Detection proposals of one image after NMS and backfill.
struct RoiSelection {
  std::vector<Box> boxes;
  std::vector<double> scores;
  std::vector<int> indices;  // anchor index of each selected box
};

/// Keeps the top `n` boxes that survive greedy NMS. When fewer than `n`
/// survive, the highest-scoring suppressed boxes are appended (cycling the
/// ranking if there are fewer than `n` boxes in total), so exactly `n` boxes
/// are always returned. Requires at least one box.
RoiSelection select_top_rois(std::span<const double> scores, std::span<const Box> boxes, int n = 17,
                             double nms_thresh = 0.7);

/// Network input: a padded batch of single-channel images.
struct NetworkInput {
  Tensor images;                           // N x 1 x H x W
  std::vector<int> genders;                // encode_gender() codes
  std::vector<std::pair<int, int>> sizes;  // valid (height, width) of each image
  // Annotated ROI boxes; consumed in training when patch training runs
  // without local extraction.
  std::vector<std::vector<Box>> annotated_boxes;
};

struct NetworkOutputs {
  ag::Var age_logits;      // N x (K-1)
  ag::Var global_feature;  // N x global_dim
  ag::Var gender_feature;  // N x gender_dim
  AnchorGrid anchors;
  ag::Var rpn_logits;  // N x M          (local extraction only)
  ag::Var rpn_deltas;  // N x M x 4      (local extraction only)
  std::vector<RoiSelection> proposals;     // N x num_rois (local extraction only)
  ag::Var roi_features;   // (N * num_rois) x local_dim
  ag::Var local_feature;  // N x local_dim (local extraction only)
  ag::Var patch_logits;   // (N * num_rois) x (K-1), training with patch training only
};

struct BackboneOutput {
  ag::Var feature;  // stride-16 map
  ag::Var global;   // N x global_dim
};

struct RpnOutput {
  ag::Var logits;  // N x M
  ag::Var deltas;  // N x M x 4
};

struct LocalFeatures {
  ag::Var local;         // N x local_dim
  ag::Var roi_features;  // (N * num_rois) x local_dim
};

class ALANet {
 public:
  explicit ALANet(ALANetConfig config);

  ALANet(const ALANet&) = delete;
  ALANet& operator=(const ALANet&) = delete;
  ALANet(ALANet&&) noexcept = default;
  ALANet& operator=(ALANet&&) noexcept = default;

  const ALANetConfig& config() const { return config_; }

  // Switches batch-norm statistics and patch-head evaluation.
  void set_training(bool training) { training_ = training; }
  bool training() const { return training_; }

  NetworkOutputs forward(const NetworkInput& input);

  BackboneOutput backbone_forward(const ag::Var& images);
  RpnOutput rpn_forward(const ag::Var& feature);
  // `rois` holds num_rois boxes per image, in image coordinates.
  LocalFeatures local_extract(const ag::Var& feature, std::span<const std::vector<Box>> rois);
  ag::Var gender_embed(std::span<const int> genders);
  // `local` is ignored (may be undefined) when local extraction is disabled.
  ag::Var predict_age_logits(const ag::Var& global, const ag::Var& local, const ag::Var& gender);
  ag::Var patch_head(const ag::Var& roi_features);

  AnchorGrid anchors_for(int feature_h, int feature_w) const;

  const std::vector<NamedParameter>& parameters() const { return params_; }
  // Parameters that the enabled toggles actually use.
  std::vector<ag::Var> trainable_parameters() const;
  bool group_enabled(ParamGroup group) const;

  // Batch-norm running statistics, keyed by layer name.
  std::map<std::string, ag::BatchNormState*> buffers();

  void zero_grad();
  std::size_t parameter_count() const;

 private:
  struct Conv {
    ag::Var weight;
    ag::Var bias;
    int stride = 1;
    int pad = 0;
  };
  struct Dense {
    ag::Var weight;
    ag::Var bias;
  };
  struct Norm {
    std::string name;
    ag::Var gamma;
    ag::Var beta;
    ag::BatchNormState state;
  };
  struct Bottleneck {
    Conv c1, c2, c3;
    Norm n1, n2, n3;
    bool has_down = false;
    Conv down;
    Norm down_norm;
  };

  Conv make_conv(const std::string& name, ParamGroup group, int in, int out, int k, int stride,
                 int pad, bool bias, double init_std = -1.0);
  Dense make_dense(const std::string& name, ParamGroup group, int in, int out, double init_std = -1.0);
  Norm make_norm(const std::string& name, int channels);

  ag::Var apply(const Conv& c, const ag::Var& x) const;
  ag::Var apply(const Dense& d, const ag::Var& x) const;
  ag::Var apply(Norm& n, const ag::Var& x);
  ag::Var apply(Bottleneck& b, const ag::Var& x);

  void build_tiny();
  void build_resnet50();

  ALANetConfig config_;
  bool training_ = true;
  Rng init_rng_;
  std::vector<NamedParameter> params_;

  // tiny backbone
  std::vector<Conv> tiny_convs_;
  // resnet-50 backbone
  Conv stem_;
  Norm stem_norm_;
  std::vector<std::vector<Bottleneck>> stages_;

  Conv rpn_conv_;
  Conv rpn_cls_;
  Conv rpn_box_;
  std::vector<Conv> roi_convs_;
  Dense roi_fc_;
  ag::Var gender_table_;
  Dense fuse1_, fuse2_, fuse_out_;
  Dense patch1_, patch_out_;
};

}  // namespace alanet

#endif  // ALANET_NETWORK_HPP_
