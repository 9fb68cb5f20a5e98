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

#include "alanet/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "alanet/error.hpp"
#include "alanet/ordinal.hpp"

namespace alanet {

std::string backbone_name(BackboneKind kind) {
  return kind == BackboneKind::kTiny ? "tiny" : "resnet50";
}

BackboneKind parse_backbone(const std::string& name) {
  if (name == "tiny") return BackboneKind::kTiny;
  if (name == "resnet50") return BackboneKind::kResNet50;
  throw ConfigError("unknown backbone '" + name + "' (expected resnet50 or tiny)");
}

std::string group_name(ParamGroup group) {
  switch (group) {
    case ParamGroup::kBackbone: return "backbone";
    case ParamGroup::kRpn: return "rpn";
    case ParamGroup::kRoiHead: return "roi_head";
    case ParamGroup::kGender: return "gender";
    case ParamGroup::kFusion: return "fusion";
    case ParamGroup::kPatchHead: return "patch_head";
  }
  return "unknown";
}

void ALANetConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("network config: " + msg); };
  if (num_ranks < 2) fail("num_ranks must be at least 2");
  if (num_rois < 1) fail("num_rois must be positive");
  if (roi_box_size <= 0) fail("roi_box_size must be positive");
  if (anchor_sizes.empty()) fail("anchor_sizes must be nonempty");
  for (int s : anchor_sizes) {
    if (s <= 0) fail("anchor sizes must be positive");
  }
  if (roi_align_h <= 0 || roi_align_w <= 0 || roi_align_samples <= 0) fail("bad roi_align settings");
  if (backbone_channels <= 0 || roi_head_channels <= 0 || local_dim <= 0 || gender_dim <= 0 ||
      mlp_hidden <= 0) {
    fail("layer widths must be positive");
  }
  if (backbone == BackboneKind::kTiny && backbone_channels % 4 != 0) {
    fail("tiny backbone_channels must be a multiple of 4");
  }
  if (input_long_side < kFeatureStride) fail("input_long_side must be at least 16");
  if (!(nms_thresh > 0.0 && nms_thresh <= 1.0)) fail("nms_thresh must be in (0, 1]");
  if (!(rpn_neg_iou <= rpn_pos_iou)) fail("rpn_neg_iou must not exceed rpn_pos_iou");
  if (rpn_anchors_per_image <= 0) fail("rpn_anchors_per_image must be positive");
  if (!(rpn_positive_fraction > 0.0 && rpn_positive_fraction <= 1.0)) {
    fail("rpn_positive_fraction must be in (0, 1]");
  }
}

int ALANetConfig::feature_channels() const {
  return backbone == BackboneKind::kTiny ? backbone_channels : 16 * backbone_channels;
}

int ALANetConfig::global_dim() const {
  return backbone == BackboneKind::kTiny ? backbone_channels : 32 * backbone_channels;
}

int ALANetConfig::fusion_input_dim() const {
  return global_dim() + (use_local_extraction ? local_dim : 0) + gender_dim;
}

RoiAlignParams ALANetConfig::roi_align_params() const {
  return RoiAlignParams{roi_align_h, roi_align_w, 1.0 / kFeatureStride, roi_align_samples};
}

RoiSelection select_top_rois(std::span<const double> scores, std::span<const Box> boxes, int n,
                             double nms_thresh) {
  if (boxes.empty()) throw InvalidInput("select_top_rois: no candidate boxes");
  if (boxes.size() != scores.size()) throw InvalidInput("select_top_rois: size mismatch");
  if (n <= 0) throw InvalidInput("select_top_rois: n must be positive");
  std::vector<int> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });

  // Greedy NMS in score order; the first n survivors are final because a box
  // can only be suppressed by a higher-ranked survivor.
  std::vector<int> kept;
  std::vector<int> suppressed;
  for (int i : order) {
    if (static_cast<int>(kept.size()) == n) break;
    bool drop = false;
    for (int k : kept) {
      if (iou(boxes[k], boxes[i]) > nms_thresh) {
        drop = true;
        break;
      }
    }
    (drop ? suppressed : kept).push_back(i);
  }
  for (std::size_t s = 0; static_cast<int>(kept.size()) < n && s < suppressed.size(); ++s) {
    kept.push_back(suppressed[s]);
  }
  for (std::size_t s = 0; static_cast<int>(kept.size()) < n; ++s) {
    kept.push_back(order[s % order.size()]);
  }

  RoiSelection sel;
  for (int i : kept) {
    sel.boxes.push_back(boxes[i]);
    sel.scores.push_back(scores[i]);
    sel.indices.push_back(i);
  }
  return sel;
}

namespace {

// Clips into the image and widens degenerate boxes to one pixel.
Box sanitize_proposal(const Box& box, double width, double height) {
  Box b = clip_box(box, width, height);
  if (b.x2 - b.x1 < 1.0) {
    const double c = std::clamp(0.5 * (b.x1 + b.x2), 0.5, width - 0.5);
    b.x1 = c - 0.5;
    b.x2 = c + 0.5;
  }
  if (b.y2 - b.y1 < 1.0) {
    const double c = std::clamp(0.5 * (b.y1 + b.y2), 0.5, height - 0.5);
    b.y1 = c - 0.5;
    b.y2 = c + 0.5;
  }
  return b;
}

}  // namespace

ALANet::ALANet(ALANetConfig config) : config_(std::move(config)), init_rng_(config_.init_seed) {
  config_.validate();
  if (config_.backbone == BackboneKind::kTiny) {
    build_tiny();
  } else {
    build_resnet50();
  }
  const int c = config_.feature_channels();
  const int a = static_cast<int>(config_.anchor_sizes.size());
  rpn_conv_ = make_conv("rpn.conv", ParamGroup::kRpn, c, c, 3, 1, 1, true);
  rpn_cls_ = make_conv("rpn.cls", ParamGroup::kRpn, c, a, 1, 1, 0, true, 0.01);
  rpn_box_ = make_conv("rpn.box", ParamGroup::kRpn, c, 4 * a, 1, 1, 0, true, 0.01);

  const int rh = config_.roi_head_channels;
  for (int i = 0; i < 4; ++i) {
    roi_convs_.push_back(make_conv("roi_head.conv" + std::to_string(i + 1), ParamGroup::kRoiHead,
                                   i == 0 ? c : rh, rh, 3, 1, 1, true));
  }
  roi_fc_ = make_dense("roi_head.fc", ParamGroup::kRoiHead,
                       rh * config_.roi_align_h * config_.roi_align_w, config_.local_dim);

  {
    Tensor table({2, config_.gender_dim});
    for (double& v : table.values()) v = init_rng_.normal();
    gender_table_ = ag::parameter(std::move(table));
    params_.push_back({"gender.table", ParamGroup::kGender, gender_table_});
  }

  const int k1 = config_.num_ranks - 1;
  fuse1_ = make_dense("fusion.fc1", ParamGroup::kFusion, config_.fusion_input_dim(), config_.mlp_hidden);
  fuse2_ = make_dense("fusion.fc2", ParamGroup::kFusion, config_.mlp_hidden, config_.mlp_hidden);
  fuse_out_ = make_dense("fusion.out", ParamGroup::kFusion, config_.mlp_hidden, k1, 0.01);
  patch1_ = make_dense("patch_head.fc1", ParamGroup::kPatchHead, config_.local_dim, config_.mlp_hidden);
  patch_out_ = make_dense("patch_head.out", ParamGroup::kPatchHead, config_.mlp_hidden, k1, 0.01);
}

ALANet::Conv ALANet::make_conv(const std::string& name, ParamGroup group, int in, int out, int k,
                               int stride, int pad, bool bias, double init_std) {
  const double std = init_std > 0.0 ? init_std : std::sqrt(2.0 / (in * k * k));
  Tensor w({out, in, k, k});
  for (double& v : w.values()) v = init_rng_.normal(0.0, std);
  Conv c;
  c.weight = ag::parameter(std::move(w));
  c.stride = stride;
  c.pad = pad;
  params_.push_back({name + ".weight", group, c.weight});
  if (bias) {
    c.bias = ag::parameter(Tensor({out}, 0.0));
    params_.push_back({name + ".bias", group, c.bias});
  }
  return c;
}

ALANet::Dense ALANet::make_dense(const std::string& name, ParamGroup group, int in, int out,
                                 double init_std) {
  const double std = init_std > 0.0 ? init_std : std::sqrt(2.0 / in);
  Tensor w({out, in});
  for (double& v : w.values()) v = init_rng_.normal(0.0, std);
  Dense d;
  d.weight = ag::parameter(std::move(w));
  d.bias = ag::parameter(Tensor({out}, 0.0));
  params_.push_back({name + ".weight", group, d.weight});
  params_.push_back({name + ".bias", group, d.bias});
  return d;
}

ALANet::Norm ALANet::make_norm(const std::string& name, int channels) {
  Norm n;
  n.name = name;
  n.gamma = ag::parameter(Tensor({channels}, 1.0));
  n.beta = ag::parameter(Tensor({channels}, 0.0));
  n.state.running_mean = Tensor({channels}, 0.0);
  n.state.running_var = Tensor({channels}, 1.0);
  params_.push_back({name + ".gamma", ParamGroup::kBackbone, n.gamma});
  params_.push_back({name + ".beta", ParamGroup::kBackbone, n.beta});
  return n;
}

void ALANet::build_tiny() {
  const int w = config_.backbone_channels;
  struct Spec {
    int in, out, stride;
  };
  const Spec specs[] = {{1, w / 4, 2}, {w / 4, w / 2, 2}, {w / 2, w, 2}, {w, w, 1}, {w, w, 2}, {w, w, 1}};
  int idx = 0;
  for (const Spec& s : specs) {
    tiny_convs_.push_back(make_conv("backbone.conv" + std::to_string(++idx), ParamGroup::kBackbone,
                                    s.in, s.out, 3, s.stride, 1, true));
  }
}

void ALANet::build_resnet50() {
  const int base = config_.backbone_channels;
  stem_ = make_conv("backbone.stem.conv", ParamGroup::kBackbone, 1, base, 7, 2, 3, false);
  stem_norm_ = make_norm("backbone.stem.bn", base);
  const int blocks[] = {3, 4, 6, 3};
  int in = base;
  for (int s = 0; s < 4; ++s) {
    const int planes = base << s;
    const int out = planes * 4;
    std::vector<Bottleneck> stage;
    for (int b = 0; b < blocks[s]; ++b) {
      const std::string p = "backbone.layer" + std::to_string(s + 1) + "." + std::to_string(b);
      const int stride = (b == 0 && s > 0) ? 2 : 1;
      Bottleneck blk;
      blk.c1 = make_conv(p + ".conv1", ParamGroup::kBackbone, in, planes, 1, 1, 0, false);
      blk.n1 = make_norm(p + ".bn1", planes);
      blk.c2 = make_conv(p + ".conv2", ParamGroup::kBackbone, planes, planes, 3, stride, 1, false);
      blk.n2 = make_norm(p + ".bn2", planes);
      blk.c3 = make_conv(p + ".conv3", ParamGroup::kBackbone, planes, out, 1, 1, 0, false);
      blk.n3 = make_norm(p + ".bn3", out);
      if (b == 0) {
        blk.has_down = true;
        blk.down = make_conv(p + ".downsample", ParamGroup::kBackbone, in, out, 1, stride, 0, false);
        blk.down_norm = make_norm(p + ".downsample.bn", out);
      }
      stage.push_back(std::move(blk));
      in = out;
    }
    stages_.push_back(std::move(stage));
  }
}

ag::Var ALANet::apply(const Conv& c, const ag::Var& x) const {
  return ag::conv2d(x, c.weight, c.bias, c.stride, c.pad);
}

ag::Var ALANet::apply(const Dense& d, const ag::Var& x) const {
  return ag::linear(x, d.weight, d.bias);
}

ag::Var ALANet::apply(Norm& n, const ag::Var& x) {
  return ag::batch_norm2d(x, n.gamma, n.beta, n.state, training_);
}

ag::Var ALANet::apply(Bottleneck& b, const ag::Var& x) {
  ag::Var y = ag::relu(apply(b.n1, apply(b.c1, x)));
  y = ag::relu(apply(b.n2, apply(b.c2, y)));
  y = apply(b.n3, apply(b.c3, y));
  ag::Var skip = b.has_down ? apply(b.down_norm, apply(b.down, x)) : x;
  return ag::relu(ag::add(y, skip));
}

BackboneOutput ALANet::backbone_forward(const ag::Var& images) {
  if (images.value().rank() != 4 || images.value().dim(1) != 1) {
    throw InvalidInput("backbone expects N x 1 x H x W images");
  }
  BackboneOutput out;
  if (config_.backbone == BackboneKind::kTiny) {
    ag::Var x = images;
    for (const Conv& c : tiny_convs_) x = ag::relu(apply(c, x));
    out.feature = x;
    out.global = ag::global_avg_pool(x);
    return out;
  }
  ag::Var x = ag::relu(apply(stem_norm_, apply(stem_, images)));
  x = ag::max_pool2d(x, 3, 2, 1);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (Bottleneck& b : stages_[s]) x = apply(b, x);
    if (s == 2) out.feature = x;
  }
  out.global = ag::global_avg_pool(x);
  return out;
}

RpnOutput ALANet::rpn_forward(const ag::Var& feature) {
  const int a = static_cast<int>(config_.anchor_sizes.size());
  ag::Var h = ag::relu(apply(rpn_conv_, feature));
  RpnOutput out;
  out.logits = ag::flatten(ag::to_anchor_major(apply(rpn_cls_, h), a));
  out.deltas = ag::to_anchor_major(apply(rpn_box_, h), a);
  return out;
}

LocalFeatures ALANet::local_extract(const ag::Var& feature, std::span<const std::vector<Box>> rois) {
  const int n = feature.value().dim(0);
  if (static_cast<int>(rois.size()) != n) throw InvalidInput("local_extract: one ROI list per image");
  std::vector<ag::RoiRef> refs;
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(rois[i].size()) != config_.num_rois) {
      throw InvalidInput("local_extract: expected " + std::to_string(config_.num_rois) +
                         " ROIs per image");
    }
    for (const Box& b : rois[i]) refs.push_back({i, b});
  }
  ag::Var x = ag::roi_align(feature, refs, config_.roi_align_params());
  for (const Conv& c : roi_convs_) x = ag::relu(apply(c, x));
  LocalFeatures out;
  out.roi_features = ag::relu(apply(roi_fc_, ag::flatten(x)));
  out.local = ag::segment_max(out.roi_features, config_.num_rois);
  return out;
}

ag::Var ALANet::gender_embed(std::span<const int> genders) {
  return ag::embedding(gender_table_, genders);
}

ag::Var ALANet::predict_age_logits(const ag::Var& global, const ag::Var& local,
                                   const ag::Var& gender) {
  std::vector<ag::Var> parts{global};
  if (config_.use_local_extraction) {
    if (!local.defined()) throw ConfigError("local feature required when local extraction is on");
    parts.push_back(local);
  }
  parts.push_back(gender);
  int width = 0;
  for (const ag::Var& p : parts) width += p.value().rank() == 2 ? p.value().dim(1) : -1;
  if (width != config_.fusion_input_dim()) {
    throw ConfigError("fusion input has width " + std::to_string(width) + ", expected " +
                      std::to_string(config_.fusion_input_dim()));
  }
  ag::Var h = ag::relu(apply(fuse1_, ag::concat_cols(parts)));
  h = ag::relu(apply(fuse2_, h));
  return apply(fuse_out_, h);
}

ag::Var ALANet::patch_head(const ag::Var& roi_features) {
  return apply(patch_out_, ag::relu(apply(patch1_, roi_features)));
}

AnchorGrid ALANet::anchors_for(int feature_h, int feature_w) const {
  return generate_anchors(feature_h, feature_w, kFeatureStride, config_.anchor_sizes);
}

NetworkOutputs ALANet::forward(const NetworkInput& input) {
  const Tensor& images = input.images;
  if (images.rank() != 4) throw InvalidInput("forward: images must be N x 1 x H x W");
  const int n = images.dim(0);
  if (static_cast<int>(input.genders.size()) != n) throw InvalidInput("forward: one gender per image");
  std::vector<std::pair<int, int>> sizes = input.sizes;
  if (sizes.empty()) sizes.assign(n, {images.dim(2), images.dim(3)});
  if (static_cast<int>(sizes.size()) != n) throw InvalidInput("forward: one size per image");

  NetworkOutputs out;
  BackboneOutput bb = backbone_forward(ag::constant(images));
  out.global_feature = bb.global;
  out.gender_feature = gender_embed(input.genders);

  std::vector<std::vector<Box>> rois;
  if (config_.use_local_extraction) {
    RpnOutput rpn = rpn_forward(bb.feature);
    out.rpn_logits = rpn.logits;
    out.rpn_deltas = rpn.deltas;
    out.anchors = anchors_for(bb.feature.value().dim(2), bb.feature.value().dim(3));
    const std::size_t m = out.anchors.size();
    // Proposals are plain values: no gradient flows through box coordinates.
    const Tensor& lv = rpn.logits.value();
    const Tensor& dv = rpn.deltas.value();
    for (int i = 0; i < n; ++i) {
      std::vector<double> scores(m);
      std::vector<Box> boxes(m);
      for (std::size_t a = 0; a < m; ++a) {
        scores[a] = ordinal::sigmoid(lv[i * m + a]);
        const double* d = dv.data() + (i * m + a) * 4;
        boxes[a] = sanitize_proposal(decode_delta(out.anchors.anchors[a], BoxDelta{d[0], d[1], d[2], d[3]}),
                                     sizes[i].second, sizes[i].first);
      }
      out.proposals.push_back(select_top_rois(scores, boxes, config_.num_rois, config_.nms_thresh));
      rois.push_back(out.proposals.back().boxes);
    }
  } else if (config_.use_patch_training && training_) {
    if (static_cast<int>(input.annotated_boxes.size()) != n) {
      throw ConfigError("patch training without local extraction needs annotated boxes");
    }
    rois = input.annotated_boxes;
  }

  if (!rois.empty()) {
    LocalFeatures lf = local_extract(bb.feature, rois);
    out.roi_features = lf.roi_features;
    if (config_.use_local_extraction) out.local_feature = lf.local;
    if (config_.use_patch_training && training_) out.patch_logits = patch_head(lf.roi_features);
  }
  out.age_logits = predict_age_logits(out.global_feature, out.local_feature, out.gender_feature);
  return out;
}

bool ALANet::group_enabled(ParamGroup group) const {
  switch (group) {
    case ParamGroup::kRpn: return config_.use_local_extraction;
    case ParamGroup::kRoiHead: return config_.use_local_extraction || config_.use_patch_training;
    case ParamGroup::kPatchHead: return config_.use_patch_training;
    default: return true;
  }
}

std::vector<ag::Var> ALANet::trainable_parameters() const {
  std::vector<ag::Var> out;
  for (const NamedParameter& p : params_) {
    if (group_enabled(p.group)) out.push_back(p.var);
  }
  return out;
}

std::map<std::string, ag::BatchNormState*> ALANet::buffers() {
  std::map<std::string, ag::BatchNormState*> out;
  if (config_.backbone != BackboneKind::kResNet50) return out;
  out[stem_norm_.name] = &stem_norm_.state;
  for (auto& stage : stages_) {
    for (Bottleneck& b : stage) {
      out[b.n1.name] = &b.n1.state;
      out[b.n2.name] = &b.n2.state;
      out[b.n3.name] = &b.n3.state;
      if (b.has_down) out[b.down_norm.name] = &b.down_norm.state;
    }
  }
  return out;
}

void ALANet::zero_grad() {
  for (NamedParameter& p : params_) p.var.zero_grad();
}

std::size_t ALANet::parameter_count() const {
  std::size_t n = 0;
  for (const NamedParameter& p : params_) n += p.var.value().numel();
  return n;
}

}  // namespace alanet
