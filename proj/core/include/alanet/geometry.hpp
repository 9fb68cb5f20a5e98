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

#ifndef ALANET_GEOMETRY_HPP_
#define ALANET_GEOMETRY_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "alanet/random.hpp"
#include "alanet/tensor.hpp"

namespace alanet {

/// Axis-aligned rectangle in continuous pixel coordinates. Pixel (row r,
/// column c) covers [c, c+1) x [r, r+1), so a W-wide image spans [0, W].
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }

  // x1 < x2, y1 < y2, all coordinates finite.
  bool valid() const;

  bool operator==(const Box&) const = default;
};

// Returns the box clamped into [0, width] x [0, height].
Box clip_box(const Box& box, double width, double height);

double iou(const Box& a, const Box& b);

struct AnchorGrid {
  std::vector<Box> anchors;  // ordered (row, col, size), size fastest
  int feature_h = 0;
  int feature_w = 0;
  int stride = 0;
  std::vector<int> sizes;

  std::size_t index(int row, int col, int size_index) const {
    return (static_cast<std::size_t>(row) * feature_w + col) * sizes.size() + size_index;
  }
  std::size_t size() const { return anchors.size(); }
};

// Square anchors centered at ((col + 0.5) * stride, (row + 0.5) * stride).
AnchorGrid generate_anchors(int feature_h, int feature_w, int stride, std::span<const int> sizes);

/// Center/size regression target of a box relative to an anchor.
struct BoxDelta {
  double dx = 0.0;
  double dy = 0.0;
  double dw = 0.0;
  double dh = 0.0;
};

inline constexpr double kDeltaLogClamp = 4.0;

BoxDelta encode_delta(const Box& anchor, const Box& target);
// dw and dh are clamped to at most kDeltaLogClamp before exponentiation.
Box decode_delta(const Box& anchor, const BoxDelta& delta);
std::vector<Box> decode_deltas(std::span<const Box> anchors, std::span<const BoxDelta> deltas);

enum class AnchorLabel : std::int8_t { kIgnore = -1, kNegative = 0, kPositive = 1 };

struct RpnTargets {
  std::vector<AnchorLabel> labels;
  // Meaningful only where labels[i] == kPositive; zero elsewhere.
  std::vector<BoxDelta> deltas;

  int count(AnchorLabel label) const;
};

struct RpnSampling {
  int anchors_per_image = 256;
  double positive_fraction = 0.5;
};

/// Labels every anchor against the ground-truth boxes. An anchor is positive
/// when its best IoU reaches `pos_iou` or when it attains the best IoU of some
/// ground-truth box (ties included), negative when its best IoU is below
/// `neg_iou`, ignored otherwise. Regression targets point at the anchor's
/// best-overlapping ground truth. No subsampling is applied here.
///
/// Throws InvalidInput when `gt_boxes` is empty.
RpnTargets assign_rpn_targets(std::span<const Box> anchors, std::span<const Box> gt_boxes,
                              double pos_iou = 0.7, double neg_iou = 0.3);

// Keeps at most positive_fraction * anchors_per_image positives and fills the
// remainder of the budget with negatives; the rest become kIgnore.
void sample_rpn_targets(RpnTargets& targets, const RpnSampling& sampling, Rng& rng);

/// Greedy non-maximum suppression. Returns kept indices in descending score
/// order; equal scores are visited by ascending index. A box is dropped when
/// its IoU with an already kept box is strictly greater than `iou_thresh`.
std::vector<int> nms(std::span<const Box> boxes, std::span<const double> scores,
                     double iou_thresh = 0.7);

struct RoiAlignParams {
  int out_h = 7;
  int out_w = 7;
  double spatial_scale = 1.0 / 16.0;
  int samples_per_bin = 2;
};

// ROI align over one C x H x W map given as a raw pointer. The box is scaled
// by spatial_scale without rounding and shifted by half a cell so that cell
// (i, j) sits at continuous position (j + 0.5, i + 0.5). Each bin averages a
// regular samples_per_bin^2 grid of bilinear samples; samples further than
// one cell outside the map read as 0, samples within that margin are clamped
// to the border.
void roi_align_forward(const double* feature, int channels, int height, int width,
                       const Box& box, const RoiAlignParams& params, double* out);

// Accumulates d(out)/d(feature) contracted with grad_out into grad_feature.
void roi_align_backward(const double* grad_out, int channels, int height, int width,
                        const Box& box, const RoiAlignParams& params, double* grad_feature);

// Tensor convenience wrapper: feature is C x H x W, result C x out_h x out_w.
Tensor roi_align(const Tensor& feature, const Box& box, const RoiAlignParams& params);

}  // namespace alanet

#endif  // ALANET_GEOMETRY_HPP_
