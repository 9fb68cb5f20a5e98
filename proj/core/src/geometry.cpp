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

#include "alanet/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "alanet/error.hpp"

namespace alanet {

bool Box::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
         x1 < x2 && y1 < y2;
}

Box clip_box(const Box& box, double width, double height) {
  return Box{std::clamp(box.x1, 0.0, width), std::clamp(box.y1, 0.0, height),
             std::clamp(box.x2, 0.0, width), std::clamp(box.y2, 0.0, height)};
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

AnchorGrid generate_anchors(int feature_h, int feature_w, int stride, std::span<const int> sizes) {
  if (stride <= 0) throw InvalidInput("anchor stride must be positive");
  if (sizes.empty()) throw InvalidInput("anchor sizes must be nonempty");
  if (feature_h < 0 || feature_w < 0) throw InvalidInput("negative feature size");
  AnchorGrid grid;
  grid.feature_h = feature_h;
  grid.feature_w = feature_w;
  grid.stride = stride;
  grid.sizes.assign(sizes.begin(), sizes.end());
  grid.anchors.reserve(static_cast<std::size_t>(feature_h) * feature_w * sizes.size());
  for (int row = 0; row < feature_h; ++row) {
    const double cy = (row + 0.5) * stride;
    for (int col = 0; col < feature_w; ++col) {
      const double cx = (col + 0.5) * stride;
      for (int size : sizes) {
        if (size <= 0) throw InvalidInput("anchor size must be positive");
        const double half = 0.5 * size;
        grid.anchors.push_back(Box{cx - half, cy - half, cx + half, cy + half});
      }
    }
  }
  return grid;
}

BoxDelta encode_delta(const Box& anchor, const Box& target) {
  const double aw = anchor.width();
  const double ah = anchor.height();
  return BoxDelta{(target.center_x() - anchor.center_x()) / aw,
                  (target.center_y() - anchor.center_y()) / ah, std::log(target.width() / aw),
                  std::log(target.height() / ah)};
}

Box decode_delta(const Box& anchor, const BoxDelta& delta) {
  const double aw = anchor.width();
  const double ah = anchor.height();
  const double cx = anchor.center_x() + delta.dx * aw;
  const double cy = anchor.center_y() + delta.dy * ah;
  const double w = aw * std::exp(std::min(delta.dw, kDeltaLogClamp));
  const double h = ah * std::exp(std::min(delta.dh, kDeltaLogClamp));
  return Box{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

std::vector<Box> decode_deltas(std::span<const Box> anchors, std::span<const BoxDelta> deltas) {
  if (anchors.size() != deltas.size()) throw InvalidInput("decode_deltas: size mismatch");
  std::vector<Box> out(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) out[i] = decode_delta(anchors[i], deltas[i]);
  return out;
}

int RpnTargets::count(AnchorLabel label) const {
  return static_cast<int>(std::count(labels.begin(), labels.end(), label));
}

RpnTargets assign_rpn_targets(std::span<const Box> anchors, std::span<const Box> gt_boxes,
                              double pos_iou, double neg_iou) {
  if (gt_boxes.empty()) throw InvalidInput("assign_rpn_targets: no ground-truth boxes");
  const std::size_t na = anchors.size();
  const std::size_t ng = gt_boxes.size();

  std::vector<double> best_iou(na, -1.0);
  std::vector<std::size_t> best_gt(na, 0);
  std::vector<double> gt_best(ng, 0.0);
  std::vector<double> overlaps(na * ng);
  for (std::size_t a = 0; a < na; ++a) {
    for (std::size_t g = 0; g < ng; ++g) {
      const double v = iou(anchors[a], gt_boxes[g]);
      overlaps[a * ng + g] = v;
      if (v > best_iou[a]) {
        best_iou[a] = v;
        best_gt[a] = g;
      }
      gt_best[g] = std::max(gt_best[g], v);
    }
  }

  RpnTargets t;
  t.labels.assign(na, AnchorLabel::kIgnore);
  t.deltas.assign(na, BoxDelta{});
  for (std::size_t a = 0; a < na; ++a) {
    if (best_iou[a] < neg_iou) t.labels[a] = AnchorLabel::kNegative;
    if (best_iou[a] >= pos_iou) t.labels[a] = AnchorLabel::kPositive;
  }
  // Low-quality matches: every gt keeps its best anchors, ties included.
  for (std::size_t a = 0; a < na; ++a) {
    for (std::size_t g = 0; g < ng; ++g) {
      if (gt_best[g] > 0.0 && overlaps[a * ng + g] == gt_best[g]) {
        t.labels[a] = AnchorLabel::kPositive;
        break;
      }
    }
  }
  for (std::size_t a = 0; a < na; ++a) {
    if (t.labels[a] == AnchorLabel::kPositive) {
      t.deltas[a] = encode_delta(anchors[a], gt_boxes[best_gt[a]]);
    }
  }
  return t;
}

void sample_rpn_targets(RpnTargets& targets, const RpnSampling& sampling, Rng& rng) {
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < targets.labels.size(); ++i) {
    if (targets.labels[i] == AnchorLabel::kPositive) pos.push_back(i);
    if (targets.labels[i] == AnchorLabel::kNegative) neg.push_back(i);
  }
  const auto max_pos = static_cast<std::size_t>(sampling.anchors_per_image * sampling.positive_fraction);
  if (pos.size() > max_pos) {
    rng.shuffle(pos);
    for (std::size_t k = max_pos; k < pos.size(); ++k) {
      targets.labels[pos[k]] = AnchorLabel::kIgnore;
      targets.deltas[pos[k]] = BoxDelta{};
    }
    pos.resize(max_pos);
  }
  const std::size_t budget = static_cast<std::size_t>(sampling.anchors_per_image) - pos.size();
  if (neg.size() > budget) {
    rng.shuffle(neg);
    for (std::size_t k = budget; k < neg.size(); ++k) targets.labels[neg[k]] = AnchorLabel::kIgnore;
  }
}

std::vector<int> nms(std::span<const Box> boxes, std::span<const double> scores,
                     double iou_thresh) {
  if (boxes.size() != scores.size()) throw InvalidInput("nms: boxes/scores size mismatch");
  std::vector<int> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  std::vector<char> removed(boxes.size(), 0);
  std::vector<int> keep;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const int i = order[oi];
    if (removed[i]) continue;
    keep.push_back(i);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const int j = order[oj];
      if (!removed[j] && iou(boxes[i], boxes[j]) > iou_thresh) removed[j] = 1;
    }
  }
  return keep;
}

namespace {

struct BilinearTap {
  std::array<int, 4> index{};
  std::array<double, 4> weight{};
};

// Sampling taps of every bin; shared by all channels. Taps of samples that
// fall outside the map carry zero weight.
std::vector<BilinearTap> roi_align_taps(int height, int width, const Box& box,
                                        const RoiAlignParams& p) {
  const int s = p.samples_per_bin;
  if (s <= 0 || p.out_h <= 0 || p.out_w <= 0) throw InvalidInput("roi_align: bad parameters");
  const double x0 = box.x1 * p.spatial_scale - 0.5;
  const double y0 = box.y1 * p.spatial_scale - 0.5;
  const double roi_w = (box.x2 - box.x1) * p.spatial_scale;
  const double roi_h = (box.y2 - box.y1) * p.spatial_scale;
  const double bin_w = roi_w / p.out_w;
  const double bin_h = roi_h / p.out_h;
  const double norm = 1.0 / (s * s);

  std::vector<BilinearTap> taps(static_cast<std::size_t>(p.out_h) * p.out_w * s * s);
  std::size_t t = 0;
  for (int ph = 0; ph < p.out_h; ++ph) {
    for (int pw = 0; pw < p.out_w; ++pw) {
      for (int iy = 0; iy < s; ++iy) {
        double y = y0 + ph * bin_h + (iy + 0.5) * bin_h / s;
        for (int ix = 0; ix < s; ++ix, ++t) {
          double x = x0 + pw * bin_w + (ix + 0.5) * bin_w / s;
          BilinearTap& tap = taps[t];
          if (y < -1.0 || y > height || x < -1.0 || x > width) continue;
          double yy = std::max(y, 0.0);
          double xx = std::max(x, 0.0);
          int y_low = static_cast<int>(yy);
          int x_low = static_cast<int>(xx);
          int y_high;
          int x_high;
          if (y_low >= height - 1) {
            y_low = y_high = height - 1;
            yy = y_low;
          } else {
            y_high = y_low + 1;
          }
          if (x_low >= width - 1) {
            x_low = x_high = width - 1;
            xx = x_low;
          } else {
            x_high = x_low + 1;
          }
          const double ly = yy - y_low;
          const double lx = xx - x_low;
          const double hy = 1.0 - ly;
          const double hx = 1.0 - lx;
          tap.index = {y_low * width + x_low, y_low * width + x_high, y_high * width + x_low,
                       y_high * width + x_high};
          tap.weight = {hy * hx * norm, hy * lx * norm, ly * hx * norm, ly * lx * norm};
        }
      }
    }
  }
  return taps;
}

}  // namespace

void roi_align_forward(const double* feature, int channels, int height, int width,
                       const Box& box, const RoiAlignParams& params, double* out) {
  const auto taps = roi_align_taps(height, width, box, params);
  const int bins = params.out_h * params.out_w;
  const int per_bin = params.samples_per_bin * params.samples_per_bin;
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int c = 0; c < channels; ++c) {
    const double* f = feature + c * plane;
    double* o = out + static_cast<std::size_t>(c) * bins;
    for (int b = 0; b < bins; ++b) {
      double acc = 0.0;
      for (int k = 0; k < per_bin; ++k) {
        const BilinearTap& tap = taps[static_cast<std::size_t>(b) * per_bin + k];
        for (int q = 0; q < 4; ++q) acc += tap.weight[q] * f[tap.index[q]];
      }
      o[b] = acc;
    }
  }
}

void roi_align_backward(const double* grad_out, int channels, int height, int width,
                        const Box& box, const RoiAlignParams& params, double* grad_feature) {
  const auto taps = roi_align_taps(height, width, box, params);
  const int bins = params.out_h * params.out_w;
  const int per_bin = params.samples_per_bin * params.samples_per_bin;
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int c = 0; c < channels; ++c) {
    double* g = grad_feature + c * plane;
    const double* go = grad_out + static_cast<std::size_t>(c) * bins;
    for (int b = 0; b < bins; ++b) {
      const double v = go[b];
      if (v == 0.0) continue;
      for (int k = 0; k < per_bin; ++k) {
        const BilinearTap& tap = taps[static_cast<std::size_t>(b) * per_bin + k];
        for (int q = 0; q < 4; ++q) g[tap.index[q]] += tap.weight[q] * v;
      }
    }
  }
}

Tensor roi_align(const Tensor& feature, const Box& box, const RoiAlignParams& params) {
  if (feature.rank() != 3) throw InvalidInput("roi_align expects a C x H x W tensor");
  Tensor out({feature.dim(0), params.out_h, params.out_w});
  roi_align_forward(feature.data(), feature.dim(0), feature.dim(1), feature.dim(2), box, params,
                    out.data());
  return out;
}

}  // namespace alanet
