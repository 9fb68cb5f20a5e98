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


#ifndef ALANET_TESTS_SUPPORT_ORACLES_HPP_
#define ALANET_TESTS_SUPPORT_ORACLES_HPP_

// Brute-force reference implementations. Each one is written from the
// definition, shares no code with the library beyond plain data types, and
// trades speed for obviousness.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "alanet/geometry.hpp"

namespace alanet::oracle {

// Area of the region covered by `inside` over the arrangement cells spanned
// by the coordinates of a and b.
inline double cell_area(const Box& a, const Box& b, const std::function<bool(double, double)>& inside) {
  std::vector<double> xs = {a.x1, a.x2, b.x1, b.x2};
  std::vector<double> ys = {a.y1, a.y2, b.y1, b.y2};
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  double area = 0.0;
  for (int i = 0; i + 1 < 4; ++i) {
    for (int j = 0; j + 1 < 4; ++j) {
      const double cx = 0.5 * (xs[i] + xs[i + 1]);
      const double cy = 0.5 * (ys[j] + ys[j + 1]);
      if (inside(cx, cy)) area += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
    }
  }
  return area;
}

inline bool contains(const Box& b, double x, double y) {
  return x > b.x1 && x < b.x2 && y > b.y1 && y < b.y2;
}

inline double iou(const Box& a, const Box& b) {
  const double inter = cell_area(a, b, [&](double x, double y) { return contains(a, x, y) && contains(b, x, y); });
  const double uni = cell_area(a, b, [&](double x, double y) { return contains(a, x, y) || contains(b, x, y); });
  return uni > 0.0 ? inter / uni : 0.0;
}

// Repeatedly take the best remaining box and strike everything that overlaps
// it by more than the threshold.
inline std::vector<int> nms(const std::vector<Box>& boxes, const std::vector<double>& scores,
                            double thresh) {
  const int n = static_cast<int>(boxes.size());
  std::vector<bool> alive(n, true);
  std::vector<int> kept;
  while (true) {
    int best = -1;
    for (int i = 0; i < n; ++i) {
      if (alive[i] && (best < 0 || scores[i] > scores[best])) best = i;
    }
    if (best < 0) break;
    kept.push_back(best);
    alive[best] = false;
    for (int i = 0; i < n; ++i) {
      if (alive[i] && oracle::iou(boxes[best], boxes[i]) > thresh) alive[i] = false;
    }
  }
  return kept;
}

// Full sort, greedy suppression, then backfill from the suppressed ranking,
// repeating the whole ranking while still short.
inline std::vector<int> select_top(const std::vector<double>& scores, const std::vector<Box>& boxes,
                                   int n, double thresh) {
  std::vector<int> kept = nms(boxes, scores, thresh);
  std::vector<int> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  std::vector<int> out(kept.begin(), kept.begin() + std::min<std::size_t>(kept.size(), n));
  std::vector<int> suppressed;
  for (int i : order) {
    if (std::find(kept.begin(), kept.end(), i) == kept.end()) suppressed.push_back(i);
  }
  for (int i : suppressed) {
    if (static_cast<int>(out.size()) == n) break;
    out.push_back(i);
  }
  while (static_cast<int>(out.size()) < n) {
    for (int i : order) {
      if (static_cast<int>(out.size()) == n) break;
      out.push_back(i);
    }
  }
  return out;
}

// Bilinear value as a tent-weighted sum over every grid point.
inline double dense_bilinear(const std::vector<double>& f, int h, int w, double y, double x) {
  if (y < -1.0 || y > h || x < -1.0 || x > w) return 0.0;
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  double v = 0.0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      v += std::max(0.0, 1.0 - std::abs(y - r)) * std::max(0.0, 1.0 - std::abs(x - c)) * f[r * w + c];
    }
  }
  return v;
}

// feature: C x H x W flattened; output C x oh x ow flattened. Cell (r, c)
// sits at continuous position (c + 0.5, r + 0.5) of the scaled box frame.
inline std::vector<double> roi_align(const std::vector<double>& feature, int channels, int h, int w,
                                     const Box& box, int oh, int ow, double scale, int s) {
  std::vector<double> out(static_cast<std::size_t>(channels) * oh * ow, 0.0);
  const double bx = box.x1 * scale;
  const double by = box.y1 * scale;
  const double bw = (box.x2 - box.x1) * scale / ow;
  const double bh = (box.y2 - box.y1) * scale / oh;
  for (int c = 0; c < channels; ++c) {
    std::vector<double> plane(feature.begin() + static_cast<std::ptrdiff_t>(c) * h * w,
                              feature.begin() + static_cast<std::ptrdiff_t>(c + 1) * h * w);
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        double acc = 0.0;
        for (int a = 0; a < s; ++a) {
          for (int b = 0; b < s; ++b) {
            const double y = by + bh * (i + (a + 0.5) / s) - 0.5;
            const double x = bx + bw * (j + (b + 0.5) / s) - 0.5;
            acc += dense_bilinear(plane, h, w, y, x);
          }
        }
        out[(static_cast<std::size_t>(c) * oh + i) * ow + j] = acc / (s * s);
      }
    }
  }
  return out;
}

struct Det {
  int image;
  Box box;
  double score;
};

// AP from the definition: for every prefix of the ranking, redo greedy
// matching from scratch, then take for each recall level the best precision
// at any prefix with at least that recall.
inline double average_precision(const std::vector<Det>& dets, const std::vector<std::vector<Box>>& gts,
                                double thresh) {
  std::size_t num_gt = 0;
  for (const auto& g : gts) num_gt += g.size();
  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dets[a].score > dets[b].score; });
  std::vector<double> rec(dets.size() + 1, 0.0), prec(dets.size() + 1, 0.0);
  for (std::size_t k = 1; k <= dets.size(); ++k) {
    std::vector<std::vector<bool>> used(gts.size());
    for (std::size_t i = 0; i < gts.size(); ++i) used[i].assign(gts[i].size(), false);
    int tp = 0;
    for (std::size_t r = 0; r < k; ++r) {
      const Det& d = dets[order[r]];
      int best = -1;
      double best_v = 0.0;
      for (std::size_t g = 0; g < gts[d.image].size(); ++g) {
        const double v = oracle::iou(d.box, gts[d.image][g]);
        if (!used[d.image][g] && v >= thresh && (best < 0 || v > best_v)) {
          best = static_cast<int>(g);
          best_v = v;
        }
      }
      if (best >= 0) {
        used[d.image][best] = true;
        ++tp;
      }
    }
    rec[k] = static_cast<double>(tp) / num_gt;
    prec[k] = static_cast<double>(tp) / k;
  }
  double ap = 0.0;
  for (std::size_t k = 1; k <= dets.size(); ++k) {
    double best = 0.0;
    for (std::size_t q = k; q <= dets.size(); ++q) best = std::max(best, prec[q]);
    ap += (rec[k] - rec[k - 1]) * best;
  }
  return ap;
}

// Central differences of a scalar function of a vector.
inline std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                             std::vector<double> x, double eps = 1e-4) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = f(x);
    x[i] = keep - eps;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor).
inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace alanet::oracle

#endif  // ALANET_TESTS_SUPPORT_ORACLES_HPP_
