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


#include <benchmark/benchmark.h>

#include <vector>

#include "alanet/geometry.hpp"
#include "alanet/random.hpp"

namespace alanet {
namespace {

std::vector<Box> random_boxes(int n, Rng& rng) {
  std::vector<Box> boxes;
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform(0, 480), y = rng.uniform(0, 480);
    boxes.push_back({x, y, x + rng.uniform(16, 128), y + rng.uniform(16, 128)});
  }
  return boxes;
}

void BM_Nms(benchmark::State& state) {
  Rng rng(1);
  const int n = static_cast<int>(state.range(0));
  const auto boxes = random_boxes(n, rng);
  std::vector<double> scores(n);
  for (double& s : scores) s = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(nms(boxes, scores, 0.7));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Nms)->Arg(256)->Arg(2304)->Arg(9216);

void BM_AssignRpnTargets(benchmark::State& state) {
  const std::vector<int> sizes = {32, 64, 128};
  const AnchorGrid grid = generate_anchors(32, 32, 16, sizes);
  Rng rng(2);
  const auto gts = random_boxes(17, rng);
  for (auto _ : state) benchmark::DoNotOptimize(assign_rpn_targets(grid.anchors, gts));
}
BENCHMARK(BM_AssignRpnTargets);

void BM_RoiAlignForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Tensor feature({c, 32, 32});
  Rng rng(3);
  for (double& v : feature.values()) v = rng.uniform();
  const auto boxes = random_boxes(17, rng);
  const RoiAlignParams p;
  for (auto _ : state) {
    for (const Box& b : boxes) benchmark::DoNotOptimize(roi_align(feature, b, p));
  }
  state.SetItemsProcessed(state.iterations() * 17);
}
BENCHMARK(BM_RoiAlignForward)->Arg(32)->Arg(1024);

}  // namespace
}  // namespace alanet

BENCHMARK_MAIN();
