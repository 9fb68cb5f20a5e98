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


#ifndef ALANET_TESTS_SUPPORT_FIXTURES_HPP_
#define ALANET_TESTS_SUPPORT_FIXTURES_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "alanet/data_pipeline.hpp"
#include "alanet/network.hpp"
#include "alanet/random.hpp"
#include "alanet/training.hpp"

namespace alanet::testing {

// Small tiny-backbone network used throughout the tests.
inline ALANetConfig tiny_config(bool local = true, bool patch = true) {
  ALANetConfig c;
  c.backbone = BackboneKind::kTiny;
  c.backbone_channels = 32;
  c.roi_head_channels = 32;
  c.local_dim = 64;
  c.gender_dim = 8;
  c.mlp_hidden = 128;
  c.input_long_side = 256;
  c.use_local_extraction = local;
  c.use_patch_training = patch;
  return c;
}

// Even smaller network for finite-difference checks.
inline ALANetConfig micro_config(bool local = true, bool patch = true) {
  ALANetConfig c = tiny_config(local, patch);
  c.backbone_channels = 8;
  c.roi_head_channels = 4;
  c.local_dim = 6;
  c.gender_dim = 3;
  c.mlp_hidden = 8;
  c.num_ranks = 10;
  c.input_long_side = 64;
  c.roi_box_size = 16;
  c.anchor_sizes = {16, 32};
  c.rpn_anchors_per_image = 32;
  return c;
}

inline TrainConfig quick_train(int iterations, int batch = 4) {
  TrainConfig t;
  t.iterations = iterations;
  t.batch_size = batch;
  t.lr_decay_steps = {};
  t.augment = false;
  t.checkpoint_every = iterations;
  return t;
}

inline std::vector<ImageRecord> synth_records(int n, std::uint64_t seed, int age_max = 239) {
  SynthConfig cfg;
  cfg.age_max = age_max;
  SynthDataset d = synth_generate(n, seed, cfg);
  std::vector<ImageRecord> out;
  for (int i = 0; i < n; ++i) out.push_back(d.record(i));
  return out;
}

inline Box random_box(Rng& rng, double extent = 100.0, double min_side = 1.0) {
  const double x1 = rng.uniform(0.0, extent);
  const double y1 = rng.uniform(0.0, extent);
  return Box{x1, y1, x1 + rng.uniform(min_side, extent / 2), y1 + rng.uniform(min_side, extent / 2)};
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("alanet_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace alanet::testing

#endif  // ALANET_TESTS_SUPPORT_FIXTURES_HPP_
