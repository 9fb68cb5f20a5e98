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


#ifndef ALANET_CHECKPOINT_HPP_
#define ALANET_CHECKPOINT_HPP_

#include <filesystem>

#include "alanet/network.hpp"
#include "alanet/training.hpp"

// Binary checkpoint: the magic "ALANETCK", a u32 format version, a u64 header
// length, a JSON header (configs, tensor directory, training state) and the
// raw little-endian doubles of every listed tensor in order.
namespace alanet {

struct CheckpointInfo {
  ALANetConfig net;
  TrainConfig train;
  int iteration = 0;
  int optimizer_steps = 0;
  bool has_optimizer = false;
};

void save_checkpoint(const std::filesystem::path& path, ALANet& model, const TrainConfig& train,
                     int iteration, const Adam* optimizer = nullptr);

// Reads only the header.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

/// Restores parameters and batch-norm statistics into `model`, and the moment
/// estimates into `optimizer` when both are present. Throws ConfigError unless
/// the stored network config equals model.config(), IoError on a malformed file.
CheckpointInfo load_checkpoint(const std::filesystem::path& path, ALANet& model,
                               Adam* optimizer = nullptr);

// Builds a model from the stored config and loads it.
ALANet load_model(const std::filesystem::path& path);

}  // namespace alanet

#endif  // ALANET_CHECKPOINT_HPP_
