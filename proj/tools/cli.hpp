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


#ifndef ALANET_TOOLS_CLI_HPP_
#define ALANET_TOOLS_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "alanet/data_pipeline.hpp"
#include "alanet/evaluation.hpp"
#include "alanet/network.hpp"
#include "alanet/training.hpp"

namespace alanet::cli {

struct RunPaths {
  std::string manifest;
  std::string output_dir;
  std::string checkpoint;

  bool operator==(const RunPaths&) const = default;
};

/// Everything a training or evaluation run needs. Serialized as JSON with
/// optional comments and three sections: "network", "training", "paths".
/// Relative paths are taken relative to the working directory.
struct RunConfig {
  ALANetConfig network;
  TrainConfig training;
  RunPaths paths;

  bool operator==(const RunConfig&) const = default;
};

// Throws ConfigError on unknown keys or bad values, IoError if unreadable.
RunConfig parse_run_config(const std::string& text, const std::string& origin = "config");
RunConfig load_run_config(const std::filesystem::path& path);
std::string format_run_config(const RunConfig& config);

struct SynthOptions {
  int n = 8;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  int image_size = 256;
};

// Writes manifest.tsv and images/ under out_dir; returns the manifest path.
std::filesystem::path cmd_synth(const SynthOptions& options);

struct TrainOptions {
  RunConfig config;
  std::optional<std::filesystem::path> resume;
};

TrainingRun cmd_train(const TrainOptions& options, std::ostream& out);

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path manifest;
  std::filesystem::path report;  // written as JSON
  std::optional<std::filesystem::path> render_dir;
};

EvalReport cmd_eval(const EvalOptions& options, std::ostream& out);

struct PredictOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path image;
  Gender gender = Gender::kFemale;
  std::optional<std::filesystem::path> render;
};

Prediction cmd_predict(const PredictOptions& options, std::ostream& out);

/// Full command line entry point: parses arguments, dispatches, and maps
/// every failure to a nonzero exit code with a one-line diagnostic on `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace alanet::cli

#endif  // ALANET_TOOLS_CLI_HPP_
