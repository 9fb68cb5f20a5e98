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

#ifndef ALANET_TRAINING_HPP_
#define ALANET_TRAINING_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alanet/autograd.hpp"
#include "alanet/data_pipeline.hpp"
#include "alanet/geometry.hpp"
#include "alanet/network.hpp"
#include "alanet/ordinal.hpp"

namespace alanet {

// Which boxes feed the patch-training head. kAuto uses proposals when local
// extraction is on and annotated boxes otherwise; the explicit values only
// assert that choice and are rejected when they contradict the toggles.
enum class PatchRoiSource { kAuto, kProposals, kAnnotations };

std::string patch_roi_source_name(PatchRoiSource source);
PatchRoiSource parse_patch_roi_source(const std::string& name);

/// Optimization schedule and loss composition. The ablation toggles live in
/// ALANetConfig.
struct TrainConfig {
  int iterations = 50000;
  int batch_size = 32;
  double lr = 0.001;
  std::vector<int> lr_decay_steps = {30000, 40000};
  double lr_decay_factor = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  bool augment = true;
  AugmentConfig augmentation;
  double ord_weight = 1.0;
  double patch_weight = 1.0;
  double rpn_weight = 1.0;
  PatchRoiSource patch_rois = PatchRoiSource::kAuto;
  int checkpoint_every = 1000;

  // Throws ConfigError.
  void validate() const;
  // Cross-checks against the network toggles. Throws ConfigError.
  void validate_against(const ALANetConfig& net) const;

  bool operator==(const TrainConfig&) const = default;
};

/// Piecewise-constant step schedule: lr * factor^(number of decay steps <= iteration).
double lr_at(int iteration, const TrainConfig& config);

struct LossBreakdown {
  double l_ord = 0.0;
  double l_ord_patch = 0.0;
  double l_rpn = 0.0;
  double l_total = 0.0;
};

inline constexpr double kSmoothL1Beta = 1.0 / 9.0;

double smooth_l1(double x, double beta = kSmoothL1Beta);

struct RpnLossValue {
  double classification = 0.0;
  double regression = 0.0;
  double total = 0.0;
  std::vector<double> grad_logits;  // M
  std::vector<double> grad_deltas;  // M x 4
};

/// Single-image RPN loss: mean BCE over sampled (non-ignored) anchors plus
/// smooth-L1 over positive anchors' deltas divided by the positive count. The
/// regression term is zero when no anchor is positive.
RpnLossValue rpn_loss_and_grad(std::span<const double> logits, std::span<const double> deltas,
                               const RpnTargets& targets);

// Batch mean of the per-image RPN loss. logits: N x M, deltas: N x M x 4.
ag::Var rpn_loss(const ag::Var& logits, const ag::Var& deltas, std::span<const RpnTargets> targets);

/// Mean over ROIs of the ordinal loss, every ROI supervised with the image
/// age. `logits` is rows x (K-1) row-major.
ordinal::LossWithGrad patch_loss_and_grad(std::span<const double> logits, int rows, int age);
double patch_loss(std::span<const double> logits, int rows, int age);

// Batched: patch_logits is (N * num_rois) x (K-1).
ag::Var patch_loss(const ag::Var& patch_logits, std::span<const int> ages, int num_rois);

/// A training batch: network input plus supervision.
struct TrainingBatch {
  NetworkInput input;
  std::vector<int> ages;
  std::vector<std::vector<Box>> gt_boxes;
};

struct LossTerms {
  ag::Var total;
  LossBreakdown breakdown;
  std::vector<RpnTargets> rpn_targets;
};

/// Composes the enabled terms, l_total = w_ord*l_ord + w_patch*l_patch +
/// w_rpn*l_rpn. Disabled terms are reported as 0. `rpn_targets`, when given,
/// replaces target assignment (used to hold sampling fixed across calls).
LossTerms total_loss(const NetworkOutputs& outputs, const TrainingBatch& batch,
                     const ALANetConfig& net, const TrainConfig& train, Rng& sampling_rng,
                     const std::vector<RpnTargets>* rpn_targets = nullptr);

/// Adam with bias correction; weight_decay adds an L2 term to the gradient.
class Adam {
 public:
  Adam(std::vector<ag::Var> params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
       double weight_decay = 0.0);

  void step(double lr);
  void zero_grad();

  int steps() const { return steps_; }
  void set_steps(int steps) { steps_ = steps; }
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<ag::Var>& params() const { return params_; }

 private:
  std::vector<ag::Var> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  double beta1_, beta2_, eps_, weight_decay_;
  int steps_ = 0;
};

/// A record after resizing: image at the network's input scale and its
/// keypoint-derived ROI boxes.
struct PreparedSample {
  Image image;
  std::vector<Box> boxes;
  int age_months = 0;
  Gender gender = Gender::kFemale;
  double scale = 1.0;
};

PreparedSample prepare_sample(const ImageRecord& record, const ALANetConfig& net);

// Pads images to the largest height/width in the batch (zeros at the
// bottom/right).
TrainingBatch collate(std::span<const PreparedSample> samples);

struct IterationLog {
  int iteration = 0;
  double lr = 0.0;
  LossBreakdown loss;
};

// One JSON object per line: iteration, lr, l_ord, l_ord_patch, l_rpn, l_total.
std::string format_log_record(const IterationLog& log);
IterationLog parse_log_record(const std::string& line);

class Trainer {
 public:
  Trainer(TrainConfig train, ALANetConfig net, std::vector<ImageRecord> records);
  // Continues from an existing model (e.g. a resumed checkpoint).
  Trainer(TrainConfig train, ALANet model, std::vector<ImageRecord> records);

  // Runs one optimization step and returns its log entry.
  IterationLog step();

  int iteration() const { return iteration_; }
  void set_iteration(int iteration) { iteration_ = iteration; }
  bool done() const { return iteration_ >= train_.iterations; }

  ALANet& model() { return model_; }
  Adam& optimizer() { return optimizer_; }
  const TrainConfig& train_config() const { return train_; }
  const std::vector<PreparedSample>& samples() const { return samples_; }

  // Indices of the samples in the batch for `iteration`.
  std::vector<std::size_t> batch_indices(int iteration) const;

 private:
  void init_samples(std::vector<ImageRecord> records);

  TrainConfig train_;
  ALANet model_;
  Adam optimizer_;
  std::vector<PreparedSample> samples_;
  int iteration_ = 0;
};

struct TrainingRun {
  std::vector<IterationLog> log;
  std::filesystem::path final_checkpoint;
  std::filesystem::path metrics_log;
};

/// Trains on a manifest and writes `metrics.jsonl` plus `ckpt_<iter>.bin`
/// checkpoints (every checkpoint_every iterations and at the end, the last
/// one also copied to `final.bin`) under `out_dir`. With `resume`, model,
/// optimizer state and iteration counter are restored first.
TrainingRun run_training(const TrainConfig& train, const ALANetConfig& net,
                         const DatasetManifest& manifest, const std::filesystem::path& manifest_dir,
                         const std::filesystem::path& out_dir,
                         const std::optional<std::filesystem::path>& resume = std::nullopt,
                         const std::function<void(const IterationLog&)>& on_iteration = {});

}  // namespace alanet

#endif  // ALANET_TRAINING_HPP_
