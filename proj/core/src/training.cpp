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


#include "alanet/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "alanet/checkpoint.hpp"
#include "alanet/error.hpp"

namespace alanet {

namespace {

// Independent random streams per purpose; mixed into Rng::derive's stream id.
constexpr std::uint64_t kEpochStream = 0x1ull << 40;
constexpr std::uint64_t kAugmentStream = 0x2ull << 40;
constexpr std::uint64_t kSamplingStream = 0x3ull << 40;

double smooth_l1_grad(double x, double beta) {
  if (std::abs(x) < beta) return x / beta;
  return x > 0 ? 1.0 : -1.0;
}

}  // namespace

std::string patch_roi_source_name(PatchRoiSource source) {
  switch (source) {
    case PatchRoiSource::kAuto: return "auto";
    case PatchRoiSource::kProposals: return "proposals";
    case PatchRoiSource::kAnnotations: return "annotations";
  }
  return "auto";
}

PatchRoiSource parse_patch_roi_source(const std::string& name) {
  if (name == "auto") return PatchRoiSource::kAuto;
  if (name == "proposals") return PatchRoiSource::kProposals;
  if (name == "annotations") return PatchRoiSource::kAnnotations;
  throw ConfigError("unknown patch_rois value '" + name + "' (auto, proposals, annotations)");
}

void TrainConfig::validate() const {
  if (iterations <= 0) throw ConfigError("training.iterations must be positive");
  if (batch_size <= 0) throw ConfigError("training.batch_size must be positive");
  if (!(lr > 0.0)) throw ConfigError("training.lr must be positive");
  for (std::size_t i = 0; i < lr_decay_steps.size(); ++i) {
    if (lr_decay_steps[i] <= 0) throw ConfigError("training.lr_decay_steps must be positive");
    if (i > 0 && lr_decay_steps[i] <= lr_decay_steps[i - 1]) {
      throw ConfigError("training.lr_decay_steps must be strictly increasing");
    }
    if (lr_decay_steps[i] >= iterations) {
      throw ConfigError("training.lr_decay_steps must be below training.iterations");
    }
  }
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) {
    throw ConfigError("training.lr_decay_factor must be in (0, 1]");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("training.adam_betas must be in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("training.adam_eps must be positive");
  if (weight_decay < 0.0) throw ConfigError("training.weight_decay must be nonnegative");
  if (ord_weight < 0.0 || patch_weight < 0.0 || rpn_weight < 0.0) {
    throw ConfigError("training.loss_weights must be nonnegative");
  }
  if (!(augmentation.hflip_probability >= 0.0 && augmentation.hflip_probability <= 1.0)) {
    throw ConfigError("training.augmentation.hflip_probability must be in [0, 1]");
  }
  if (!(augmentation.scale_min > 0.0 && augmentation.scale_min <= augmentation.scale_max)) {
    throw ConfigError("training.augmentation.scale_range must satisfy 0 < min <= max");
  }
  if (checkpoint_every <= 0) throw ConfigError("training.checkpoint_every must be positive");
}

void TrainConfig::validate_against(const ALANetConfig& net) const {
  validate();
  net.validate();
  if (patch_rois == PatchRoiSource::kProposals && !net.use_local_extraction) {
    throw ConfigError(
        "patch_rois = proposals needs use_local_extraction = true; without local extraction "
        "patch training runs on annotated boxes");
  }
  if (patch_rois == PatchRoiSource::kAnnotations && net.use_local_extraction) {
    throw ConfigError(
        "patch_rois = annotations contradicts use_local_extraction = true; with local "
        "extraction patch training runs on the detected proposals");
  }
  if (patch_rois != PatchRoiSource::kAuto && !net.use_patch_training) {
    throw ConfigError("patch_rois is set but use_patch_training = false");
  }
  if ((net.use_local_extraction || net.use_patch_training) && net.num_rois != kNumKeypoints) {
    throw ConfigError("training supervises one ROI per keypoint; num_rois must be " +
                      std::to_string(kNumKeypoints));
  }
}

double lr_at(int iteration, const TrainConfig& config) {
  double lr = config.lr;
  for (int step : config.lr_decay_steps) {
    if (iteration >= step) lr *= config.lr_decay_factor;
  }
  return lr;
}

double smooth_l1(double x, double beta) {
  const double a = std::abs(x);
  return a < beta ? 0.5 * x * x / beta : a - 0.5 * beta;
}

RpnLossValue rpn_loss_and_grad(std::span<const double> logits, std::span<const double> deltas,
                               const RpnTargets& targets) {
  const std::size_t m = logits.size();
  if (targets.labels.size() != m || deltas.size() != 4 * m || targets.deltas.size() != m) {
    throw InvalidInput("rpn_loss: logits, deltas and targets disagree in anchor count");
  }
  RpnLossValue out;
  out.grad_logits.assign(m, 0.0);
  out.grad_deltas.assign(4 * m, 0.0);
  std::size_t sampled = 0;
  std::size_t positives = 0;
  for (std::size_t a = 0; a < m; ++a) {
    if (targets.labels[a] == AnchorLabel::kIgnore) continue;
    ++sampled;
    if (targets.labels[a] == AnchorLabel::kPositive) ++positives;
  }
  if (sampled > 0) {
    const double inv = 1.0 / static_cast<double>(sampled);
    for (std::size_t a = 0; a < m; ++a) {
      if (targets.labels[a] == AnchorLabel::kIgnore) continue;
      const double t = targets.labels[a] == AnchorLabel::kPositive ? 1.0 : 0.0;
      out.classification += ordinal::bce_with_logits(logits[a], t);
      out.grad_logits[a] = (ordinal::sigmoid(logits[a]) - t) * inv;
    }
    out.classification *= inv;
  }
  if (positives > 0) {
    const double inv = 1.0 / static_cast<double>(positives);
    for (std::size_t a = 0; a < m; ++a) {
      if (targets.labels[a] != AnchorLabel::kPositive) continue;
      const BoxDelta& t = targets.deltas[a];
      const double tv[4] = {t.dx, t.dy, t.dw, t.dh};
      for (int q = 0; q < 4; ++q) {
        const double diff = deltas[4 * a + q] - tv[q];
        out.regression += smooth_l1(diff);
        out.grad_deltas[4 * a + q] = smooth_l1_grad(diff, kSmoothL1Beta) * inv;
      }
    }
    out.regression *= inv;
  }
  out.total = out.classification + out.regression;
  return out;
}

ag::Var rpn_loss(const ag::Var& logits, const ag::Var& deltas, std::span<const RpnTargets> targets) {
  const Tensor& lv = logits.value();
  const Tensor& dv = deltas.value();
  if (lv.rank() != 2 || dv.rank() != 3 || dv.dim(2) != 4 || dv.dim(0) != lv.dim(0) ||
      dv.dim(1) != lv.dim(1)) {
    throw InvalidInput("rpn_loss: expected logits N x M and deltas N x M x 4");
  }
  const int n = lv.dim(0);
  const std::size_t m = static_cast<std::size_t>(lv.dim(1));
  if (static_cast<int>(targets.size()) != n) throw InvalidInput("rpn_loss: one target set per image");
  auto grads = std::make_shared<std::vector<RpnLossValue>>();
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    grads->push_back(rpn_loss_and_grad(std::span<const double>(lv.data() + i * m, m),
                                       std::span<const double>(dv.data() + i * m * 4, m * 4),
                                       targets[i]));
    total += grads->back().total;
  }
  total /= n;
  return ag::make_op(Tensor({1}, total), {logits, deltas}, [grads, n, m](ag::Node& node) {
    const double g = node.grad[0] / n;
    ag::Node& ln = *node.inputs[0];
    ag::Node& dn = *node.inputs[1];
    if (ln.requires_grad) {
      Tensor& gl = ln.grad_buffer();
      for (int i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < m; ++a) gl[i * m + a] += g * (*grads)[i].grad_logits[a];
      }
    }
    if (dn.requires_grad) {
      Tensor& gd = dn.grad_buffer();
      for (int i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < 4 * m; ++a) gd[i * m * 4 + a] += g * (*grads)[i].grad_deltas[a];
      }
    }
  });
}

ordinal::LossWithGrad patch_loss_and_grad(std::span<const double> logits, int rows, int age) {
  if (rows <= 0 || logits.size() % static_cast<std::size_t>(rows) != 0) {
    throw InvalidInput("patch_loss: logits size is not a multiple of the row count");
  }
  const std::size_t width = logits.size() / rows;
  ordinal::LossWithGrad out;
  out.grad.resize(logits.size());
  for (int r = 0; r < rows; ++r) {
    ordinal::LossWithGrad row = ordinal::loss_and_grad(logits.subspan(r * width, width), age);
    out.value += row.value;
    for (std::size_t k = 0; k < width; ++k) out.grad[r * width + k] = row.grad[k] / rows;
  }
  out.value /= rows;
  return out;
}

double patch_loss(std::span<const double> logits, int rows, int age) {
  return patch_loss_and_grad(logits, rows, age).value;
}

ag::Var patch_loss(const ag::Var& patch_logits, std::span<const int> ages, int num_rois) {
  const Shape& s = patch_logits.shape();
  if (s.size() != 2 || s[0] != static_cast<int>(ages.size()) * num_rois) {
    throw InvalidInput("patch_loss: expected (N * num_rois) x (K-1) logits");
  }
  std::vector<int> targets;
  targets.reserve(s[0]);
  for (int age : ages) targets.insert(targets.end(), num_rois, age);
  // Equal ROI counts per image make the per-image mean of means the row mean.
  return ag::ordinal_loss(patch_logits, targets);
}

LossTerms total_loss(const NetworkOutputs& outputs, const TrainingBatch& batch,
                     const ALANetConfig& net, const TrainConfig& train, Rng& sampling_rng,
                     const std::vector<RpnTargets>* rpn_targets) {
  const int n = static_cast<int>(batch.ages.size());
  LossTerms terms;
  ag::Var l_ord = ag::ordinal_loss(outputs.age_logits, batch.ages);
  terms.breakdown.l_ord = l_ord.value()[0];
  ag::Var total = ag::scale(l_ord, train.ord_weight);

  if (net.use_patch_training) {
    if (!outputs.patch_logits) throw InvalidInput("total_loss: patch training needs training-mode outputs");
    ag::Var l_patch = patch_loss(outputs.patch_logits, batch.ages, net.num_rois);
    terms.breakdown.l_ord_patch = l_patch.value()[0];
    total = ag::add(total, ag::scale(l_patch, train.patch_weight));
  }

  if (net.use_local_extraction) {
    if (rpn_targets) {
      terms.rpn_targets = *rpn_targets;
    } else {
      if (static_cast<int>(batch.gt_boxes.size()) != n) {
        throw InvalidInput("total_loss: one gt box set per image");
      }
      const RpnSampling sampling{net.rpn_anchors_per_image, net.rpn_positive_fraction};
      for (int i = 0; i < n; ++i) {
        RpnTargets t = assign_rpn_targets(outputs.anchors.anchors, batch.gt_boxes[i],
                                          net.rpn_pos_iou, net.rpn_neg_iou);
        sample_rpn_targets(t, sampling, sampling_rng);
        terms.rpn_targets.push_back(std::move(t));
      }
    }
    ag::Var l_rpn = rpn_loss(outputs.rpn_logits, outputs.rpn_deltas, terms.rpn_targets);
    terms.breakdown.l_rpn = l_rpn.value()[0];
    total = ag::add(total, ag::scale(l_rpn, train.rpn_weight));
  }

  terms.breakdown.l_total = total.value()[0];
  terms.total = total;
  return terms;
}

Adam::Adam(std::vector<ag::Var> params, double beta1, double beta2, double eps, double weight_decay)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {
  for (const ag::Var& p : params_) {
    m_.push_back(Tensor::zeros_like(p.value()));
    v_.push_back(Tensor::zeros_like(p.value()));
  }
}

void Adam::step(double lr) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, steps_);
  const double c2 = 1.0 - std::pow(beta2_, steps_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Tensor& g = params_[i].grad();
    if (g.numel() == 0) continue;  // untouched this step
    Tensor& w = params_[i].mutable_value();
    double* m = m_[i].data();
    double* v = v_[i].data();
    for (std::size_t k = 0; k < w.numel(); ++k) {
      const double gk = g[k] + weight_decay_ * w[k];
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * gk;
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * gk * gk;
      w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (ag::Var& p : params_) p.zero_grad();
}

PreparedSample prepare_sample(const ImageRecord& record, const ALANetConfig& net) {
  ResizedSample r = resize_keep_aspect(record.image, record.keypoints, net.input_long_side);
  PreparedSample s;
  s.boxes = keypoints_to_boxes(r.keypoints, net.roi_box_size, r.image.width, r.image.height);
  s.image = std::move(r.image);
  s.age_months = record.age_months;
  s.gender = record.gender;
  s.scale = r.scale;
  return s;
}

TrainingBatch collate(std::span<const PreparedSample> samples) {
  if (samples.empty()) throw InvalidInput("collate: empty batch");
  int h = 0;
  int w = 0;
  for (const PreparedSample& s : samples) {
    h = std::max(h, s.image.height);
    w = std::max(w, s.image.width);
  }
  const int n = static_cast<int>(samples.size());
  TrainingBatch batch;
  batch.input.images = Tensor({n, 1, h, w}, 0.0);
  double* dst = batch.input.images.data();
  for (int i = 0; i < n; ++i) {
    const PreparedSample& s = samples[i];
    for (int r = 0; r < s.image.height; ++r) {
      std::copy_n(s.image.pixels.data() + static_cast<std::size_t>(r) * s.image.width, s.image.width,
                  dst + (static_cast<std::size_t>(i) * h + r) * w);
    }
    batch.input.genders.push_back(encode_gender(s.gender));
    batch.input.sizes.emplace_back(s.image.height, s.image.width);
    batch.input.annotated_boxes.push_back(s.boxes);
    batch.ages.push_back(s.age_months);
    batch.gt_boxes.push_back(s.boxes);
  }
  return batch;
}

std::string format_log_record(const IterationLog& log) {
  nlohmann::json j = {{"iteration", log.iteration},     {"lr", log.lr},
                      {"l_ord", log.loss.l_ord},         {"l_ord_patch", log.loss.l_ord_patch},
                      {"l_rpn", log.loss.l_rpn},         {"l_total", log.loss.l_total}};
  return j.dump();
}

IterationLog parse_log_record(const std::string& line) {
  try {
    const nlohmann::json j = nlohmann::json::parse(line);
    IterationLog log;
    log.iteration = j.at("iteration").get<int>();
    log.lr = j.at("lr").get<double>();
    log.loss.l_ord = j.at("l_ord").get<double>();
    log.loss.l_ord_patch = j.at("l_ord_patch").get<double>();
    log.loss.l_rpn = j.at("l_rpn").get<double>();
    log.loss.l_total = j.at("l_total").get<double>();
    return log;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad metrics record: ") + e.what());
  }
}

Trainer::Trainer(TrainConfig train, ALANetConfig net, std::vector<ImageRecord> records)
    : Trainer(std::move(train), (net.validate(), ALANet(net)), std::move(records)) {}

Trainer::Trainer(TrainConfig train, ALANet model, std::vector<ImageRecord> records)
    : train_(std::move(train)),
      model_(std::move(model)),
      optimizer_(model_.trainable_parameters(), train_.adam_beta1, train_.adam_beta2, train_.adam_eps,
                 train_.weight_decay) {
  train_.validate_against(model_.config());
  init_samples(std::move(records));
}

void Trainer::init_samples(std::vector<ImageRecord> records) {
  if (records.empty()) throw InvalidInput("training needs at least one record");
  samples_.reserve(records.size());
  for (const ImageRecord& r : records) {
    if (r.age_months < 0 || r.age_months >= model_.config().num_ranks) {
      throw ConfigError("record age " + std::to_string(r.age_months) + " is outside [0, " +
                        std::to_string(model_.config().num_ranks) + ")");
    }
    r.validate(model_.config().num_ranks);
    samples_.push_back(prepare_sample(r, model_.config()));
  }
}

std::vector<std::size_t> Trainer::batch_indices(int iteration) const {
  // Position p of the sample stream lives in epoch p / N; every epoch is an
  // independent permutation, so any batch is computable without history.
  const std::size_t n = samples_.size();
  const std::size_t b = static_cast<std::size_t>(train_.batch_size);
  std::vector<std::size_t> out;
  out.reserve(b);
  std::size_t cached_epoch = static_cast<std::size_t>(-1);
  std::vector<std::size_t> perm;
  for (std::size_t j = 0; j < b; ++j) {
    const std::size_t p = static_cast<std::size_t>(iteration) * b + j;
    const std::size_t epoch = p / n;
    if (epoch != cached_epoch) {
      perm.resize(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      Rng rng = Rng::derive(train_.seed, kEpochStream + epoch);
      rng.shuffle(perm);
      cached_epoch = epoch;
    }
    out.push_back(perm[p % n]);
  }
  return out;
}

IterationLog Trainer::step() {
  const int it = iteration_;
  std::vector<PreparedSample> batch_samples;
  Rng aug_rng = Rng::derive(train_.seed, kAugmentStream + static_cast<std::uint64_t>(it));
  for (std::size_t idx : batch_indices(it)) {
    const PreparedSample& s = samples_[idx];
    if (!train_.augment) {
      batch_samples.push_back(s);
      continue;
    }
    const bool flip = aug_rng.bernoulli(train_.augmentation.hflip_probability);
    const double scale = aug_rng.uniform(train_.augmentation.scale_min, train_.augmentation.scale_max);
    AugmentedSample a = augment(s.image, s.boxes, flip, scale);
    PreparedSample t = s;
    t.image = std::move(a.image);
    t.boxes = std::move(a.boxes);
    batch_samples.push_back(std::move(t));
  }
  TrainingBatch batch = collate(batch_samples);

  model_.set_training(true);
  NetworkOutputs outputs = model_.forward(batch.input);
  Rng sampling_rng = Rng::derive(train_.seed, kSamplingStream + static_cast<std::uint64_t>(it));
  LossTerms terms = total_loss(outputs, batch, model_.config(), train_, sampling_rng);

  optimizer_.zero_grad();
  model_.zero_grad();
  ag::backward(terms.total);
  const double lr = lr_at(it, train_);
  optimizer_.step(lr);
  ++iteration_;
  return IterationLog{it, lr, terms.breakdown};
}

TrainingRun run_training(const TrainConfig& train, const ALANetConfig& net,
                         const DatasetManifest& manifest, const std::filesystem::path& manifest_dir,
                         const std::filesystem::path& out_dir,
                         const std::optional<std::filesystem::path>& resume,
                         const std::function<void(const IterationLog&)>& on_iteration) {
  train.validate_against(net);
  manifest.validate(net.num_ranks);
  std::vector<ImageRecord> records;
  records.reserve(manifest.entries.size());
  for (const ManifestEntry& e : manifest.entries) records.push_back(load_record(e, manifest_dir));

  Trainer trainer(train, net, std::move(records));
  if (resume) {
    CheckpointInfo info = load_checkpoint(*resume, trainer.model(), &trainer.optimizer());
    trainer.set_iteration(info.iteration);
  }

  std::filesystem::create_directories(out_dir);
  TrainingRun run;
  run.metrics_log = out_dir / "metrics.jsonl";
  std::ofstream metrics(run.metrics_log, resume ? std::ios::app : std::ios::trunc);
  if (!metrics) throw IoError("cannot write " + run.metrics_log.string());

  auto checkpoint = [&](int iteration) {
    const std::filesystem::path p = out_dir / ("ckpt_" + std::to_string(iteration) + ".bin");
    save_checkpoint(p, trainer.model(), train, iteration, &trainer.optimizer());
    return p;
  };

  std::filesystem::path last;
  int last_saved = -1;
  while (!trainer.done()) {
    IterationLog log = trainer.step();
    metrics << format_log_record(log) << '\n';
    metrics.flush();
    run.log.push_back(log);
    if (on_iteration) on_iteration(log);
    if (trainer.iteration() % train.checkpoint_every == 0) {
      last = checkpoint(trainer.iteration());
      last_saved = trainer.iteration();
    }
  }
  if (last_saved != trainer.iteration()) last = checkpoint(trainer.iteration());
  run.final_checkpoint = out_dir / "final.bin";
  std::filesystem::copy_file(last, run.final_checkpoint,
                             std::filesystem::copy_options::overwrite_existing);
  return run;
}

}  // namespace alanet
