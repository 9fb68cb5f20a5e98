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


// Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. `acceptance 3 4` runs a subset.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "alanet/evaluation.hpp"
#include "alanet/geometry.hpp"
#include "alanet/ordinal.hpp"
#include "alanet/training.hpp"
#include "cli.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace alanet {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

cli::RunConfig shipped(const std::string& name) {
  return cli::load_run_config(fs::path(ALANET_SOURCE_DIR) / "configs" / name);
}

std::vector<ImageRecord> records_of(const SynthDataset& d) {
  std::vector<ImageRecord> out;
  for (std::size_t i = 0; i < d.manifest.entries.size(); ++i) out.push_back(d.record(i));
  return out;
}

Outcome ordinal_round_trip() {
  const auto t0 = Clock::now();
  int bad = 0;
  for (int y = 0; y < 240; ++y) {
    if (ordinal::decode_age(ordinal::encode_rank(y, 240)) != static_cast<double>(y)) ++bad;
  }
  const double s = seconds_since(t0);
  return {bad == 0 && s < 1.0, std::to_string(bad) + " mismatches over 240 ranks in " + fmt("%.4f s", s)};
}

Outcome gradient_oracles() {
  Rng rng(2024);
  const double eps = 1e-4;
  double worst_ord = 0.0, worst_patch = 0.0, worst_rpn = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> z(9);
    for (double& v : z) v = rng.normal(0, 2);
    const int y = rng.uniform_int(0, 9);
    worst_ord = std::max(worst_ord, oracle::max_relative_error(
        ordinal::loss_and_grad(z, y).grad,
        oracle::finite_difference([&](const std::vector<double>& x) { return ordinal::loss(x, y); }, z, eps)));
  }
  for (int trial = 0; trial < 20; ++trial) {
    const int rows = rng.uniform_int(1, 17);
    std::vector<double> z(static_cast<std::size_t>(rows) * 9);
    for (double& v : z) v = rng.normal(0, 2);
    const int y = rng.uniform_int(0, 9);
    worst_patch = std::max(worst_patch, oracle::max_relative_error(
        patch_loss_and_grad(z, rows, y).grad,
        oracle::finite_difference([&](const std::vector<double>& x) { return patch_loss(x, rows, y); }, z, eps)));
  }
  for (int trial = 0; trial < 20; ++trial) {
    RpnTargets t;
    for (int a = 0; a < 10; ++a) {
      const int r = rng.uniform_int(0, 2);
      t.labels.push_back(r == 0 || a == 0 ? AnchorLabel::kPositive : r == 1 ? AnchorLabel::kNegative : AnchorLabel::kIgnore);
      t.deltas.push_back({rng.normal(0, 0.5), rng.normal(0, 0.5), rng.normal(0, 0.5), rng.normal(0, 0.5)});
    }
    std::vector<double> x(50);
    for (double& v : x) v = rng.normal(0, 1);
    auto f = [&](const std::vector<double>& p) {
      return rpn_loss_and_grad(std::span(p).first(10), std::span(p).subspan(10), t).total;
    };
    RpnLossValue v = rpn_loss_and_grad(std::span(x).first(10), std::span(x).subspan(10), t);
    std::vector<double> g = v.grad_logits;
    g.insert(g.end(), v.grad_deltas.begin(), v.grad_deltas.end());
    worst_rpn = std::max(worst_rpn, oracle::max_relative_error(g, oracle::finite_difference(f, x, eps)));
  }
  const bool pass = worst_ord < 1e-3 && worst_patch < 1e-3 && worst_rpn < 1e-3;
  return {pass, "max rel err ordinal " + fmt("%.2e", worst_ord) + ", patch " + fmt("%.2e", worst_patch) +
                    ", rpn " + fmt("%.2e", worst_rpn) + " (20 trials each)"};
}

Outcome geometry_oracles() {
  Rng rng(77);
  double iou_err = 0.0, delta_err = 0.0, roi_err = 0.0;
  int nms_bad = 0;
  for (int t = 0; t < 100; ++t) {
    const Box a = testing::random_box(rng), b = testing::random_box(rng);
    iou_err = std::max(iou_err, std::abs(iou(a, b) - oracle::iou(a, b)));

    std::vector<Box> boxes;
    std::vector<double> scores;
    const int n = rng.uniform_int(2, 30);
    for (int i = 0; i < n; ++i) {
      boxes.push_back(testing::random_box(rng, 60, 5));
      scores.push_back(std::floor(rng.uniform() * 8) / 8);
    }
    const double thr = rng.uniform(0.1, 0.9);
    if (nms(boxes, scores, thr) != oracle::nms(boxes, scores, thr)) ++nms_bad;

    // Targets within the delta clamp so that decode inverts encode.
    const Box anchor = testing::random_box(rng, 200, 16);
    const double cx = (anchor.x1 + anchor.x2) / 2 + rng.uniform(-20, 20);
    const double cy = (anchor.y1 + anchor.y2) / 2 + rng.uniform(-20, 20);
    const double w = (anchor.x2 - anchor.x1) * rng.uniform(0.3, 3), h = (anchor.y2 - anchor.y1) * rng.uniform(0.3, 3);
    const Box target{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
    const std::vector<Box> anchors = {anchor};
    const std::vector<BoxDelta> deltas = {encode_delta(anchor, target)};
    const Box back = decode_deltas(anchors, deltas)[0];
    delta_err = std::max({delta_err, std::abs(back.x1 - target.x1), std::abs(back.y1 - target.y1),
                          std::abs(back.x2 - target.x2), std::abs(back.y2 - target.y2)});

    const int c = 2, fh = 5 + t % 4, fw = 6 + t % 3;
    Tensor f({c, fh, fw});
    for (double& v : f.values()) v = rng.uniform(-1, 1);
    const double x1 = rng.uniform(-8, fw * 4.0), y1 = rng.uniform(-8, fh * 4.0);
    const Box box{x1, y1, x1 + rng.uniform(1, 24), y1 + rng.uniform(1, 24)};
    const RoiAlignParams p{1 + t % 4, 1 + (t / 4) % 4, 0.25, 1 + t % 3};
    const Tensor out = roi_align(f, box, p);
    const auto ref = oracle::roi_align(f.storage(), c, fh, fw, box, p.out_h, p.out_w, p.spatial_scale, p.samples_per_bin);
    for (std::size_t i = 0; i < ref.size(); ++i) roi_err = std::max(roi_err, std::abs(out[i] - ref[i]));
  }
  const bool pass = iou_err < 1e-5 && nms_bad == 0 && delta_err < 1e-5 && roi_err < 1e-5;
  return {pass, "iou err " + fmt("%.1e", iou_err) + ", nms mismatches " + std::to_string(nms_bad) +
                    ", decode err " + fmt("%.1e", delta_err) + ", roi_align err " + fmt("%.1e", roi_err) +
                    " (100 instances)"};
}

Outcome ap_oracle() {
  Rng rng(5);
  int cases = 0, mismatches = 0, violations = 0;
  auto grid_box = [&]() {
    const double x = 2.0 * rng.uniform_int(0, 4), y = 2.0 * rng.uniform_int(0, 4);
    return Box{x, y, x + 2.0 * rng.uniform_int(1, 4), y + 2.0 * rng.uniform_int(1, 4)};
  };
  for (int trial = 0; trial < 1000; ++trial) {
    const int images = rng.uniform_int(1, 2);
    std::vector<std::vector<ScoredBox>> dets(images);
    std::vector<std::vector<Box>> gts(images);
    const int g = rng.uniform_int(1, 3), d = rng.uniform_int(0, 5);
    for (int i = 0; i < g; ++i) gts[rng.uniform_int(0, images - 1)].push_back(grid_box());
    for (int i = 0; i < d; ++i) dets[rng.uniform_int(0, images - 1)].push_back({grid_box(), 0.1 * rng.uniform_int(1, 5)});
    std::vector<oracle::Det> flat;
    for (int i = 0; i < images; ++i) {
      for (const auto& s : dets[i]) flat.push_back({i, s.box, s.score});
    }
    ++cases;
    for (double t : coco_thresholds()) {
      if (average_precision(dets, gts, t) != oracle::average_precision(flat, gts, t)) ++mismatches;
    }
    if (trial < 50) {
      double prev = 2.0;
      for (double t : coco_thresholds()) {
        const double ap = average_precision(dets, gts, t);
        if (ap > prev) ++violations;
        prev = ap;
      }
      const CocoMap m = coco_map(dets, gts);
      if (m.ap75 > m.ap50 || m.ap > m.ap50) ++violations;
    }
  }
  return {mismatches == 0 && violations == 0,
          std::to_string(mismatches) + " exact mismatches over " + std::to_string(cases) +
              " cases x 10 thresholds, " + std::to_string(violations) + " monotonicity violations in 50 cases"};
}

Outcome overfit_smoke() {
  const cli::RunConfig rc = shipped("overfit.json");
  const auto t0 = Clock::now();
  const auto recs = records_of(synth_generate(8, 7));
  Trainer trainer(rc.training, rc.network, recs);
  double first = 0.0, last = 0.0;
  while (!trainer.done()) {
    const IterationLog log = trainer.step();
    if (log.iteration == 0) first = log.loss.l_total;
    last = log.loss.l_total;
  }
  const EvalReport r = evaluate(trainer.model(), recs);
  const double s = seconds_since(t0);
  const bool pass = rc.training.iterations == 500 && rc.training.batch_size == 4 && recs.size() == 8 &&
                    rc.network.use_local_extraction && rc.network.use_patch_training && r.mae_months < 3.0 &&
                    last < 0.1 * first && s < 600.0;
  return {pass, "train MAE " + fmt("%.3f", r.mae_months) + " months, l_total " + fmt("%.4f", first) + " -> " +
                    fmt("%.4f", last) + " (" + fmt("%.1f%%", 100 * last / first) + "), " + fmt("%.0f s", s)};
}

Outcome detection_learnability() {
  const cli::RunConfig rc = shipped("detection.json");
  const auto t0 = Clock::now();
  Trainer trainer(rc.training, rc.network, records_of(synth_generate(64, 100)));
  while (!trainer.done()) trainer.step();
  const EvalReport r = evaluate(trainer.model(), records_of(synth_generate(16, 200)));
  const double ap50 = r.ap50.value_or(0.0);
  return {rc.training.iterations == 2000 && ap50 > 0.5,
          "held-out AP50 " + fmt("%.3f", ap50) + " (AP " + fmt("%.3f", r.ap.value_or(0.0)) + ") after " +
              std::to_string(rc.training.iterations) + " iterations, " + fmt("%.0f s", seconds_since(t0))};
}

Outcome ablation_structure() {
  const char* rows[] = {"row1_backbone.json", "row2_local_extraction.json", "row3_patch_training.json",
                        "row4_full.json"};
  std::ostringstream detail;
  bool pass = true;
  const auto recs = testing::synth_records(4, 3);
  for (int i = 0; i < 4; ++i) {
    const cli::RunConfig rc = shipped(rows[i]);
    // The shipped rows at desk scale: same toggles on the tiny network.
    ALANetConfig net = testing::tiny_config(rc.network.use_local_extraction, rc.network.use_patch_training);
    TrainConfig train = testing::quick_train(1, 2);
    train.patch_rois = rc.training.patch_rois;
    Trainer trainer(train, net, recs);
    std::vector<Tensor> before;
    for (const auto& p : trainer.model().parameters()) before.push_back(p.var.value());
    const IterationLog log = trainer.step();
    const bool terms_ok = log.loss.l_ord > 0 && (log.loss.l_rpn > 0) == net.use_local_extraction &&
                          (log.loss.l_ord_patch > 0) == net.use_patch_training;
    int frozen_moved = 0;
    std::set<ParamGroup> moved_groups;
    const auto& params = trainer.model().parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
      const bool moved = !(params[k].var.value() == before[k]);
      if (moved) moved_groups.insert(params[k].group);
      if (moved && !trainer.model().group_enabled(params[k].group)) ++frozen_moved;
    }
    bool enabled_moved = true;
    for (ParamGroup g : {ParamGroup::kBackbone, ParamGroup::kRpn, ParamGroup::kRoiHead, ParamGroup::kGender,
                         ParamGroup::kFusion, ParamGroup::kPatchHead}) {
      if (trainer.model().group_enabled(g) && !moved_groups.count(g)) enabled_moved = false;
    }
    bool annotations_ok = true;
    if (!net.use_local_extraction && net.use_patch_training) {
      NetworkInput input = collate(trainer.samples()).input;
      const bool had = input.annotated_boxes.size() == recs.size();
      input.annotated_boxes.clear();
      bool threw = false;
      try {
        trainer.model().forward(input);
      } catch (const std::exception&) {
        threw = true;
      }
      annotations_ok = had && threw;
    }
    const bool row_ok = terms_ok && frozen_moved == 0 && enabled_moved && annotations_ok;
    pass &= row_ok;
    detail << (i ? "; " : "") << "row" << i + 1 << (row_ok ? " ok" : " BAD") << " [ord " << (log.loss.l_ord > 0)
           << " patch " << (log.loss.l_ord_patch > 0) << " rpn " << (log.loss.l_rpn > 0) << ", frozen moved "
           << frozen_moved << "]";
  }
  return {pass, detail.str()};
}

Outcome determinism() {
  const fs::path dir = testing::scratch_dir("acceptance_determinism");
  const SynthDataset d = synth_generate(8, 11);
  write_synth_dataset(d, dir / "data");
  TrainConfig train = testing::quick_train(10, 4);
  train.augment = true;
  train.seed = 42;
  ALANetConfig net = testing::tiny_config();
  net.init_seed = 42;
  std::string logs[2];
  for (int run = 0; run < 2; ++run) {
    const TrainingRun r = run_training(train, net, d.manifest, dir / "data", dir / ("run" + std::to_string(run)));
    std::ifstream in(r.metrics_log, std::ios::binary);
    logs[run].assign(std::istreambuf_iterator<char>(in), {});
  }
  const auto lines = std::count(logs[0].begin(), logs[0].end(), '\n');
  return {lines == 10 && logs[0] == logs[1],
          std::to_string(lines) + " log lines, runs " + (logs[0] == logs[1] ? "bit-identical" : "differ")};
}

Outcome schedule() {
  const TrainConfig c = shipped("row4_full.json").training;
  const double a = lr_at(0, c), b = lr_at(35000, c), e = lr_at(45000, c);
  return {a == 0.001 && b == 0.0001 && e == 0.00001,
          "lr " + fmt("%g", a) + " / " + fmt("%g", b) + " / " + fmt("%g", e) + " at 0 / 35000 / 45000"};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace alanet

int main(int argc, char** argv) {
  using namespace alanet;
  const std::vector<Criterion> criteria = {
      {1, "ordinal round trip", ordinal_round_trip},
      {2, "gradient oracles", gradient_oracles},
      {3, "geometry oracles", geometry_oracles},
      {4, "AP oracle", ap_oracle},
      {5, "overfit smoke", overfit_smoke},
      {6, "detection learnability", detection_learnability},
      {7, "ablation structure", ablation_structure},
      {8, "determinism", determinism},
      {9, "schedule", schedule},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
