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


#include "cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "alanet/checkpoint.hpp"
#include "alanet/config_io.hpp"
#include "alanet/error.hpp"

namespace alanet::cli {

namespace {

using nlohmann::json;

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void read_paths(const json& j, RunPaths& p) {
  if (!j.is_object()) throw ConfigError("paths: expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::string* slot = nullptr;
    if (it.key() == "manifest") slot = &p.manifest;
    if (it.key() == "output_dir") slot = &p.output_dir;
    if (it.key() == "checkpoint") slot = &p.checkpoint;
    if (!slot) throw ConfigError("paths: unknown key '" + it.key() + "'");
    if (!it->is_string()) throw ConfigError("paths: key '" + it.key() + "' must be a string");
    *slot = it->get<std::string>();
  }
}

std::filesystem::path manifest_dir(const std::filesystem::path& manifest) {
  return manifest.has_parent_path() ? manifest.parent_path() : std::filesystem::path(".");
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  const json j = parse_json_with_comments(text, origin);
  if (!j.is_object()) throw ConfigError(origin + ": top level must be an object");
  RunConfig c;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() == "network") {
        from_json(*it, c.network);
      } else if (it.key() == "training") {
        from_json(*it, c.training);
      } else if (it.key() == "paths") {
        read_paths(*it, c.paths);
      } else {
        throw ConfigError("unknown section '" + it.key() + "' (network, training, paths)");
      }
    }
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text(path), path.string());
}

std::string format_run_config(const RunConfig& config) {
  json j;
  j["network"] = config.network;
  j["training"] = config.training;
  j["paths"] = {{"manifest", config.paths.manifest},
                {"output_dir", config.paths.output_dir},
                {"checkpoint", config.paths.checkpoint}};
  return j.dump(2) + "\n";
}

std::filesystem::path cmd_synth(const SynthOptions& options) {
  if (options.n <= 0) throw InvalidInput("synth: --n must be positive");
  if (options.out_dir.empty()) throw InvalidInput("synth: --out is required");
  SynthConfig cfg;
  cfg.image_size = options.image_size;
  SynthDataset data = synth_generate(options.n, options.seed, cfg);
  data.manifest.validate(ordinal::kDefaultRanks);
  write_synth_dataset(data, options.out_dir);
  return options.out_dir / "manifest.tsv";
}

TrainingRun cmd_train(const TrainOptions& options, std::ostream& out) {
  const RunConfig& c = options.config;
  if (c.paths.manifest.empty()) throw ConfigError("train: paths.manifest is not set");
  if (c.paths.output_dir.empty()) throw ConfigError("train: paths.output_dir is not set");
  c.training.validate_against(c.network);
  const std::filesystem::path manifest_path = c.paths.manifest;
  DatasetManifest manifest = read_manifest(manifest_path);
  const std::filesystem::path out_dir = c.paths.output_dir;
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream cfg(out_dir / "run_config.json");
    cfg << format_run_config(c);
  }
  const int every = std::max(1, c.training.iterations / 20);
  TrainingRun run = run_training(
      c.training, c.network, manifest, manifest_dir(manifest_path), out_dir, options.resume,
      [&](const IterationLog& log) {
        if (log.iteration % every == 0 || log.iteration + 1 == c.training.iterations) {
          out << format_log_record(log) << '\n';
        }
      });
  out << "checkpoint " << run.final_checkpoint.string() << '\n';
  return run;
}

EvalReport cmd_eval(const EvalOptions& options, std::ostream& out) {
  if (options.checkpoint.empty()) throw InvalidInput("eval: --checkpoint is required");
  if (options.manifest.empty()) throw InvalidInput("eval: --manifest is required");
  DatasetManifest manifest = read_manifest(options.manifest);
  const std::filesystem::path base = manifest_dir(options.manifest);
  EvalReport report = evaluate(options.checkpoint, manifest, base);
  if (!options.report.empty()) write_report(options.report, report);
  if (options.render_dir) {
    const ALANetConfig net = read_checkpoint_info(options.checkpoint).net;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
      const ImageRecord rec = load_record(manifest.entries[i], base);
      const PreparedSample prepared = prepare_sample(rec, net);
      std::vector<Box> gts;
      for (const Box& b : prepared.boxes) {
        const double inv = 1.0 / prepared.scale;
        gts.push_back(Box{b.x1 * inv, b.y1 * inv, b.x2 * inv, b.y2 * inv});
      }
      char name[32];
      std::snprintf(name, sizeof(name), "overlay_%05zu.ppm", i);
      render_overlay(*options.render_dir / name, rec.image, gts, report.per_image[i].proposals,
                     report.per_image[i].predicted_age, rec.age_months);
    }
  }
  out << std::setprecision(6) << "mae_months " << report.mae_months;
  if (report.ap) out << " ap " << *report.ap << " ap50 " << *report.ap50 << " ap75 " << *report.ap75;
  out << '\n';
  return report;
}

Prediction cmd_predict(const PredictOptions& options, std::ostream& out) {
  if (options.checkpoint.empty()) throw InvalidInput("predict: --checkpoint is required");
  if (options.image.empty()) throw InvalidInput("predict: --image is required");
  ALANet model = load_model(options.checkpoint);
  const Image image = read_pgm(options.image);
  Prediction p = predict(model, image, options.gender);
  out << std::setprecision(10) << "age_months " << p.age << '\n';
  for (std::size_t k = 0; k < p.proposals.size(); ++k) {
    const ScoredBox& b = p.proposals[k];
    out << "box " << k << ' ' << b.box.x1 << ' ' << b.box.y1 << ' ' << b.box.x2 << ' ' << b.box.y2
        << ' ' << b.score << '\n';
  }
  if (options.render) render_overlay(*options.render, image, {}, p.proposals, p.age);
  return p;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bone age assessment with local feature extraction"};
  app.require_subcommand(1);

  SynthOptions synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic hand dataset");
  synth_cmd->add_option("--n", synth.n, "Number of images")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--image-size", synth.image_size, "Square image side")->capture_default_str();

  std::string train_config;
  std::string train_out;
  std::string train_manifest;
  std::string train_resume;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> train_iterations;
  auto* train_cmd = app.add_subcommand("train", "Train from a run config");
  train_cmd->add_option("--config", train_config, "Run config file")->required();
  train_cmd->add_option("--out", train_out, "Override paths.output_dir");
  train_cmd->add_option("--manifest", train_manifest, "Override paths.manifest");
  train_cmd->add_option("--seed", train_seed, "Override training.seed and network.init_seed");
  train_cmd->add_option("--iterations", train_iterations, "Override training.iterations");
  train_cmd->add_option("--resume", train_resume, "Continue from this checkpoint");

  std::string eval_config;
  std::string eval_checkpoint;
  std::string eval_manifest;
  std::string eval_out;
  std::string eval_render;
  std::uint64_t eval_seed = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
  eval_cmd->add_option("--config", eval_config, "Run config supplying paths");
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint file");
  eval_cmd->add_option("--manifest", eval_manifest, "Manifest file");
  eval_cmd->add_option("--out", eval_out, "Report file (JSON)");
  eval_cmd->add_option("--render", eval_render, "Directory for overlay images");
  eval_cmd->add_option("--seed", eval_seed, "Accepted for uniformity; inference is deterministic");

  std::string pred_config;
  std::string pred_checkpoint;
  std::string pred_image;
  std::string pred_gender = "female";
  std::string pred_render;
  std::string pred_out;
  std::uint64_t pred_seed = 0;
  auto* pred_cmd = app.add_subcommand("predict", "Predict age and ROIs for one image");
  pred_cmd->add_option("--config", pred_config, "Run config supplying paths.checkpoint");
  pred_cmd->add_option("--checkpoint", pred_checkpoint, "Checkpoint file");
  pred_cmd->add_option("--image", pred_image, "PGM image")->required();
  pred_cmd->add_option("--gender", pred_gender, "female or male")->capture_default_str();
  pred_cmd->add_option("--render", pred_render, "Write an overlay PPM here");
  pred_cmd->add_option("--out", pred_out, "Also write the prediction as JSON here");
  pred_cmd->add_option("--seed", pred_seed, "Accepted for uniformity; inference is deterministic");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "alanet: error: " << e.what() << '\n';
    return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
  }

  try {
    if (*synth_cmd) {
      synth.out_dir = synth_out;
      const std::filesystem::path m = cmd_synth(synth);
      out << "manifest " << m.string() << '\n';
    } else if (*train_cmd) {
      TrainOptions opts;
      opts.config = load_run_config(train_config);
      if (!train_out.empty()) opts.config.paths.output_dir = train_out;
      if (!train_manifest.empty()) opts.config.paths.manifest = train_manifest;
      if (train_seed) {
        opts.config.training.seed = *train_seed;
        opts.config.network.init_seed = *train_seed;
      }
      if (train_iterations) opts.config.training.iterations = *train_iterations;
      if (!train_resume.empty()) opts.resume = train_resume;
      cmd_train(opts, out);
    } else if (*eval_cmd) {
      EvalOptions opts;
      if (!eval_config.empty()) {
        const RunConfig c = load_run_config(eval_config);
        opts.checkpoint = c.paths.checkpoint;
        opts.manifest = c.paths.manifest;
        if (!c.paths.output_dir.empty()) {
          opts.report = std::filesystem::path(c.paths.output_dir) / "eval_report.json";
        }
      }
      if (!eval_checkpoint.empty()) opts.checkpoint = eval_checkpoint;
      if (!eval_manifest.empty()) opts.manifest = eval_manifest;
      if (!eval_out.empty()) opts.report = eval_out;
      if (!eval_render.empty()) opts.render_dir = std::filesystem::path(eval_render);
      cmd_eval(opts, out);
    } else if (*pred_cmd) {
      PredictOptions opts;
      if (!pred_config.empty()) opts.checkpoint = load_run_config(pred_config).paths.checkpoint;
      if (!pred_checkpoint.empty()) opts.checkpoint = pred_checkpoint;
      opts.image = pred_image;
      opts.gender = parse_gender(pred_gender);
      if (!pred_render.empty()) opts.render = std::filesystem::path(pred_render);
      Prediction p = cmd_predict(opts, out);
      if (!pred_out.empty()) {
        json j = {{"age_months", p.age}, {"proposals", json::array()}};
        for (const ScoredBox& b : p.proposals) {
          j["proposals"].push_back({{"box", {b.box.x1, b.box.y1, b.box.x2, b.box.y2}}, {"score", b.score}});
        }
        std::ofstream f(pred_out);
        if (!f) throw IoError("cannot write " + pred_out);
        f << j.dump(2) << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& ch : msg) {
      if (ch == '\n') ch = ' ';
    }
    err << "alanet: error: " << msg << '\n';
    return 1;
  }
  return 0;
}

}  // namespace alanet::cli
