// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line entry point: dataset generation, training, evaluation and
// figure rendering. Exit codes: 0 success, 1 runtime failure, 2 usage or
// config error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include "CLI11.hpp"
#include "mkpose/datagen.hpp"
#include "mkpose/model.hpp"
#include "mkpose/trainer.hpp"
#include "mkpose/viz.hpp"

namespace {

using namespace mkpose;

PipelineConfig config_or_default(const std::string& path) {
  if (path.empty()) return PipelineConfig{};
  return load_config(path);
}

int cmd_gen(const std::string& config_path, const std::string& out_dir, int count, uint64_t seed) {
  const PipelineConfig cfg = config_or_default(config_path);
  const int workers = trainer::num_workers_from_env();
  const auto samples = datagen::build_dataset(cfg, count, seed, workers);
  datagen::write_dataset(samples, out_dir, cfg.N, seed);
  std::printf("wrote %d samples to %s\n", count, out_dir.c_str());
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir) {
  const PipelineConfig cfg = config_or_default(config_path);
  const auto dataset = datagen::read_dataset(data_dir);
  MkPoseModel model(cfg);
  const auto result = trainer::train(model, dataset, out_dir);
  std::printf("finished %d steps; final checkpoint: %s\n", cfg.steps,
              result.checkpoint_path.c_str());
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir,
             const std::string& report_path) {
  const auto ckpt = trainer::read_checkpoint(ckpt_path);
  const auto model = trainer::model_from_checkpoint(ckpt);
  const auto dataset = datagen::read_dataset(data_dir);
  const auto report = trainer::evaluate(*model, dataset);
  metrics::save_report(report, report_path);
  std::printf("report written to %s\n", report_path.c_str());
  return 0;
}

int cmd_viz(const std::string& ckpt_path, const std::string& data_dir, int sample_index,
            const std::string& out_path) {
  const auto ckpt = trainer::read_checkpoint(ckpt_path);
  const auto model = trainer::model_from_checkpoint(ckpt);
  const auto dataset = datagen::read_dataset(data_dir);
  if (sample_index < 0 || sample_index >= static_cast<int>(dataset.size()))
    throw std::runtime_error("unknown sample id: " + std::to_string(sample_index));
  const auto& s = dataset[static_cast<size_t>(sample_index)];

  ad::Graph g;
  const auto fwd = model->forward(g, s.points, s.category_id);
  const geometry::Pose pred = model->recover_pose(fwd);
  const auto img = viz::render_scene(s.points, fwd.kpt.positions->value, pred, s.gt_pose);
  viz::write_png(out_path, img);
  std::printf("figure written to %s\n", out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mkpose: category-level pose estimation on a synthetic benchmark"};
  app.require_subcommand(1);

  std::string config_path, out_dir, data_dir, ckpt_path, report_path, image_path;
  int count = 0;
  int sample_index = 0;
  uint64_t seed = 0;

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--config", config_path, "pipeline config JSON");
  gen->add_option("--out", out_dir, "output dataset directory")->required();
  gen->add_option("--count", count, "number of samples")->required();
  gen->add_option("--seed", seed, "base seed");

  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", config_path, "pipeline config JSON");
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--out", out_dir, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--report", report_path, "output report JSON")->required();

  auto* viz = app.add_subcommand("viz", "render prediction vs ground truth");
  viz->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  viz->add_option("--data", data_dir, "dataset directory")->required();
  viz->add_option("--sample", sample_index, "sample index")->required();
  viz->add_option("--out", image_path, "output PNG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(config_path, out_dir, count, seed);
    if (train->parsed()) return cmd_train(config_path, data_dir, out_dir);
    if (eval->parsed()) return cmd_eval(ckpt_path, data_dir, report_path);
    if (viz->parsed()) return cmd_viz(ckpt_path, data_dir, sample_index, image_path);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
