// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

namespace mkpose {

enum class PoseRecovery { regress, align };

// Every pipeline hyperparameter with its default. The JSON schema accepts
// exactly these keys; unknown keys are rejected.
struct PipelineConfig {
  int N = 1024;       // sampled points per instance
  int N_kpt = 96;     // keypoints
  int d = 256;        // fused feature width
  int d1 = 128;       // rgb feature width
  int d2 = 128;       // point feature width
  double tau = 0.1;   // heatmap temperature
  double eps = 1e-7;  // cosine-similarity stabilizer
  int k = 16;         // neighbors per keypoint
  double T = 0.01;    // diversity distance threshold
  int N_p = 8;        // reconstruction points per keypoint
  double lambda1 = 0.3;
  double lambda2 = 2.0;
  double lambda3 = 10.0;
  double lambda4 = 15.0;
  double lambda5 = 1.0;
  double lambda6 = 2.0;
  int batch_size = 32;
  double learning_rate = 1e-4;
  int steps = 20000;
  uint64_t seed = 0;
  PoseRecovery pose_recovery = PoseRecovery::regress;
  int text_tokens = 1;
  bool use_text = true;
  bool use_sym_loss = true;
  bool use_fusion = true;
  bool use_reconstructor = true;
  bool use_global = true;
  std::string rgb_provider = "none";  // "none" | "per_point_color_mlp"
  double noise_sigma = 0.005;
  int checkpoint_interval = 1000;

  void validate() const;
};

// Reduced profile used by the scaled benchmark: N=256, N_kpt=16, d=64,
// batch 16, feature-width ratios preserved. Temperature, eps, k, T and the
// loss weights keep their defaults.
PipelineConfig desk_profile();

PipelineConfig config_from_json_text(const std::string& text);
PipelineConfig load_config(const std::string& path);
std::string config_to_json_text(const PipelineConfig& cfg);
void save_config(const PipelineConfig& cfg, const std::string& path);

}  // namespace mkpose
