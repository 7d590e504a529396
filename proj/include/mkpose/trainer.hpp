// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mkpose/losses.hpp"
#include "mkpose/metrics.hpp"
#include "mkpose/model.hpp"

namespace mkpose::trainer {

using datagen::Sample;

// Single-file checkpoint: 16-byte magic "MKPOSE-CKPT\0" (zero padded), u32
// version, u64 step, serialized data RNG, config JSON, then length-prefixed
// named float32 tensors (parameters followed by Adam moments).
struct Checkpoint {
  PipelineConfig config;
  uint64_t step = 0;
  Rng::State data_rng{};
  std::vector<std::pair<std::string, Mat>> tensors;
};

Checkpoint snapshot(const MkPoseModel& model, uint64_t step, const Rng::State& data_rng);
void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);
// Restores parameters and optimizer state; shapes must match the model.
void restore_into(MkPoseModel& model, const Checkpoint& ckpt);
std::unique_ptr<MkPoseModel> model_from_checkpoint(const Checkpoint& ckpt);

struct SampleLosses {
  losses::LossTerms terms;
  ad::Var total = nullptr;
};

// Forward-pass losses for one sample (shared by the trainer and the tests).
SampleLosses compute_losses(ad::Graph& g, const MkPoseModel& model, const ForwardResult& fwd,
                            const Sample& sample);

struct StepLog {
  int step = 0;
  double total = 0, ps = 0, cd = 0, div = 0, rec = 0, delta = 0, nocs = 0;
};

struct TrainResult {
  std::vector<StepLog> history;
  std::string checkpoint_path;  // final checkpoint
};

// Deterministic Adam training: linear warmup over 5% of steps, gradient
// clipping at global norm 1, per-step CSV logging
// (step,loss_total,loss_ps,loss_cd,loss_div,loss_rec,loss_delta,loss_nocs),
// periodic checkpoints. A non-finite loss aborts after writing
// last_good.ckpt and a diagnostic naming the first bad component.
TrainResult train(MkPoseModel& model, const std::vector<Sample>& dataset,
                  const std::string& out_dir, uint64_t start_step = 0,
                  const Rng::State* resume_rng = nullptr);

struct EvalOptions {
  // Replace predicted NOCS with exact ground-truth NOCS of the predicted
  // keypoints before alignment (diagnostic for the align recovery path).
  bool inject_oracle_nocs = false;
};

std::vector<metrics::EvalRecord> evaluate_records(const MkPoseModel& model,
                                                  const std::vector<Sample>& dataset,
                                                  const EvalOptions& opts = {});
metrics::Report evaluate(const MkPoseModel& model, const std::vector<Sample>& dataset,
                         const EvalOptions& opts = {});

// MKPOSE_NUM_WORKERS (default 1).
int num_workers_from_env();

}  // namespace mkpose::trainer
