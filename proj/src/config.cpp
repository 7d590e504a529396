// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#include "mkpose/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace mkpose {

using nlohmann::json;

void PipelineConfig::validate() const {
  if (N < 64) throw std::invalid_argument("config: N must be >= 64");
  if (N_kpt < 2) throw std::invalid_argument("config: N_kpt must be >= 2");
  if (d <= 0 || d1 <= 0 || d2 <= 0) throw std::invalid_argument("config: feature widths must be positive");
  if (d % 4 != 0) throw std::invalid_argument("config: d must be divisible by 4 (attention heads)");
  if (tau <= 0.0) throw std::invalid_argument("config: tau must be positive");
  if (eps <= 0.0) throw std::invalid_argument("config: eps must be positive");
  if (k <= 0 || k > N) throw std::invalid_argument("config: k must be in [1, N]");
  if (T <= 0.0) throw std::invalid_argument("config: T must be positive");
  if (N_p <= 0) throw std::invalid_argument("config: N_p must be positive");
  if (batch_size <= 0) throw std::invalid_argument("config: batch_size must be positive");
  if (learning_rate <= 0.0) throw std::invalid_argument("config: learning_rate must be positive");
  if (steps < 0) throw std::invalid_argument("config: steps must be nonnegative");
  if (text_tokens < 1) throw std::invalid_argument("config: text_tokens must be >= 1");
  if (rgb_provider != "none" && rgb_provider != "per_point_color_mlp")
    throw std::invalid_argument("config: unknown rgb_provider '" + rgb_provider + "'");
  if (noise_sigma < 0.0) throw std::invalid_argument("config: noise_sigma must be nonnegative");
  if (checkpoint_interval <= 0) throw std::invalid_argument("config: checkpoint_interval must be positive");
  for (double l : {lambda1, lambda2, lambda3, lambda4, lambda5, lambda6})
    if (l < 0.0) throw std::invalid_argument("config: loss weights must be nonnegative");
}

PipelineConfig desk_profile() {
  PipelineConfig cfg;
  cfg.N = 256;
  cfg.N_kpt = 16;
  cfg.d = 64;
  cfg.d1 = 32;
  cfg.d2 = 32;
  cfg.batch_size = 16;
  return cfg;
}

namespace {

const std::set<std::string> kKnownKeys = {
    "N", "N_kpt", "d", "d1", "d2", "tau", "eps", "k", "T", "N_p",
    "lambda1", "lambda2", "lambda3", "lambda4", "lambda5", "lambda6",
    "batch_size", "learning_rate", "steps", "seed", "pose_recovery",
    "text_tokens", "use_text", "use_sym_loss", "use_fusion",
    "use_reconstructor", "use_global", "rgb_provider", "noise_sigma",
    "checkpoint_interval"};

}  // namespace

PipelineConfig config_from_json_text(const std::string& text) {
  json j = json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!kKnownKeys.count(it.key()))
      throw std::invalid_argument("config: unknown key '" + it.key() + "'");

  PipelineConfig cfg;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("N", cfg.N);
  get("N_kpt", cfg.N_kpt);
  get("d", cfg.d);
  get("d1", cfg.d1);
  get("d2", cfg.d2);
  get("tau", cfg.tau);
  get("eps", cfg.eps);
  get("k", cfg.k);
  get("T", cfg.T);
  get("N_p", cfg.N_p);
  get("lambda1", cfg.lambda1);
  get("lambda2", cfg.lambda2);
  get("lambda3", cfg.lambda3);
  get("lambda4", cfg.lambda4);
  get("lambda5", cfg.lambda5);
  get("lambda6", cfg.lambda6);
  get("batch_size", cfg.batch_size);
  get("learning_rate", cfg.learning_rate);
  get("steps", cfg.steps);
  get("seed", cfg.seed);
  get("text_tokens", cfg.text_tokens);
  get("use_text", cfg.use_text);
  get("use_sym_loss", cfg.use_sym_loss);
  get("use_fusion", cfg.use_fusion);
  get("use_reconstructor", cfg.use_reconstructor);
  get("use_global", cfg.use_global);
  get("rgb_provider", cfg.rgb_provider);
  get("noise_sigma", cfg.noise_sigma);
  get("checkpoint_interval", cfg.checkpoint_interval);
  if (j.contains("pose_recovery")) {
    const std::string v = j.at("pose_recovery").get<std::string>();
    if (v == "regress")
      cfg.pose_recovery = PoseRecovery::regress;
    else if (v == "align")
      cfg.pose_recovery = PoseRecovery::align;
    else
      throw std::invalid_argument("config: pose_recovery must be 'regress' or 'align'");
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return config_from_json_text(text);
}

std::string config_to_json_text(const PipelineConfig& cfg) {
  json j;
  j["N"] = cfg.N;
  j["N_kpt"] = cfg.N_kpt;
  j["d"] = cfg.d;
  j["d1"] = cfg.d1;
  j["d2"] = cfg.d2;
  j["tau"] = cfg.tau;
  j["eps"] = cfg.eps;
  j["k"] = cfg.k;
  j["T"] = cfg.T;
  j["N_p"] = cfg.N_p;
  j["lambda1"] = cfg.lambda1;
  j["lambda2"] = cfg.lambda2;
  j["lambda3"] = cfg.lambda3;
  j["lambda4"] = cfg.lambda4;
  j["lambda5"] = cfg.lambda5;
  j["lambda6"] = cfg.lambda6;
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["steps"] = cfg.steps;
  j["seed"] = cfg.seed;
  j["pose_recovery"] = cfg.pose_recovery == PoseRecovery::regress ? "regress" : "align";
  j["text_tokens"] = cfg.text_tokens;
  j["use_text"] = cfg.use_text;
  j["use_sym_loss"] = cfg.use_sym_loss;
  j["use_fusion"] = cfg.use_fusion;
  j["use_reconstructor"] = cfg.use_reconstructor;
  j["use_global"] = cfg.use_global;
  j["rgb_provider"] = cfg.rgb_provider;
  j["noise_sigma"] = cfg.noise_sigma;
  j["checkpoint_interval"] = cfg.checkpoint_interval;
  return j.dump(2) + "\n";
}

void save_config(const PipelineConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << config_to_json_text(cfg);
}

}  // namespace mkpose
