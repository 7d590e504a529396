// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#include "mkpose/trainer.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace mkpose::trainer {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[16] = {'M', 'K', 'P', 'O', 'S', 'E', '-', 'C', 'K', 'P', 'T', '\0',
                             '\0', '\0', '\0', '\0'};
constexpr uint32_t kVersion = 1;

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kClipNorm = 1.0;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void write_tensor(std::ofstream& out, const std::string& name, const Mat& m) {
  write_pod<uint32_t>(out, static_cast<uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_pod<uint32_t>(out, static_cast<uint32_t>(m.rows()));
  write_pod<uint32_t>(out, static_cast<uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) write_pod<float>(out, static_cast<float>(m(i, j)));
}

std::pair<std::string, Mat> read_tensor(std::ifstream& in) {
  const auto name_len = read_pod<uint32_t>(in);
  std::string name(name_len, '\0');
  in.read(name.data(), name_len);
  const auto rows = read_pod<uint32_t>(in);
  const auto cols = read_pod<uint32_t>(in);
  Mat m(rows, cols);
  for (uint32_t i = 0; i < rows; ++i)
    for (uint32_t j = 0; j < cols; ++j) m(i, j) = static_cast<double>(read_pod<float>(in));
  return {std::move(name), std::move(m)};
}

}  // namespace

Checkpoint snapshot(const MkPoseModel& model, uint64_t step, const Rng::State& data_rng) {
  Checkpoint c;
  c.config = model.config();
  c.step = step;
  c.data_rng = data_rng;
  for (const Param& p : model.params().all()) c.tensors.emplace_back(p.name, p.value);
  for (const Param& p : model.params().all()) {
    Mat m = p.adam_m.size() ? p.adam_m : Mat(Mat::Zero(p.value.rows(), p.value.cols()));
    c.tensors.emplace_back("adam.m." + p.name, std::move(m));
  }
  for (const Param& p : model.params().all()) {
    Mat v = p.adam_v.size() ? p.adam_v : Mat(Mat::Zero(p.value.rows(), p.value.cols()));
    c.tensors.emplace_back("adam.v." + p.name, std::move(v));
  }
  return c;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod<uint32_t>(out, kVersion);
  write_pod<uint64_t>(out, ckpt.step);
  for (uint64_t s : ckpt.data_rng.s) write_pod<uint64_t>(out, s);
  write_pod<uint8_t>(out, ckpt.data_rng.has_cached_normal ? 1 : 0);
  write_pod<double>(out, ckpt.data_rng.cached_normal);
  const std::string cfg_text = config_to_json_text(ckpt.config);
  write_pod<uint32_t>(out, static_cast<uint32_t>(cfg_text.size()));
  out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
  write_pod<uint32_t>(out, static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, m] : ckpt.tensors) write_tensor(out, name, m);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[16];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic header");
  const auto version = read_pod<uint32_t>(in);
  if (version != kVersion) throw std::runtime_error("checkpoint: unsupported version");

  Checkpoint c;
  c.step = read_pod<uint64_t>(in);
  for (uint64_t& s : c.data_rng.s) s = read_pod<uint64_t>(in);
  c.data_rng.has_cached_normal = read_pod<uint8_t>(in) != 0;
  c.data_rng.cached_normal = read_pod<double>(in);
  const auto cfg_len = read_pod<uint32_t>(in);
  std::string cfg_text(cfg_len, '\0');
  in.read(cfg_text.data(), cfg_len);
  c.config = config_from_json_text(cfg_text);
  const auto count = read_pod<uint32_t>(in);
  for (uint32_t i = 0; i < count; ++i) c.tensors.push_back(read_tensor(in));
  return c;
}

void restore_into(MkPoseModel& model, const Checkpoint& ckpt) {
  auto& store = model.params();
  for (const auto& [name, m] : ckpt.tensors) {
    std::string base = name;
    Mat Param::* slot = &Param::value;
    if (base.rfind("adam.m.", 0) == 0) {
      base = base.substr(7);
      slot = &Param::adam_m;
    } else if (base.rfind("adam.v.", 0) == 0) {
      base = base.substr(7);
      slot = &Param::adam_v;
    }
    const int id = store.find(base);
    if (id < 0) throw std::runtime_error("checkpoint: unknown tensor " + name);
    Param& p = store.at(id);
    if (p.value.rows() != m.rows() || p.value.cols() != m.cols())
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    p.*slot = m;
  }
}

std::unique_ptr<MkPoseModel> model_from_checkpoint(const Checkpoint& ckpt) {
  auto model = std::make_unique<MkPoseModel>(ckpt.config);
  restore_into(*model, ckpt);
  return model;
}

SampleLosses compute_losses(ad::Graph& g, const MkPoseModel& model, const ForwardResult& fwd,
                            const Sample& sample) {
  const PipelineConfig& cfg = model.config();
  const auto sym = MkPoseModel::sample_symmetry(sample);

  SampleLosses out;
  out.terms.ps = losses::loss_ps(g, fwd.pose, sample.gt_pose, sym, cfg.use_sym_loss);
  out.terms.cd = losses::loss_cd(g, fwd.kpt.positions, sample.points);
  out.terms.div = losses::loss_div(g, fwd.kpt.positions, cfg.T);
  if (cfg.use_reconstructor) {
    out.terms.rec = losses::loss_rec(g, fwd.rec.rec_points, sample.points);
    out.terms.delta = losses::loss_delta(g, fwd.rec.offsets);
  }
  // NOCS supervision targets the predicted keypoints' exact ground-truth
  // coordinates (stop-gradient on the target side).
  const Mat target = geometry::nocs_coords(fwd.kpt.positions->value, sample.gt_pose);
  out.terms.nocs = losses::loss_nocs(g, fwd.nocs_pred, target, sym);
  out.total = losses::loss_total(g, out.terms, cfg);
  return out;
}

int num_workers_from_env() {
  const char* env = std::getenv("MKPOSE_NUM_WORKERS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n > 0 ? n : 1;
}

namespace {

struct BatchAccum {
  std::vector<Mat> grads;
  StepLog log;
  std::string bad_component;  // non-empty on a non-finite loss
};

void run_samples(const MkPoseModel& model, const std::vector<Sample>& dataset,
                 const std::vector<int>& batch, size_t begin, size_t end, BatchAccum& acc) {
  acc.grads.assign(model.params().size(), Mat());
  for (size_t b = begin; b < end && acc.bad_component.empty(); ++b) {
    const Sample& s = dataset[static_cast<size_t>(batch[b])];
    try {
      ad::Graph g;
      const ForwardResult fwd = model.forward(g, s.points, s.category_id);
      const SampleLosses sl = compute_losses(g, model, fwd, s);
      g.backward(sl.total);
      g.collect_param_grads(acc.grads);
      acc.log.total += sl.total->scalar();
      acc.log.ps += sl.terms.ps->scalar();
      acc.log.cd += sl.terms.cd->scalar();
      acc.log.div += sl.terms.div->scalar();
      acc.log.rec += sl.terms.rec ? sl.terms.rec->scalar() : 0.0;
      acc.log.delta += sl.terms.delta ? sl.terms.delta->scalar() : 0.0;
      acc.log.nocs += sl.terms.nocs->scalar();
    } catch (const std::exception& e) {
      acc.bad_component = e.what();
    }
  }
}

}  // namespace

TrainResult train(MkPoseModel& model, const std::vector<Sample>& dataset,
                  const std::string& out_dir, uint64_t start_step, const Rng::State* resume_rng) {
  const PipelineConfig& cfg = model.config();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  for (const Sample& s : dataset)
    if (static_cast<int>(s.points.rows()) != cfg.N)
      throw std::invalid_argument("train: config/dataset N mismatch");

  fs::create_directories(out_dir);
  const std::string log_path = (fs::path(out_dir) / "train_log.csv").string();
  std::ofstream log(log_path, start_step == 0 ? std::ios::trunc : std::ios::app);
  if (!log) throw std::runtime_error("cannot write training log: " + log_path);
  if (start_step == 0) log << "step,loss_total,loss_ps,loss_cd,loss_div,loss_rec,loss_delta,loss_nocs\n";
  log.precision(17);

  Rng data_rng(Rng::mix(cfg.seed, 0x747261696eULL));
  if (resume_rng) data_rng.restore(*resume_rng);

  const int warmup = std::max(1, cfg.steps / 20);
  const int workers = num_workers_from_env();
  auto& params = model.params().all();

  TrainResult result;
  std::string last_good = (fs::path(out_dir) / "last_good.ckpt").string();

  for (int step = static_cast<int>(start_step); step < cfg.steps; ++step) {
    std::vector<int> batch(static_cast<size_t>(cfg.batch_size));
    for (auto& idx : batch) idx = static_cast<int>(data_rng.uniform_int(dataset.size()));

    const int nw = std::min<int>(workers, cfg.batch_size);
    std::vector<BatchAccum> accums(static_cast<size_t>(nw));
    if (nw == 1) {
      run_samples(model, dataset, batch, 0, batch.size(), accums[0]);
    } else {
      std::vector<std::thread> pool;
      const size_t chunk = (batch.size() + static_cast<size_t>(nw) - 1) / static_cast<size_t>(nw);
      for (int w = 0; w < nw; ++w) {
        const size_t b0 = static_cast<size_t>(w) * chunk;
        const size_t b1 = std::min(batch.size(), b0 + chunk);
        pool.emplace_back(run_samples, std::cref(model), std::cref(dataset), std::cref(batch), b0,
                          b1, std::ref(accums[static_cast<size_t>(w)]));
      }
      for (auto& t : pool) t.join();
    }

    StepLog sl;
    sl.step = step;
    std::vector<Mat> grads(params.size());
    std::string bad;
    for (const BatchAccum& acc : accums) {  // fixed order keeps reductions deterministic
      if (!acc.bad_component.empty() && bad.empty()) bad = acc.bad_component;
      sl.total += acc.log.total;
      sl.ps += acc.log.ps;
      sl.cd += acc.log.cd;
      sl.div += acc.log.div;
      sl.rec += acc.log.rec;
      sl.delta += acc.log.delta;
      sl.nocs += acc.log.nocs;
      for (size_t i = 0; i < params.size(); ++i) {
        if (acc.grads[i].size() == 0) continue;
        if (grads[i].size() == 0)
          grads[i] = acc.grads[i];
        else
          grads[i] += acc.grads[i];
      }
    }
    const double inv_b = 1.0 / cfg.batch_size;
    sl.total *= inv_b;
    sl.ps *= inv_b;
    sl.cd *= inv_b;
    sl.div *= inv_b;
    sl.rec *= inv_b;
    sl.delta *= inv_b;
    sl.nocs *= inv_b;

    if (!bad.empty() || !std::isfinite(sl.total)) {
      write_checkpoint(last_good, snapshot(model, static_cast<uint64_t>(step), data_rng.save()));
      std::ofstream diag((fs::path(out_dir) / "abort_diagnostic.txt").string());
      diag << "aborted at step " << step << ": "
           << (bad.empty() ? "non-finite loss total" : bad) << "\n";
      throw std::runtime_error(bad.empty() ? "non-finite loss total" : bad);
    }

    log << sl.step << ',' << sl.total << ',' << sl.ps << ',' << sl.cd << ',' << sl.div << ','
        << sl.rec << ',' << sl.delta << ',' << sl.nocs << '\n';
    result.history.push_back(sl);

    // clip at global norm, then Adam
    double sq_norm = 0.0;
    for (size_t i = 0; i < params.size(); ++i)
      if (grads[i].size()) sq_norm += (grads[i] * inv_b).squaredNorm();
    const double gnorm = std::sqrt(sq_norm);
    const double clip = gnorm > kClipNorm ? kClipNorm / gnorm : 1.0;
    const double lr =
        step < warmup ? cfg.learning_rate * (step + 1) / warmup : cfg.learning_rate;
    const double t = static_cast<double>(step + 1);
    const double bc1 = 1.0 - std::pow(kBeta1, t);
    const double bc2 = 1.0 - std::pow(kBeta2, t);

    for (size_t i = 0; i < params.size(); ++i) {
      Param& p = params[i];
      if (p.adam_m.size() == 0) {
        p.adam_m = Mat::Zero(p.value.rows(), p.value.cols());
        p.adam_v = Mat::Zero(p.value.rows(), p.value.cols());
      }
      if (grads[i].size() == 0) continue;
      const Mat gmat = grads[i] * (inv_b * clip);
      p.adam_m = kBeta1 * p.adam_m + (1.0 - kBeta1) * gmat;
      p.adam_v = kBeta2 * p.adam_v + (1.0 - kBeta2) * gmat.cwiseProduct(gmat);
      const Mat mhat = p.adam_m / bc1;
      const Mat vhat = p.adam_v / bc2;
      const Mat denom = (vhat.cwiseSqrt().array() + kAdamEps).matrix();
      p.value -= lr * mhat.cwiseQuotient(denom);
      quantize_f32(p.value);
      quantize_f32(p.adam_m);
      quantize_f32(p.adam_v);
    }

    if ((step + 1) % cfg.checkpoint_interval == 0 || step + 1 == cfg.steps) {
      const std::string path =
          (fs::path(out_dir) / ("step_" + std::to_string(step + 1) + ".ckpt")).string();
      write_checkpoint(path, snapshot(model, static_cast<uint64_t>(step + 1), data_rng.save()));
      result.checkpoint_path = path;
    }
  }
  if (result.checkpoint_path.empty()) {
    result.checkpoint_path = (fs::path(out_dir) / "step_0.ckpt").string();
    write_checkpoint(result.checkpoint_path, snapshot(model, 0, data_rng.save()));
  }
  return result;
}

std::vector<metrics::EvalRecord> evaluate_records(const MkPoseModel& model,
                                                  const std::vector<Sample>& dataset,
                                                  const EvalOptions& opts) {
  if (dataset.empty()) throw std::invalid_argument("evaluate: empty dataset");
  for (const Sample& s : dataset)
    if (static_cast<int>(s.points.rows()) != model.config().N)
      throw std::invalid_argument("evaluate: config/dataset N mismatch");

  std::vector<metrics::EvalRecord> records(dataset.size());
  auto worker = [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      const Sample& s = dataset[i];
      ad::Graph g;
      const ForwardResult fwd = model.forward(g, s.points, s.category_id);
      geometry::Pose pred;
      if (opts.inject_oracle_nocs) {
        const Mat oracle = geometry::nocs_coords(fwd.kpt.positions->value, s.gt_pose);
        pred = posehead::align_pose(oracle, fwd.kpt.positions->value);
      } else {
        pred = model.recover_pose(fwd);
      }
      records[i] = metrics::make_record(pred, s.gt_pose, s.category_id, s.handle_visible);
    }
  };
  const int workers = std::min<int>(num_workers_from_env(), static_cast<int>(dataset.size()));
  if (workers <= 1) {
    worker(0, dataset.size());
  } else {
    std::vector<std::thread> pool;
    const size_t chunk = (dataset.size() + static_cast<size_t>(workers) - 1) / static_cast<size_t>(workers);
    for (int w = 0; w < workers; ++w) {
      const size_t b0 = static_cast<size_t>(w) * chunk;
      pool.emplace_back(worker, b0, std::min(dataset.size(), b0 + chunk));
    }
    for (auto& t : pool) t.join();
  }
  return records;
}

metrics::Report evaluate(const MkPoseModel& model, const std::vector<Sample>& dataset,
                         const EvalOptions& opts) {
  return metrics::aggregate(evaluate_records(model, dataset, opts));
}

}  // namespace mkpose::trainer
