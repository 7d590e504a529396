// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <array>
#include <filesystem>
#include <fstream>
#include <set>
#include <tuple>

#include "doctest.h"
#include "mkpose/datagen.hpp"

using namespace mkpose;
using namespace mkpose::datagen;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_cfg() {
  PipelineConfig cfg = desk_profile();
  cfg.N = 256;
  return cfg;
}

bool samples_equal(const Sample& a, const Sample& b) {
  return a.points == b.points && a.gt_nocs == b.gt_nocs && a.category_id == b.category_id &&
         a.seed == b.seed && a.handle_visible == b.handle_visible &&
         a.gt_pose.rotation == b.gt_pose.rotation &&
         a.gt_pose.translation == b.gt_pose.translation && a.gt_pose.size == b.gt_pose.size;
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("mkpose_test_" + std::to_string(::getpid()) + "_" +
                                                std::to_string(counter++))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static inline int counter = 0;
};

}  // namespace

TEST_CASE("generation is deterministic per (spec, seed, config)") {
  const auto cfg = small_cfg();
  for (const auto& spec : default_categories()) {
    const Sample a = generate_sample(spec, 42, cfg);
    const Sample b = generate_sample(spec, 42, cfg);
    CHECK(samples_equal(a, b));
    const Sample c = generate_sample(spec, 43, cfg);
    CHECK_FALSE(a.points == c.points);
  }
}

TEST_CASE("stored NOCS matches nocs_coords of the stored points") {
  const auto cfg = small_cfg();
  for (const auto& spec : default_categories()) {
    for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
      const Sample s = generate_sample(spec, seed, cfg);
      const MatX again = geometry::nocs_coords(s.points, s.gt_pose);
      CHECK((again - s.gt_nocs).cwiseAbs().maxCoeff() < 1e-5);
      CHECK(s.gt_nocs.cwiseAbs().maxCoeff() <= 0.5 + 1e-6);
      CHECK(static_cast<int>(s.points.rows()) == cfg.N);
    }
  }
}

TEST_CASE("cylinder NOCS stays inside the scaled radius bound") {
  auto cfg = small_cfg();
  cfg.noise_sigma = 0.0;
  const auto& spec = default_categories()[static_cast<size_t>(geometry::CategoryKind::cylinder)];
  for (uint64_t seed = 10; seed < 40; ++seed) {
    const Sample s = generate_sample(spec, seed, cfg);
    const auto& sz = s.gt_pose.size;
    const double bound =
        0.25 * (sz.x() * sz.x() + sz.z() * sz.z()) / sz.squaredNorm() + 1e-6;
    for (Eigen::Index i = 0; i < s.gt_nocs.rows(); ++i) {
      const double r2 = s.gt_nocs(i, 0) * s.gt_nocs(i, 0) + s.gt_nocs(i, 2) * s.gt_nocs(i, 2);
      CHECK(r2 <= bound);
    }
  }
}

TEST_CASE("half-space occlusion discards about the quantile fraction") {
  // with q = 0.5 roughly half the pre-resample points must survive; the
  // generator draws q in [0.5, 0.85], so count distinct survivors
  auto cfg = small_cfg();
  cfg.noise_sigma = 0.0;
  const auto& spec = default_categories()[static_cast<size_t>(geometry::CategoryKind::rect_box)];
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const Sample s = generate_sample(spec, seed, cfg);
    std::set<std::tuple<double, double, double>> distinct;
    for (Eigen::Index i = 0; i < s.points.rows(); ++i)
      distinct.insert({s.points(i, 0), s.points(i, 1), s.points(i, 2)});
    const double frac = static_cast<double>(distinct.size()) / cfg.N;
    CHECK(frac >= 0.5 - 0.02);
    CHECK(frac <= 0.85 + 0.02);
  }
}

TEST_CASE("tied planar scales keep declared symmetries honest") {
  const auto cfg = small_cfg();
  const auto& cats = default_categories();
  using geometry::CategoryKind;
  for (auto kind : {CategoryKind::cylinder, CategoryKind::cone, CategoryKind::square_prism}) {
    const Sample s = generate_sample(cats[static_cast<size_t>(kind)], 5, cfg);
    CHECK(s.gt_pose.size.x() == doctest::Approx(s.gt_pose.size.z()));
  }
  const Sample box = generate_sample(cats[static_cast<size_t>(CategoryKind::rect_box)], 5, cfg);
  CHECK(std::abs(box.gt_pose.size.x() - box.gt_pose.size.z()) >= 0.1);
}

TEST_CASE("mug handle visibility varies across seeds") {
  const auto cfg = small_cfg();
  const auto& mug = default_categories()[static_cast<size_t>(geometry::CategoryKind::mug_like)];
  int visible = 0, hidden = 0;
  for (uint64_t seed = 0; seed < 60; ++seed) {
    const Sample s = generate_sample(mug, seed, cfg);
    (s.handle_visible ? visible : hidden)++;
  }
  CHECK(visible > 0);
  CHECK(hidden > 0);
}

TEST_CASE("dataset build is balanced and parallel equals serial") {
  const auto cfg = small_cfg();
  const auto serial = build_dataset(cfg, 14, 99, 1);
  const auto parallel = build_dataset(cfg, 14, 99, 4);
  REQUIRE(serial.size() == 14);
  std::array<int, 6> counts{};
  for (size_t i = 0; i < serial.size(); ++i) {
    CHECK(samples_equal(serial[i], parallel[i]));
    counts[static_cast<size_t>(serial[i].category_id)]++;
  }
  for (int c : counts) CHECK((c == 2 || c == 3));  // 14 = 2*6 + 2
}

TEST_CASE("write/read round trip is bit exact") {
  const auto cfg = small_cfg();
  const auto samples = build_dataset(cfg, 10, 7, 1);
  TempDir dir;
  write_dataset(samples, dir.path.string(), cfg.N, 7);
  DatasetMeta meta;
  const auto back = read_dataset(dir.path.string(), &meta);
  CHECK(meta.n_points == cfg.N);
  REQUIRE(back.size() == samples.size());
  for (size_t i = 0; i < samples.size(); ++i) CHECK(samples_equal(samples[i], back[i]));
}

TEST_CASE("empty dataset round trips") {
  TempDir dir;
  write_dataset({}, dir.path.string(), 256, 0);
  DatasetMeta meta;
  CHECK(read_dataset(dir.path.string(), &meta).empty());
  CHECK(meta.count == 0);
}

TEST_CASE("a truncated point file is reported as a shape mismatch naming the sample") {
  const auto cfg = small_cfg();
  const auto samples = build_dataset(cfg, 2, 3, 1);
  TempDir dir;
  write_dataset(samples, dir.path.string(), cfg.N, 3);
  {
    std::ofstream trunc(dir.path / "samples" / "000001.points.f32",
                        std::ios::binary | std::ios::trunc);
    trunc << "xx";
  }
  try {
    read_dataset(dir.path.string());
    FAIL("expected a shape mismatch");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("shape mismatch") != std::string::npos);
    CHECK(msg.find("000001") != std::string::npos);
  }
}

TEST_CASE("a corrupted payload fails the checksum") {
  const auto cfg = small_cfg();
  const auto samples = build_dataset(cfg, 1, 3, 1);
  TempDir dir;
  write_dataset(samples, dir.path.string(), cfg.N, 3);
  {
    std::fstream f(dir.path / "samples" / "000000.nocs.f32",
                   std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(16);
    const float junk = 9999.0f;
    f.write(reinterpret_cast<const char*>(&junk), sizeof(junk));
  }
  try {
    read_dataset(dir.path.string());
    FAIL("expected a checksum mismatch");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("checksum mismatch") != std::string::npos);
  }
}

TEST_CASE("a missing manifest is reported") {
  TempDir dir;
  try {
    read_dataset(dir.path.string());
    FAIL("expected a missing manifest error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("missing manifest") != std::string::npos);
  }
}
