// Copyright (c) 2026 mkpose contributors
// SPDX-License-Identifier: Apache-2.0

#include "mkpose/datagen.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace mkpose::datagen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

double quantile_threshold(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const size_t idx = static_cast<size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
  return v[idx];
}

Vec3 disc_sample(double radius, Rng& rng) {
  const double r = radius * std::sqrt(rng.uniform());
  const double a = 2.0 * kPi * rng.uniform();
  return Vec3(r * std::cos(a), 0.0, r * std::sin(a));
}

SurfacePoint sample_cylinder(Rng& rng) {
  const double lateral = 2.0 * kPi * 0.5;    // r=0.5, h=1
  const double caps = 2.0 * kPi * 0.25;
  if (rng.uniform() * (lateral + caps) < lateral) {
    const double a = 2.0 * kPi * rng.uniform();
    return {{0.5 * std::cos(a), rng.uniform() - 0.5, 0.5 * std::sin(a)}, 0};
  }
  Vec3 p = disc_sample(0.5, rng);
  p.y() = rng.uniform() < 0.5 ? 0.5 : -0.5;
  return {p, 0};
}

SurfacePoint sample_cone(Rng& rng) {
  const double slant = std::sqrt(1.0 + 0.25);
  const double lateral = kPi * 0.5 * slant;
  const double base = kPi * 0.25;
  if (rng.uniform() * (lateral + base) < lateral) {
    const double f = std::sqrt(rng.uniform());  // area-uniform along the slant
    const double a = 2.0 * kPi * rng.uniform();
    const double r = 0.5 * f;
    return {{r * std::cos(a), 0.5 - f, r * std::sin(a)}, 0};
  }
  Vec3 p = disc_sample(0.5, rng);
  p.y() = -0.5;
  return {p, 0};
}

SurfacePoint sample_cube(Rng& rng) {
  const int face = static_cast<int>(rng.uniform_int(6));
  const double a = rng.uniform() - 0.5;
  const double b = rng.uniform() - 0.5;
  const double s = face % 2 == 0 ? 0.5 : -0.5;
  switch (face / 2) {
    case 0: return {{s, a, b}, 0};
    case 1: return {{a, s, b}, 0};
    default: return {{a, b, s}, 0};
  }
}

// L cross-section in x-y (vertical bar x in [-0.5,-0.1], full height; horizontal
// bar x in [-0.1,0.5], y in [-0.5,-0.1]), extruded along z.
SurfacePoint sample_l_shape(Rng& rng) {
  struct Rect {
    Vec3 origin, du, dv;
    double area;
  };
  static const std::vector<Rect> faces = [] {
    std::vector<Rect> f;
    auto add = [&f](Vec3 o, Vec3 u, Vec3 v) { f.push_back({o, u, v, u.norm() * v.norm()}); };
    // side walls, extruded along z
    add({-0.5, -0.5, -0.5}, {0, 1.0, 0}, {0, 0, 1.0});   // x = -0.5
    add({-0.5, 0.5, -0.5}, {0.4, 0, 0}, {0, 0, 1.0});    // y = +0.5
    add({-0.1, -0.1, -0.5}, {0, 0.6, 0}, {0, 0, 1.0});   // x = -0.1 upper
    add({-0.1, -0.1, -0.5}, {0.6, 0, 0}, {0, 0, 1.0});   // y = -0.1 right
    add({0.5, -0.5, -0.5}, {0, 0.4, 0}, {0, 0, 1.0});    // x = +0.5
    add({-0.5, -0.5, -0.5}, {1.0, 0, 0}, {0, 0, 1.0});   // y = -0.5
    // caps at z = +-0.5, two rectangles per cap
    for (double z : {-0.5, 0.5}) {
      add({-0.5, -0.5, z}, {0.4, 0, 0}, {0, 1.0, 0});
      add({-0.1, -0.5, z}, {0.6, 0, 0}, {0, 0.4, 0});
    }
    return f;
  }();
  static const double total = [] {
    double t = 0;
    for (const auto& f : faces) t += f.area;
    return t;
  }();
  double pick = rng.uniform() * total;
  size_t i = 0;
  while (i + 1 < faces.size() && pick > faces[i].area) {
    pick -= faces[i].area;
    ++i;
  }
  const Rect& f = faces[i];
  return {f.origin + rng.uniform() * f.du + rng.uniform() * f.dv, 0};
}

// Mug: circular body (radius 0.4, axis at x=-0.1), closed caps, and a handle
// tube swept along a half elliptic arc in the x-y plane. Canonical extents
// are (1, 1, 0.8).
struct MugHandleArc {
  static constexpr double cx = 0.3, rx = 0.15, ry = 0.3, tube = 0.05;
  std::vector<double> cdf, phis;
  double total = 0.0;

  MugHandleArc() {
    const int segs = 64;
    cdf.resize(segs + 1, 0.0);
    phis.resize(segs + 1);
    for (int i = 0; i <= segs; ++i) phis[static_cast<size_t>(i)] = -kPi / 2 + kPi * i / segs;
    for (int i = 0; i < segs; ++i) {
      const double mid = 0.5 * (phis[static_cast<size_t>(i)] + phis[static_cast<size_t>(i) + 1]);
      const double speed = std::hypot(rx * std::sin(mid), ry * std::cos(mid));
      cdf[static_cast<size_t>(i) + 1] = cdf[static_cast<size_t>(i)] + speed * (kPi / segs);
    }
    total = cdf.back();
  }

  double arc_length() const { return total; }

  Vec3 sample(Rng& rng) const {
    const double target = rng.uniform() * total;
    size_t i = 1;
    while (i < cdf.size() - 1 && cdf[i] < target) ++i;
    const double f = (target - cdf[i - 1]) / (cdf[i] - cdf[i - 1]);
    const double phi = phis[i - 1] + f * (phis[i] - phis[i - 1]);

    const Vec3 center(cx + rx * std::cos(phi), ry * std::sin(phi), 0.0);
    Vec3 tangent(-rx * std::sin(phi), ry * std::cos(phi), 0.0);
    tangent.normalize();
    const Vec3 normal(tangent.y(), -tangent.x(), 0.0);
    const double psi = 2.0 * kPi * rng.uniform();
    return center + tube * (std::cos(psi) * normal + std::sin(psi) * Vec3::UnitZ());
  }
};

SurfacePoint sample_mug(Rng& rng) {
  static const MugHandleArc handle;
  const double body_lateral = 2.0 * kPi * 0.4;
  const double body_caps = 2.0 * kPi * 0.16;
  const double handle_area = handle.arc_length() * 2.0 * kPi * MugHandleArc::tube;
  const double total = body_lateral + body_caps + handle_area;

  const double pick = rng.uniform() * total;
  if (pick < body_lateral) {
    const double a = 2.0 * kPi * rng.uniform();
    return {{-0.1 + 0.4 * std::cos(a), rng.uniform() - 0.5, 0.4 * std::sin(a)}, 0};
  }
  if (pick < body_lateral + body_caps) {
    Vec3 p = disc_sample(0.4, rng);
    p.x() -= 0.1;
    p.y() = rng.uniform() < 0.5 ? 0.5 : -0.5;
    return {p, 0};
  }
  return {handle.sample(rng), 1};
}

}  // namespace

SurfacePoint sample_canonical_surface(CategoryKind kind, Rng& rng) {
  switch (kind) {
    case CategoryKind::cylinder: return sample_cylinder(rng);
    case CategoryKind::cone: return sample_cone(rng);
    case CategoryKind::square_prism:
    case CategoryKind::rect_box: return sample_cube(rng);
    case CategoryKind::mug_like: return sample_mug(rng);
    case CategoryKind::l_shape: return sample_l_shape(rng);
  }
  throw std::invalid_argument("unknown category kind");
}

const std::vector<CategorySpec>& default_categories() {
  static const std::vector<CategorySpec> cats = [] {
    std::vector<CategorySpec> c(geometry::kNumCategories);
    for (int i = 0; i < geometry::kNumCategories; ++i) {
      const auto kind = static_cast<CategoryKind>(i);
      c[static_cast<size_t>(i)].name = geometry::category_name(kind);
      c[static_cast<size_t>(i)].kind = kind;
      c[static_cast<size_t>(i)].symmetry = geometry::symmetry_for(kind);
    }
    auto& mug = c[static_cast<size_t>(CategoryKind::mug_like)];
    mug.conditional_symmetry = true;
    mug.canonical_extents = Vec3(1.0, 1.0, 0.8);
    for (auto kind : {CategoryKind::cylinder, CategoryKind::cone, CategoryKind::square_prism,
                      CategoryKind::mug_like})
      c[static_cast<size_t>(kind)].tie_planar_scale = true;
    return c;
  }();
  return cats;
}

Sample generate_sample(const CategorySpec& spec, uint64_t seed, const PipelineConfig& cfg) {
  if (cfg.N < 64) throw std::invalid_argument("generate_sample: N must be >= 64");
  const int n = cfg.N;

  for (int attempt = 0; attempt < 8; ++attempt) {
    const uint64_t attempt_seed = seed + static_cast<uint64_t>(attempt);
    Rng rng(Rng::mix(attempt_seed, 0x6d6b706f7365ULL));

    Vec3 scale;
    scale.x() = rng.uniform(0.5, 1.5);
    scale.y() = rng.uniform(0.5, 1.5);
    scale.z() = spec.tie_planar_scale ? scale.x() : rng.uniform(0.5, 1.5);
    if (spec.kind == CategoryKind::rect_box) {
      // keep the declared 2-fold symmetry distinguishable from an accidental 4-fold
      while (std::abs(scale.x() - scale.z()) < 0.1) scale.z() = rng.uniform(0.5, 1.5);
    }

    Pose pose;
    pose.rotation = geometry::random_rotation(rng);
    pose.translation = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    pose.size = scale.cwiseProduct(spec.canonical_extents);

    MatX cam(n, 3);
    std::vector<int> parts(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      const SurfacePoint sp = sample_canonical_surface(spec.kind, rng);
      cam.row(i) = (pose.rotation * sp.p.cwiseProduct(scale) + pose.translation).transpose();
      parts[static_cast<size_t>(i)] = sp.part;
    }

    // half-space occlusion
    Vec3 dir(rng.normal(), rng.normal(), rng.normal());
    while (dir.norm() < 1e-9) dir = Vec3(rng.normal(), rng.normal(), rng.normal());
    dir.normalize();
    const double q = rng.uniform(0.5, 0.85);
    const Eigen::RowVector3d centroid = cam.colwise().mean();
    std::vector<double> proj(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) proj[static_cast<size_t>(i)] = (cam.row(i) - centroid).dot(dir.transpose());
    const double thr = quantile_threshold(proj, q);

    std::vector<int> kept;
    kept.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
      if (proj[static_cast<size_t>(i)] <= thr) kept.push_back(i);
    if (static_cast<int>(kept.size()) < 16) continue;

    int handle_survivors = 0;
    for (int i : kept) handle_survivors += parts[static_cast<size_t>(i)];

    Sample s;
    s.seed = attempt_seed;
    s.gt_pose = pose;
    s.handle_visible = spec.kind == CategoryKind::mug_like && handle_survivors >= 10;

    s.points.resize(n, 3);
    for (size_t i = 0; i < kept.size(); ++i) s.points.row(static_cast<Eigen::Index>(i)) = cam.row(kept[i]);
    for (int i = static_cast<int>(kept.size()); i < n; ++i)
      s.points.row(i) = cam.row(kept[rng.uniform_int(kept.size())]);

    if (cfg.noise_sigma > 0.0) {
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) s.points(i, c) += cfg.noise_sigma * rng.normal();
    }
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 3; ++c) s.points(i, c) = static_cast<double>(static_cast<float>(s.points(i, c)));

    s.gt_nocs = geometry::nocs_coords(s.points, s.gt_pose);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 3; ++c) s.gt_nocs(i, c) = static_cast<double>(static_cast<float>(s.gt_nocs(i, c)));
    return s;
  }
  throw std::runtime_error("generate_sample: occlusion left too few points after 8 retries");
}

std::vector<Sample> build_dataset(const PipelineConfig& cfg, int count, uint64_t base_seed,
                                  int workers) {
  const auto& cats = default_categories();
  std::vector<Sample> out(static_cast<size_t>(count));
  auto fill = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      const auto& spec = cats[static_cast<size_t>(i) % cats.size()];
      out[static_cast<size_t>(i)] = generate_sample(spec, Rng::mix(base_seed, static_cast<uint64_t>(i)), cfg);
      out[static_cast<size_t>(i)].category_id = i % static_cast<int>(cats.size());
    }
  };
  workers = std::max(1, std::min(workers, count == 0 ? 1 : count));
  if (workers == 1) {
    fill(0, count);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (count + workers - 1) / workers;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back(fill, w * chunk, std::min(count, (w + 1) * chunk));
    for (auto& t : pool) t.join();
  }
  return out;
}

void write_f32_file(const std::string& path, const MatX& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const float f = static_cast<float>(m(i, j));
      out.write(reinterpret_cast<const char*>(&f), sizeof(float));
    }
  }
}

MatX read_f32_file(const std::string& path, int rows, int cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<size_t>(in.tellg());
  if (bytes != static_cast<size_t>(rows) * static_cast<size_t>(cols) * sizeof(float))
    throw std::runtime_error("shape mismatch");
  in.seekg(0);
  MatX m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      float f;
      in.read(reinterpret_cast<char*>(&f), sizeof(float));
      m(i, j) = static_cast<double>(f);
    }
  }
  return m;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    EVP_DigestUpdate(ctx, buf, static_cast<size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    char b[3];
    std::snprintf(b, sizeof(b), "%02x", digest[i]);
    hex += b;
  }
  return hex;
}

namespace {

std::string sample_id(size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06zu", i);
  return buf;
}

json pose_to_json(const Pose& p) {
  json j;
  std::vector<double> r(9);
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 3; ++c) r[static_cast<size_t>(3 * i + c)] = p.rotation(i, c);
  j["rotation"] = r;
  j["translation"] = {p.translation.x(), p.translation.y(), p.translation.z()};
  j["size"] = {p.size.x(), p.size.y(), p.size.z()};
  return j;
}

Pose pose_from_json(const json& j) {
  Pose p;
  const auto r = j.at("rotation").get<std::vector<double>>();
  if (r.size() != 9) throw std::runtime_error("manifest: bad rotation");
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 3; ++c) p.rotation(i, c) = r[static_cast<size_t>(3 * i + c)];
  const auto t = j.at("translation").get<std::vector<double>>();
  const auto s = j.at("size").get<std::vector<double>>();
  if (t.size() != 3 || s.size() != 3) throw std::runtime_error("manifest: bad pose vectors");
  p.translation = Vec3(t[0], t[1], t[2]);
  p.size = Vec3(s[0], s[1], s[2]);
  return p;
}

}  // namespace

void write_dataset(const std::vector<Sample>& samples, const std::string& dir, int n_points,
                   uint64_t base_seed) {
  fs::create_directories(fs::path(dir) / "samples");
  json manifest;
  manifest["version"] = "mkpose-dataset/1";
  manifest["count"] = samples.size();
  manifest["n_points"] = n_points;
  manifest["base_seed"] = base_seed;
  manifest["samples"] = json::array();

  for (size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    const std::string id = sample_id(i);
    const std::string points_rel = "samples/" + id + ".points.f32";
    const std::string nocs_rel = "samples/" + id + ".nocs.f32";
    write_f32_file((fs::path(dir) / points_rel).string(), s.points);
    write_f32_file((fs::path(dir) / nocs_rel).string(), s.gt_nocs);

    json rec;
    rec["id"] = id;
    rec["category_id"] = s.category_id;
    rec["category"] = default_categories()[static_cast<size_t>(s.category_id)].name;
    rec["seed"] = s.seed;
    rec["handle_visible"] = s.handle_visible;
    rec["pose"] = pose_to_json(s.gt_pose);
    rec["points_file"] = points_rel;
    rec["points_shape"] = {s.points.rows(), s.points.cols()};
    rec["points_sha256"] = sha256_file((fs::path(dir) / points_rel).string());
    rec["nocs_file"] = nocs_rel;
    rec["nocs_shape"] = {s.gt_nocs.rows(), s.gt_nocs.cols()};
    rec["nocs_sha256"] = sha256_file((fs::path(dir) / nocs_rel).string());
    manifest["samples"].push_back(rec);
  }

  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

std::vector<Sample> read_dataset(const std::string& dir, DatasetMeta* meta) {
  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("missing manifest: " + manifest_path.string());
  json manifest = json::parse(in);
  if (manifest.at("version").get<std::string>() != "mkpose-dataset/1")
    throw std::runtime_error("unsupported dataset version");

  const int n_points = manifest.at("n_points").get<int>();
  std::vector<Sample> samples;
  for (const auto& rec : manifest.at("samples")) {
    const std::string id = rec.at("id").get<std::string>();
    Sample s;
    s.category_id = rec.at("category_id").get<int>();
    s.seed = rec.at("seed").get<uint64_t>();
    s.handle_visible = rec.at("handle_visible").get<bool>();
    s.gt_pose = pose_from_json(rec.at("pose"));

    auto load = [&](const char* file_key, const char* shape_key, const char* sha_key) {
      const std::string rel = rec.at(file_key).get<std::string>();
      const auto shape = rec.at(shape_key).get<std::vector<int>>();
      const std::string path = (fs::path(dir) / rel).string();
      MatX m;
      try {
        m = read_f32_file(path, shape.at(0), shape.at(1));
      } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string(e.what()) + " for sample " + id);
      }
      if (sha256_file(path) != rec.at(sha_key).get<std::string>())
        throw std::runtime_error("checksum mismatch for sample " + id);
      return m;
    };
    s.points = load("points_file", "points_shape", "points_sha256");
    s.gt_nocs = load("nocs_file", "nocs_shape", "nocs_sha256");
    samples.push_back(std::move(s));
  }
  if (meta) {
    meta->n_points = n_points;
    meta->count = static_cast<int>(samples.size());
    meta->base_seed = manifest.value("base_seed", static_cast<uint64_t>(0));
  }
  return samples;
}

}  // namespace mkpose::datagen
