#include "isac/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "isac/constants.hpp"
#include "isac/io.hpp"

namespace fs = std::filesystem;

namespace isac {

namespace {

double bounding_radius(const TargetPrimitive& p) {
  switch (p.kind) {
    case TargetPrimitive::Kind::kSphere:
      return p.half_sizes[0];
    case TargetPrimitive::Kind::kBox:
      return p.half_sizes.norm();
    case TargetPrimitive::Kind::kEllipsoid:
      return p.half_sizes.maxCoeff();
  }
  return 0.0;
}

bool primitive_contains(const TargetPrimitive& p, const Vec3& q_frame) {
  const Vec3 q = q_frame - p.offset;
  switch (p.kind) {
    case TargetPrimitive::Kind::kSphere:
      return q.squaredNorm() <= p.half_sizes[0] * p.half_sizes[0];
    case TargetPrimitive::Kind::kBox:
      return std::abs(q[0]) <= p.half_sizes[0] && std::abs(q[1]) <= p.half_sizes[1] &&
             std::abs(q[2]) <= p.half_sizes[2];
    case TargetPrimitive::Kind::kEllipsoid: {
      const Vec3 r = q.cwiseQuotient(p.half_sizes);
      return r.squaredNorm() <= 1.0;
    }
  }
  return false;
}

double primitive_area(const TargetPrimitive& p) {
  const Vec3& h = p.half_sizes;
  switch (p.kind) {
    case TargetPrimitive::Kind::kSphere:
      return 4.0 * kPi * h[0] * h[0];
    case TargetPrimitive::Kind::kBox:
      return 8.0 * (h[0] * h[1] + h[1] * h[2] + h[2] * h[0]);
    case TargetPrimitive::Kind::kEllipsoid: {
      // Thomsen's approximation, ample for area-weighted sampling
      const double e = 1.6075;
      const double s = (std::pow(h[0] * h[1], e) + std::pow(h[1] * h[2], e) +
                        std::pow(h[0] * h[2], e)) /
                       3.0;
      return 4.0 * kPi * std::pow(s, 1.0 / e);
    }
  }
  return 0.0;
}

Vec3 sample_unit_sphere(Rng& rng) {
  while (true) {
    const Vec3 v(rng.gauss(), rng.gauss(), rng.gauss());
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

Vec3 sample_primitive_surface(const TargetPrimitive& p, Rng& rng) {
  switch (p.kind) {
    case TargetPrimitive::Kind::kSphere:
      return p.offset + p.half_sizes[0] * sample_unit_sphere(rng);
    case TargetPrimitive::Kind::kBox: {
      const Vec3& h = p.half_sizes;
      const double axy = h[0] * h[1];
      const double ayz = h[1] * h[2];
      const double azx = h[2] * h[0];
      const double total = axy + ayz + azx;
      const double pick = rng.uniform() * total;
      int fixed_axis = pick < ayz ? 0 : (pick < ayz + azx ? 1 : 2);
      Vec3 q;
      const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
      for (int a = 0; a < 3; ++a) q[a] = rng.uniform(-h[a], h[a]);
      q[fixed_axis] = side * h[fixed_axis];
      return p.offset + q;
    }
    case TargetPrimitive::Kind::kEllipsoid: {
      const Vec3& h = p.half_sizes;
      const double m_max =
          std::max({h[1] * h[2], h[0] * h[2], h[0] * h[1]});
      while (true) {
        const Vec3 u = sample_unit_sphere(rng);
        const double m = std::sqrt(
            std::pow(h[1] * h[2] * u[0], 2) + std::pow(h[0] * h[2] * u[1], 2) +
            std::pow(h[0] * h[1] * u[2], 2));
        if (rng.uniform() * m_max <= m) return p.offset + u.cwiseProduct(h);
      }
    }
  }
  return p.offset;
}

Eigen::Matrix3d random_rotation(Rng& rng) {
  // uniform rotation via a normalized random quaternion
  double q[4];
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& v : q) {
      v = rng.gauss();
      norm2 += v * v;
    }
  } while (norm2 < 1e-12);
  const double inv = 1.0 / std::sqrt(norm2);
  const double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

}  // namespace

bool TargetSpec::contains_local(const Vec3& point_local) const {
  const Vec3 q = rotation.transpose() * point_local;
  for (const auto& p : primitives) {
    if (primitive_contains(p, q)) return true;
  }
  return false;
}

bool TargetSpec::contains(const Vec3& point_world) const {
  return contains_local(point_world - center);
}

TargetSpec generate_target(const SystemConfig& cfg, const DataGenConfig& gen, Rng& rng) {
  TargetSpec spec;
  const double max_radius = 0.49 * cfg.domain_extent_m;

  const int count = gen.multi_primitive ? 1 + static_cast<int>(rng.index(3)) : 1;
  for (int i = 0; i < count; ++i) {
    TargetPrimitive prim;
    const int kind = static_cast<int>(rng.index(3));
    prim.kind = kind == 0   ? TargetPrimitive::Kind::kSphere
                : kind == 1 ? TargetPrimitive::Kind::kBox
                            : TargetPrimitive::Kind::kEllipsoid;
    const double budget = count == 1 ? max_radius : 0.55 * max_radius;
    for (int a = 0; a < 3; ++a) {
      prim.half_sizes[a] = rng.uniform(gen.min_half_fraction * budget, budget);
    }
    if (prim.kind == TargetPrimitive::Kind::kSphere) {
      prim.half_sizes = Vec3::Constant(prim.half_sizes[0]);
    }
    if (prim.kind == TargetPrimitive::Kind::kBox) {
      // keep the rotated box inside the max radius
      const double r = prim.half_sizes.norm();
      if (r > budget) prim.half_sizes *= budget / r;
    }
    if (count > 1) {
      const double room = max_radius - bounding_radius(prim);
      prim.offset = rng.uniform(0.0, std::max(0.0, room)) * sample_unit_sphere(rng);
    }
    spec.primitives.push_back(prim);
  }

  spec.eps_r = rng.uniform(gen.eps_min, gen.eps_max);
  spec.sigma = rng.uniform(gen.sigma_min, gen.sigma_max);
  spec.rotation = random_rotation(rng);

  if (gen.fixed_center) {
    spec.center = *gen.fixed_center;
  } else {
    const double r_min = gen.min_center_radius_m;
    const double r_max = cfg.sensing_sector.radius_m;
    const double u = rng.uniform();
    const double r = std::sqrt(r_min * r_min + u * (r_max * r_max - r_min * r_min));
    const double half = cfg.sensing_sector.half_angle_deg * kPi / 180.0;
    const double angle = rng.uniform(-half, half);
    spec.center = Vec3(r * std::cos(angle), r * std::sin(angle), 0.0);
  }
  return spec;
}

PointCloud5D sample_points(const TargetSpec& spec, int n_points, double omega, Rng& rng) {
  if (n_points < 2) throw std::invalid_argument("sample_points: need at least 2 points");
  if (spec.primitives.empty()) throw std::invalid_argument("sample_points: empty target");

  std::vector<double> areas;
  double total_area = 0.0;
  for (const auto& p : spec.primitives) {
    areas.push_back(primitive_area(p));
    total_area += areas.back();
  }

  std::vector<PhysicalPoint> pts;
  pts.reserve(static_cast<std::size_t>(n_points));
  while (static_cast<int>(pts.size()) < n_points) {
    double pick = rng.uniform() * total_area;
    std::size_t which = 0;
    while (which + 1 < areas.size() && pick >= areas[which]) {
      pick -= areas[which];
      ++which;
    }
    Vec3 q = sample_primitive_surface(spec.primitives[which], rng);
    // a union's surface excludes points buried inside another primitive
    bool interior = false;
    for (std::size_t j = 0; j < spec.primitives.size() && !interior; ++j) {
      if (j == which) continue;
      interior = primitive_contains(spec.primitives[j], q);
    }
    static constexpr int kMaxRejects = 64;
    int rejects = 0;
    while (interior && ++rejects < kMaxRejects) {
      q = sample_primitive_surface(spec.primitives[which], rng);
      interior = false;
      for (std::size_t j = 0; j < spec.primitives.size() && !interior; ++j) {
        if (j == which) continue;
        interior = primitive_contains(spec.primitives[j], q);
      }
    }
    const Vec3 world = spec.rotation * q + spec.center;
    PhysicalPoint p;
    p.x = world[0];
    p.y = world[1];
    p.z = world[2];
    p.eps_r = spec.eps_r;
    p.sigma = spec.sigma;
    pts.push_back(p);
  }

  double extent = 0.0;
  for (const auto& p : spec.primitives) {
    extent = std::max(extent, p.offset.norm() + bounding_radius(p));
  }
  NormalizeOptions opt;
  opt.fixed_scale_m = std::max(0.5 * extent, 1e-6);  // fallback for flat targets
  return normalize_cloud(pts, omega, opt);
}

VoxelContrast rasterize(const TargetSpec& spec, const SystemConfig& cfg) {
  VoxelContrast grid = make_sensing_grid(cfg, spec.center);
  const Cplx chi = contrast_of(spec.eps_r, spec.sigma, cfg.omega());
  const double edge = grid.voxel_edge_m;
  const double half = 0.5 * cfg.domain_extent_m;
  for (int iz = 0; iz < grid.dims[2]; ++iz) {
    for (int iy = 0; iy < grid.dims[1]; ++iy) {
      for (int ix = 0; ix < grid.dims[0]; ++ix) {
        // local offsets only: the pattern is exactly translation invariant
        const Vec3 local(edge * (ix + 0.5) - half, edge * (iy + 0.5) - half,
                         edge * (iz + 0.5) - half);
        if (spec.contains_local(local)) grid.chi[grid.index(ix, iy, iz)] = chi;
      }
    }
  }
  return grid;
}

DatasetSplits split_dataset(const std::vector<int>& record_ids) {
  std::vector<int> ids = record_ids;
  std::sort(ids.begin(), ids.end(), [](int a, int b) {
    const std::uint64_t ka = mix_seed(0x15AC5EEDULL, static_cast<std::uint64_t>(a));
    const std::uint64_t kb = mix_seed(0x15AC5EEDULL, static_cast<std::uint64_t>(b));
    return ka != kb ? ka < kb : a < b;
  });
  const std::size_t n = ids.size();
  const std::size_t n_train = static_cast<std::size_t>(std::floor(0.8 * n + 0.5));
  const std::size_t n_test = static_cast<std::size_t>(std::floor(0.1 * n + 0.5));
  DatasetSplits splits;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train) {
      splits.train.push_back(ids[i]);
    } else if (i < n_train + n_test) {
      splits.test.push_back(ids[i]);
    } else {
      splits.val.push_back(ids[i]);
    }
  }
  std::sort(splits.train.begin(), splits.train.end());
  std::sort(splits.test.begin(), splits.test.end());
  std::sort(splits.val.begin(), splits.val.end());
  return splits;
}

std::vector<DatasetRecord> Dataset::subset(const std::vector<int>& ids) const {
  std::vector<DatasetRecord> out;
  for (int id : ids) {
    for (const auto& r : records) {
      if (r.id == id) {
        out.push_back(r);
        break;
      }
    }
  }
  return out;
}

namespace {

std::string record_stem(const std::string& dir, int id) {
  std::ostringstream name;
  name << dir << "/records/" << std::setw(6) << std::setfill('0') << id;
  return name.str();
}

void write_meta(const std::string& path, const DatasetRecord& rec) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::setprecision(17);
  out << "center = " << rec.center_m[0] << "," << rec.center_m[1] << ","
      << rec.center_m[2] << "\n";
  out << "scale = " << rec.cloud.scale_m[0] << "," << rec.cloud.scale_m[1] << ","
      << rec.cloud.scale_m[2] << "\n";
  out << "eps_r = " << rec.eps_r << "\n";
  out << "sigma = " << rec.sigma << "\n";
  out << "config_fingerprint = " << rec.config_fingerprint << "\n";
}

Vec3 parse_triple(const std::string& s) {
  std::istringstream in(s);
  Vec3 v;
  char c;
  if (!(in >> v[0] >> c >> v[1] >> c >> v[2])) {
    throw std::runtime_error("malformed triple: " + s);
  }
  return v;
}

}  // namespace

Dataset build_dataset(const std::string& dir, const SystemConfig& cfg,
                      const std::string& config_path, const BuildDatasetOptions& opt) {
  fs::create_directories(dir + "/records");
  const std::uint64_t fingerprint = file_fingerprint(config_path);

  std::vector<int> kept;
  DatasetSplits splits;
  Rng master(opt.seed);
  for (int id = 0; id < opt.n_records; ++id) {
    Rng rec_rng = master.derive(static_cast<std::uint64_t>(id));
    Rng rng_spec = rec_rng.derive(1);
    Rng rng_cloud = rec_rng.derive(2);
    TargetSpec spec = generate_target(cfg, opt.gen, rng_spec);
    try {
      const PointCloud5D cloud = sample_points(spec, opt.gen.cloud_points, cfg.omega(), rng_cloud);
      const VoxelContrast grid = rasterize(spec, cfg);
      const ChannelMatrix h_s = synthesize_channel(grid, cfg, opt.synthesis);

      TargetSpec ref_spec = spec;
      ref_spec.center = cfg.reference_location;
      const VoxelContrast ref_grid = rasterize(ref_spec, cfg);
      const ChannelMatrix h_ref = synthesize_channel(ref_grid, cfg, opt.synthesis);

      const std::string stem = record_stem(dir, id);
      write_cloud_csv(stem + ".csv", denormalize_cloud(cloud, cfg.omega()));
      save_channel(stem + ".chan", h_s);
      save_channel(stem + ".chanref", h_ref);
      DatasetRecord rec;
      rec.id = id;
      rec.cloud = cloud;
      rec.center_m = cloud.center_m;
      rec.eps_r = spec.eps_r;
      rec.sigma = spec.sigma;
      rec.config_fingerprint = fingerprint;
      write_meta(stem + ".meta", rec);
      kept.push_back(id);
    } catch (const std::exception& err) {
      std::cerr << "record " << id << " quarantined: " << err.what() << "\n";
      splits.quarantined.push_back(id);
    }
  }

  const DatasetSplits computed = split_dataset(kept);
  splits.train = computed.train;
  splits.test = computed.test;
  splits.val = computed.val;

  std::ofstream manifest(dir + "/manifest.txt");
  if (!manifest) throw std::runtime_error("cannot write dataset manifest");
  manifest << "config_fingerprint = " << fingerprint << "\n";
  manifest << "record_count = " << kept.size() << "\n";
  auto write_ids = [&manifest](const char* key, const std::vector<int>& ids) {
    manifest << key << " =";
    for (int id : ids) manifest << ' ' << id;
    manifest << "\n";
  };
  write_ids("train", splits.train);
  write_ids("test", splits.test);
  write_ids("val", splits.val);
  write_ids("quarantined", splits.quarantined);
  manifest.close();

  return load_dataset(dir, cfg.omega());
}

Dataset load_dataset(const std::string& dir, double omega) {
  if (omega <= 0.0) throw std::invalid_argument("load_dataset: omega must be positive");
  Dataset ds;
  const auto kv = read_keyvalue_file(dir + "/manifest.txt");
  auto parse_ids = [&kv](const char* key) {
    std::vector<int> ids;
    auto it = kv.find(key);
    if (it == kv.end()) return ids;
    std::istringstream in(it->second);
    int v;
    while (in >> v) ids.push_back(v);
    return ids;
  };
  ds.splits.train = parse_ids("train");
  ds.splits.test = parse_ids("test");
  ds.splits.val = parse_ids("val");
  ds.splits.quarantined = parse_ids("quarantined");
  ds.config_fingerprint = std::stoull(kv.at("config_fingerprint"));

  std::vector<int> all_ids;
  all_ids.insert(all_ids.end(), ds.splits.train.begin(), ds.splits.train.end());
  all_ids.insert(all_ids.end(), ds.splits.test.begin(), ds.splits.test.end());
  all_ids.insert(all_ids.end(), ds.splits.val.begin(), ds.splits.val.end());
  std::sort(all_ids.begin(), all_ids.end());

  for (int id : all_ids) {
    const std::string stem = record_stem(dir, id);
    DatasetRecord rec;
    rec.id = id;
    const auto meta = read_keyvalue_file(stem + ".meta");
    rec.center_m = parse_triple(meta.at("center"));
    const Vec3 scale = parse_triple(meta.at("scale"));
    rec.eps_r = std::stod(meta.at("eps_r"));
    rec.sigma = std::stod(meta.at("sigma"));
    rec.config_fingerprint = std::stoull(meta.at("config_fingerprint"));
    rec.h_s = load_channel(stem + ".chan");
    rec.h_s_ref = load_channel(stem + ".chanref");

    const auto pts = read_cloud_csv(stem + ".csv");
    rec.cloud.center_m = rec.center_m;
    rec.cloud.scale_m = scale;
    rec.cloud.points.reserve(pts.size());
    const double sigma_norm = 1.0 / (kVacuumPermittivity * omega);
    for (const auto& p : pts) {
      Point5D q;
      q[0] = (p.x - rec.center_m[0]) / scale[0];
      q[1] = (p.y - rec.center_m[1]) / scale[1];
      q[2] = (p.z - rec.center_m[2]) / scale[2];
      q[3] = p.eps_r;
      q[4] = p.sigma * sigma_norm;
      rec.cloud.points.push_back(q);
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

std::vector<Eigen::VectorXcd> draw_comm_channels(int n_ue, const SystemConfig& cfg,
                                                 Rng& rng, double d_min, double d_max,
                                                 std::vector<double>* distances) {
  if (n_ue < 1) throw std::invalid_argument("draw_comm_channels: need K >= 1");
  std::vector<Eigen::VectorXcd> out;
  if (distances) distances->clear();
  const double lambda = cfg.wavelength_m;
  for (int k = 0; k < n_ue; ++k) {
    const double d = rng.uniform(d_min, d_max);
    const double pathloss =
        cfg.tx_gain * cfg.rx_gain * lambda * lambda / std::pow(4.0 * kPi * d, 2);
    Eigen::VectorXcd h(cfg.n_tx);
    for (int m = 0; m < cfg.n_tx; ++m) h[m] = rng.cgauss(pathloss);
    if (distances) distances->push_back(d);
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace isac
