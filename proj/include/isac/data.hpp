#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "isac/cloud.hpp"
#include "isac/config.hpp"
#include "isac/rng.hpp"
#include "isac/scatter.hpp"
#include "isac/types.hpp"

namespace isac {

struct TargetPrimitive {
  enum class Kind { kSphere, kBox, kEllipsoid };
  Kind kind = Kind::kSphere;
  Vec3 half_sizes = Vec3::Constant(0.2);  // radius / half extents / semi-axes
  Vec3 offset = Vec3::Zero();             // placement within the target frame
};

// Parametric target: union of up to a few primitives with one EM property,
// rotated and placed in the sensing sector.
struct TargetSpec {
  std::vector<TargetPrimitive> primitives;
  double eps_r = 2.0;
  double sigma = 0.0;  // S/m
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 center = Vec3::Zero();

  // Inside test in world coordinates.
  bool contains(const Vec3& point_world) const;
  // Inside test in the (unrotated) target frame; exact under translation.
  bool contains_local(const Vec3& point_local) const;
};

struct DataGenConfig {
  double eps_min = 1.5, eps_max = 5.0;        // artifact defaults, not from the system model
  double sigma_min = 0.0, sigma_max = 0.05;   // S/m
  double min_center_radius_m = 2.0;           // keeps the cube clear of the arrays
  double min_half_fraction = 0.4;             // of the size budget; smaller features
                                              // fall below the voxel resolution
  int cloud_points = 128;
  bool multi_primitive = true;                // allow unions of up to 3 primitives
  std::optional<Vec3> fixed_center;           // overrides sector placement when set
};

TargetSpec generate_target(const SystemConfig& cfg, const DataGenConfig& gen, Rng& rng);

// N points uniform on the union surface, carrying the target's EM property;
// normalized per the 5D map (std scale, cube-half fallback).
PointCloud5D sample_points(const TargetSpec& spec, int n_points, double omega, Rng& rng);

// Voxel contrast on the sensing cube centered at spec.center. The inside test
// runs in target-local coordinates, so translating the target translates the
// filled-voxel pattern exactly.
VoxelContrast rasterize(const TargetSpec& spec, const SystemConfig& cfg);

struct DatasetRecord {
  int id = 0;
  PointCloud5D cloud;
  ChannelMatrix h_s;
  ChannelMatrix h_s_ref;
  Vec3 center_m = Vec3::Zero();
  double eps_r = 0.0;
  double sigma = 0.0;
  std::uint64_t config_fingerprint = 0;
};

struct DatasetSplits {
  std::vector<int> train, test, val;
  std::vector<int> quarantined;
};

struct Dataset {
  std::vector<DatasetRecord> records;
  DatasetSplits splits;
  std::uint64_t config_fingerprint = 0;

  std::vector<DatasetRecord> subset(const std::vector<int>& ids) const;
};

// Deterministic 80/10/10 split: records ordered by a hash of their id, counts
// rounded from the ratios. Depends only on the id set.
DatasetSplits split_dataset(const std::vector<int>& record_ids);

struct BuildDatasetOptions {
  int n_records = 64;
  std::uint64_t seed = 1;
  SynthesisOptions synthesis;
  DataGenConfig gen;
};

// Generates records (target -> cloud -> H_s at its pose, H_s^r at the
// reference location) and persists them under dir/records/ plus manifest.txt.
// Solver failures quarantine the record instead of aborting.
Dataset build_dataset(const std::string& dir, const SystemConfig& cfg,
                      const std::string& config_path,
                      const BuildDatasetOptions& opt);

Dataset load_dataset(const std::string& dir, double omega);

// i.i.d. CSCG UE channels with pathloss G_t G_r lambda^2 / (4 pi d)^2 at a
// distance drawn uniformly from [d_min, d_max] per UE.
std::vector<Eigen::VectorXcd> draw_comm_channels(int n_ue, const SystemConfig& cfg,
                                                 Rng& rng, double d_min = 50.0,
                                                 double d_max = 150.0,
                                                 std::vector<double>* distances = nullptr);

}  // namespace isac
