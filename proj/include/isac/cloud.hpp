#pragma once

#include <string>
#include <vector>

#include "isac/types.hpp"

namespace isac {

// Complex contrast eps_r - j*sigma/(eps0*omega) - 1 of a passive medium
// against air, under the e^{-j omega t} convention. Throws std::domain_error
// for unphysical inputs (eps_r < 1 or sigma < 0).
Cplx contrast_of(double eps_r, double sigma_s_per_m, double omega);

struct NormalizeOptions {
  // Default: per-axis population standard deviation as characteristic length.
  bool use_std = true;
  // Fixed per-axis scale; used for all axes when use_std is false, and as the
  // fallback for axes whose std is below the degeneracy threshold.
  double fixed_scale_m = 0.0;
};

// Maps physical points to the normalized non-dimensional 5D representation.
// Throws std::invalid_argument on fewer than 2 points and std::domain_error
// on a degenerate axis without a configured fallback scale.
PointCloud5D normalize_cloud(const std::vector<PhysicalPoint>& pts, double omega,
                             const NormalizeOptions& opt = {});

// Exact algebraic inverse of normalize_cloud given the stored center/scale.
std::vector<PhysicalPoint> denormalize_cloud(const PointCloud5D& cloud, double omega);

// CSV interchange: header "x,y,z,eps_r,sigma_S_per_m", one point per row,
// full f64 round-trip precision.
void write_cloud_csv(const std::string& path, const std::vector<PhysicalPoint>& pts);
std::vector<PhysicalPoint> read_cloud_csv(const std::string& path);

// ASCII PLY with two extra scalar properties, for point cloud viewers.
void write_cloud_ply(const std::string& path, const std::vector<PhysicalPoint>& pts);

}  // namespace isac
