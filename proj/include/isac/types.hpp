#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace isac {

using Cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using Vec3c = Eigen::Vector3cd;
using Mat3c = Eigen::Matrix3cd;

// Complex N_r x N_t sensing channel (rows = receive antennas).
using ChannelMatrix = Eigen::MatrixXcd;

// One normalized non-dimensional point: x, y, z, eps_r, sigma/(eps0*omega).
using Point5D = Eigen::Matrix<double, 5, 1>;

// One physical point: x, y, z in meters, eps_r, sigma in S/m.
struct PhysicalPoint {
  double x = 0, y = 0, z = 0;
  double eps_r = 1.0;
  double sigma = 0.0;
};

// Normalized 5D point cloud together with the affine map back to meters.
struct PointCloud5D {
  std::vector<Point5D> points;
  Vec3 center_m = Vec3::Zero();  // per-axis normalization center
  Vec3 scale_m = Vec3::Ones();   // per-axis characteristic length, > 0

  std::size_t size() const { return points.size(); }
};

// Complex contrast on a regular voxel grid over the sensing cube.
struct VoxelContrast {
  int dims[3] = {0, 0, 0};
  double voxel_edge_m = 0.0;
  Vec3 origin_m = Vec3::Zero();  // corner of the grid (not a voxel center)
  std::vector<Cplx> chi;         // x-fastest storage

  std::size_t cell_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int ix, int iy, int iz) const {
    return static_cast<std::size_t>(ix) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(iy) +
                static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(iz));
  }
  Vec3 voxel_center(int ix, int iy, int iz) const {
    return origin_m + voxel_edge_m * Vec3(ix + 0.5, iy + 0.5, iz + 0.5);
  }
  double voxel_volume() const { return voxel_edge_m * voxel_edge_m * voxel_edge_m; }
};

}  // namespace isac
