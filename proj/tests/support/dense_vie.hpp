#pragma once

// Dense reference assembly of the discretized volume-integral operator,
// kept independent of the FFT-accelerated implementation path: the full
// 3V x 3V matrix is built entry by entry from the pointwise Green kernel
// and applied/solved with dense linear algebra.

#include <Eigen/Dense>

#include "isac/green.hpp"
#include "isac/types.hpp"
#include "isac/vie.hpp"

namespace isac::testing {

// Layout matches the solver's flattened fields: component-major, x-fastest.
inline Eigen::MatrixXcd assemble_dense_operator(const VoxelContrast& grid, double k_b) {
  const int vcount = static_cast<int>(grid.cell_count());
  const double dv = grid.voxel_volume();
  const Cplx self = vie_self_term(k_b, dv);
  const Cplx k2(k_b * k_b, 0.0);

  Eigen::MatrixXcd a = Eigen::MatrixXcd::Identity(3 * vcount, 3 * vcount);
  std::vector<Vec3> centers(static_cast<std::size_t>(vcount));
  int v = 0;
  for (int iz = 0; iz < grid.dims[2]; ++iz) {
    for (int iy = 0; iy < grid.dims[1]; ++iy) {
      for (int ix = 0; ix < grid.dims[0]; ++ix) {
        centers[static_cast<std::size_t>(v++)] = grid.voxel_center(ix, iy, iz);
      }
    }
  }
  for (int row = 0; row < vcount; ++row) {
    for (int col = 0; col < vcount; ++col) {
      const Cplx chi = grid.chi[static_cast<std::size_t>(col)];
      Mat3c kernel;
      if (row == col) {
        kernel = self * Mat3c::Identity();
      } else {
        kernel = dv * dyadic_green(centers[static_cast<std::size_t>(row)],
                                   centers[static_cast<std::size_t>(col)], k_b);
      }
      for (int ci = 0; ci < 3; ++ci) {
        for (int cj = 0; cj < 3; ++cj) {
          a(ci * vcount + row, cj * vcount + col) -= k2 * kernel(ci, cj) * chi;
        }
      }
    }
  }
  return a;
}

inline Eigen::VectorXcd flatten_field(const FieldOnGrid& f) {
  const int vcount = static_cast<int>(f.cell_count());
  Eigen::VectorXcd v(3 * vcount);
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < vcount; ++i) {
      v[c * vcount + i] = f.comp[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
    }
  }
  return v;
}

inline FieldOnGrid unflatten_field(const Eigen::VectorXcd& v, const VoxelContrast& grid) {
  FieldOnGrid f = FieldOnGrid::zeros_like(grid);
  const int vcount = static_cast<int>(grid.cell_count());
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < vcount; ++i) {
      f.comp[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)] = v[c * vcount + i];
    }
  }
  return f;
}

}  // namespace isac::testing
