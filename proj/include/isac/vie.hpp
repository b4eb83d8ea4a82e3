#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "isac/types.hpp"

namespace isac {

// Complex 3-component electric field sampled at voxel centers.
struct FieldOnGrid {
  int dims[3] = {0, 0, 0};
  double voxel_edge_m = 0.0;
  Vec3 origin_m = Vec3::Zero();
  std::array<std::vector<Cplx>, 3> comp;  // x-fastest storage per component

  static FieldOnGrid zeros_like(const VoxelContrast& grid);
  std::size_t cell_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int ix, int iy, int iz) const {
    return static_cast<std::size_t>(ix) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(iy) +
                static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(iz));
  }
  Vec3c at(std::size_t cell) const {
    return Vec3c(comp[0][cell], comp[1][cell], comp[2][cell]);
  }
  void set(std::size_t cell, const Vec3c& v) {
    comp[0][cell] = v[0];
    comp[1][cell] = v[1];
    comp[2][cell] = v[2];
  }
};

struct SolveReport {
  int iterations = 0;
  double final_relative_residual = 0.0;
  bool converged = false;
};

// Discretized Lippmann-Schwinger operator A[E] = E - k^2 Conv[chi .* E] on a
// regular voxel grid (pulse basis, point matching, weak-form self cell). The
// block-Toeplitz volume convolution is evaluated through a zero-padded 3D FFT
// whose dyadic kernel spectra are precomputed at construction.
//
// Instances hold FFT scratch state: share one per thread, not across threads.
class LsOperator {
 public:
  LsOperator(const VoxelContrast& grid, double k_b);
  ~LsOperator();
  LsOperator(const LsOperator&) = delete;
  LsOperator& operator=(const LsOperator&) = delete;

  // out = Conv[u]: off-diagonal Toeplitz sum via FFT plus the self term.
  void convolve(const FieldOnGrid& u, FieldOnGrid& out) const;

  // out = in - k^2 * Conv[chi .* in]; chi must match the construction grid.
  void apply(const VoxelContrast& grid, const FieldOnGrid& in, FieldOnGrid& out) const;

  double wavenumber() const { return k_b_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  double k_b_ = 0.0;
};

// One-shot convenience wrapper over LsOperator:
//   returns field - k^2 * Conv[chi .* field].
// Builds the FFT kernel on every call; use LsOperator directly in loops.
FieldOnGrid apply_ls_operator(const VoxelContrast& grid, const FieldOnGrid& field,
                              double k_b);

// Unpreconditioned BiCGStab on an abstract operator over flattened complex
// vectors. Returns the iterate and a report with the true relative residual.
std::pair<std::vector<Cplx>, SolveReport> bicgstab(
    const std::function<void(const std::vector<Cplx>&, std::vector<Cplx>&)>& apply,
    const std::vector<Cplx>& rhs, double tol, int max_iter);

// Solves A[E] = E_incident for the total field with the operator above.
// Throws std::runtime_error when max_iter is exhausted without convergence.
std::pair<FieldOnGrid, SolveReport> solve_total_field(const VoxelContrast& grid,
                                                      const FieldOnGrid& incident,
                                                      double k_b, double tol = 1e-6,
                                                      int max_iter = 500);

// Same, reusing a prebuilt operator.
std::pair<FieldOnGrid, SolveReport> solve_total_field(const LsOperator& op,
                                                      const VoxelContrast& grid,
                                                      const FieldOnGrid& incident,
                                                      double tol = 1e-6,
                                                      int max_iter = 500);

}  // namespace isac
