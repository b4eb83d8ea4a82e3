#pragma once

#include "isac/config.hpp"
#include "isac/types.hpp"
#include "isac/vie.hpp"

namespace isac {

enum class ScatterMode {
  kFull,  // total field from the volume-integral-equation solve
  kBorn,  // first Born approximation: total field replaced by incident field
};

// Empty contrast grid for the sensing cube centered at `center`.
VoxelContrast make_sensing_grid(const SystemConfig& cfg, const Vec3& center);

// Throws std::invalid_argument when any antenna lies inside the grid box.
void require_antennas_outside(const VoxelContrast& grid, const SystemConfig& cfg);

// Field of transmit antenna `tx_index` at every voxel center:
// sqrt(G_t) * amplitude * k^2 * G(r, r_m) * p_t.
FieldOnGrid incident_field(int tx_index, const SystemConfig& cfg,
                           const VoxelContrast& grid);

// Scattered field radiated to an exterior observation point by midpoint
// quadrature over the voxel currents chi * E.
Vec3c scattered_field_at(const VoxelContrast& grid, const FieldOnGrid& total_field,
                         const Vec3& rx_point, const SystemConfig& cfg);

struct SynthesisOptions {
  ScatterMode mode = ScatterMode::kFull;
  double solver_tol = 1e-6;
  int solver_max_iter = 500;
  int threads = 0;  // 0 = hardware concurrency
};

// Ground-truth target echo channel: entry (n, m) is the rx polarization
// projection (times G_r) of the field scattered back to receive antenna n
// under unit excitation of transmit antenna m. The target-independent direct
// path is excluded. Independent solves per transmit antenna, so the result
// does not depend on the worker count.
ChannelMatrix synthesize_channel(const VoxelContrast& grid, const SystemConfig& cfg,
                                 const SynthesisOptions& opt = {});

}  // namespace isac
