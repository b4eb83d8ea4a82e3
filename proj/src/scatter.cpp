#include "isac/scatter.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

#include "isac/green.hpp"

namespace isac {

VoxelContrast make_sensing_grid(const SystemConfig& cfg, const Vec3& center) {
  VoxelContrast grid;
  grid.dims[0] = grid.dims[1] = grid.dims[2] = cfg.voxels_per_axis;
  grid.voxel_edge_m = cfg.domain_extent_m / cfg.voxels_per_axis;
  grid.origin_m = center - Vec3::Constant(0.5 * cfg.domain_extent_m);
  grid.chi.assign(grid.cell_count(), Cplx(0, 0));
  return grid;
}

namespace {

bool inside_box(const VoxelContrast& grid, const Vec3& p) {
  for (int a = 0; a < 3; ++a) {
    const double lo = grid.origin_m[a];
    const double hi = grid.origin_m[a] + grid.dims[a] * grid.voxel_edge_m;
    if (p[a] < lo || p[a] > hi) return false;
  }
  return true;
}

}  // namespace

void require_antennas_outside(const VoxelContrast& grid, const SystemConfig& cfg) {
  for (const auto& p : cfg.tx_antenna_positions) {
    if (inside_box(grid, p)) {
      throw std::invalid_argument("tx antenna lies inside the sensing cube");
    }
  }
  for (const auto& p : cfg.rx_antenna_positions) {
    if (inside_box(grid, p)) {
      throw std::invalid_argument("rx antenna lies inside the sensing cube");
    }
  }
}

FieldOnGrid incident_field(int tx_index, const SystemConfig& cfg,
                           const VoxelContrast& grid) {
  if (tx_index < 0 || tx_index >= cfg.n_tx) {
    throw std::invalid_argument("incident_field: tx index out of range");
  }
  const Vec3 r_m = cfg.tx_antenna_positions[tx_index];
  const double k = cfg.wavenumber();
  const double k2 = k * k;
  const double amp = std::sqrt(cfg.tx_gain) * cfg.source_amplitude;
  FieldOnGrid field = FieldOnGrid::zeros_like(grid);
  for (int iz = 0; iz < grid.dims[2]; ++iz) {
    for (int iy = 0; iy < grid.dims[1]; ++iy) {
      for (int ix = 0; ix < grid.dims[0]; ++ix) {
        const Vec3 r = grid.voxel_center(ix, iy, iz);
        const Vec3c e = amp * k2 * (dyadic_green(r, r_m, k) * cfg.tx_polarization);
        field.set(grid.index(ix, iy, iz), e);
      }
    }
  }
  return field;
}

Vec3c scattered_field_at(const VoxelContrast& grid, const FieldOnGrid& total_field,
                         const Vec3& rx_point, const SystemConfig& cfg) {
  if (inside_box(grid, rx_point)) {
    throw std::invalid_argument("scattered_field_at: receiver inside sensing cube");
  }
  const double k = cfg.wavenumber();
  const double k2dv = k * k * grid.voxel_volume();
  Vec3c acc = Vec3c::Zero();
  // fixed x-fastest summation order keeps results bit-stable
  for (int iz = 0; iz < grid.dims[2]; ++iz) {
    for (int iy = 0; iy < grid.dims[1]; ++iy) {
      for (int ix = 0; ix < grid.dims[0]; ++ix) {
        const std::size_t cell = grid.index(ix, iy, iz);
        const Cplx chi = grid.chi[cell];
        if (chi == Cplx(0, 0)) continue;
        const Vec3 r_src = grid.voxel_center(ix, iy, iz);
        acc += dyadic_green(rx_point, r_src, k) * (chi * total_field.at(cell));
      }
    }
  }
  return k2dv * acc;
}

ChannelMatrix synthesize_channel(const VoxelContrast& grid, const SystemConfig& cfg,
                                 const SynthesisOptions& opt) {
  require_antennas_outside(grid, cfg);
  ChannelMatrix h = ChannelMatrix::Zero(cfg.n_rx, cfg.n_tx);

  int workers = opt.threads > 0 ? opt.threads
                                : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = std::min(workers, cfg.n_tx);

  std::atomic<int> next_tx{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));

  auto worker = [&](int wid) {
    try {
      // per-thread operator: the FFT kernel holds scratch state
      LsOperator op(grid, cfg.wavenumber());
      while (true) {
        const int m = next_tx.fetch_add(1);
        if (m >= cfg.n_tx) break;
        const FieldOnGrid e_inc = incident_field(m, cfg, grid);
        FieldOnGrid e_use = e_inc;
        if (opt.mode == ScatterMode::kFull) {
          auto [e_tot, report] =
              solve_total_field(op, grid, e_inc, opt.solver_tol, opt.solver_max_iter);
          (void)report;
          e_use = std::move(e_tot);
        }
        for (int n = 0; n < cfg.n_rx; ++n) {
          const Vec3c es =
              scattered_field_at(grid, e_use, cfg.rx_antenna_positions[n], cfg);
          h(n, m) = cfg.rx_gain * (cfg.rx_polarization.cast<Cplx>().transpose() * es)(0);
        }
      }
    } catch (...) {
      errors[static_cast<std::size_t>(wid)] = std::current_exception();
    }
  };

  if (workers == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker, w);
    for (auto& th : pool) th.join();
  }
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return h;
}

}  // namespace isac
