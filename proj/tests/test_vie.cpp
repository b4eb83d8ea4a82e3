#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "isac/green.hpp"
#include "isac/rng.hpp"
#include "isac/scatter.hpp"
#include "isac/vie.hpp"
#include "support/dense_vie.hpp"
#include "support/util.hpp"

using namespace isac;
using isac::testing::assemble_dense_operator;
using isac::testing::flatten_field;
using isac::testing::make_test_config;
using isac::testing::unflatten_field;

namespace {

VoxelContrast uniform_grid(const SystemConfig& cfg, const Vec3& center, Cplx chi) {
  VoxelContrast grid = make_sensing_grid(cfg, center);
  for (auto& v : grid.chi) v = chi;
  return grid;
}

FieldOnGrid random_field(const VoxelContrast& grid, Rng& rng) {
  FieldOnGrid f = FieldOnGrid::zeros_like(grid);
  for (int c = 0; c < 3; ++c) {
    for (auto& v : f.comp[static_cast<std::size_t>(c)]) v = rng.cgauss();
  }
  return f;
}

}  // namespace

TEST_CASE("zero contrast reduces the operator to the identity") {
  const SystemConfig cfg = make_test_config(4, 4, 5);
  VoxelContrast grid = make_sensing_grid(cfg, Vec3(3, 0, 0));
  Rng rng(2);
  const FieldOnGrid f = random_field(grid, rng);
  const FieldOnGrid out = apply_ls_operator(grid, f, cfg.wavenumber());
  for (int c = 0; c < 3; ++c) {
    for (std::size_t v = 0; v < grid.cell_count(); ++v) {
      CHECK(out.comp[c][v] == f.comp[c][v]);
    }
  }
}

TEST_CASE("FFT operator equals dense assembly on a 6^3 grid") {
  const SystemConfig cfg = make_test_config(4, 4, 6);
  Rng rng(5);
  VoxelContrast grid = make_sensing_grid(cfg, Vec3(3, 0, 0));
  SUBCASE("uniform half contrast") {
    for (auto& v : grid.chi) v = Cplx(0.5, 0.0);
  }
  SUBCASE("random complex contrast") {
    for (auto& v : grid.chi) v = Cplx(rng.uniform(), -rng.uniform() * 0.2);
  }
  const Eigen::MatrixXcd dense = assemble_dense_operator(grid, cfg.wavenumber());
  const FieldOnGrid f = random_field(grid, rng);
  const FieldOnGrid fft_out = apply_ls_operator(grid, f, cfg.wavenumber());
  const Eigen::VectorXcd dense_out = dense * flatten_field(f);
  const Eigen::VectorXcd fft_vec = flatten_field(fft_out);
  const double rel = (fft_vec - dense_out).norm() / dense_out.norm();
  CHECK(rel < 1e-10);
  // real and imaginary parts separately
  CHECK((fft_vec.real() - dense_out.real()).norm() / dense_out.real().norm() < 1e-10);
  CHECK((fft_vec.imag() - dense_out.imag()).norm() / dense_out.imag().norm() < 1e-10);
}

TEST_CASE("operator is linear") {
  const SystemConfig cfg = make_test_config(4, 4, 4);
  VoxelContrast grid = uniform_grid(cfg, Vec3(3, 0, 0), Cplx(0.3, -0.05));
  Rng rng(8);
  const FieldOnGrid u = random_field(grid, rng);
  const FieldOnGrid v = random_field(grid, rng);
  const Cplx a(1.7, -0.3), b(-0.4, 0.9);
  LsOperator op(grid, cfg.wavenumber());
  FieldOnGrid combined = FieldOnGrid::zeros_like(grid);
  FieldOnGrid au_bv = FieldOnGrid::zeros_like(grid);
  FieldOnGrid out_u = FieldOnGrid::zeros_like(grid);
  FieldOnGrid out_v = FieldOnGrid::zeros_like(grid);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
      au_bv.comp[c][i] = a * u.comp[c][i] + b * v.comp[c][i];
    }
  }
  op.apply(grid, au_bv, combined);
  op.apply(grid, u, out_u);
  op.apply(grid, v, out_v);
  double max_err = 0.0, scale = 0.0;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
      const Cplx want = a * out_u.comp[c][i] + b * out_v.comp[c][i];
      max_err = std::max(max_err, std::abs(combined.comp[c][i] - want));
      scale = std::max(scale, std::abs(want));
    }
  }
  CHECK(max_err < 1e-12 * scale);
}

TEST_CASE("bicgstab solves the zero-contrast system in at most one iteration") {
  const SystemConfig cfg = make_test_config(4, 4, 4);
  VoxelContrast grid = make_sensing_grid(cfg, Vec3(3, 0, 0));
  const FieldOnGrid e_inc = incident_field(0, cfg, grid);
  auto [e_tot, report] = solve_total_field(grid, e_inc, cfg.wavenumber(), 1e-8, 50);
  CHECK(report.converged);
  CHECK(report.iterations <= 1);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t v = 0; v < grid.cell_count(); ++v) {
      CHECK(std::abs(e_tot.comp[c][v] - e_inc.comp[c][v]) <= 1e-12 * std::abs(e_inc.comp[c][v]));
    }
  }
}

TEST_CASE("krylov solution matches dense LU on a 6^3 uniform half-contrast cube") {
  const SystemConfig cfg = make_test_config(4, 4, 6);
  VoxelContrast grid = uniform_grid(cfg, Vec3(3, 0, 0), Cplx(0.5, 0.0));
  const FieldOnGrid e_inc = incident_field(1, cfg, grid);
  auto [e_tot, report] = solve_total_field(grid, e_inc, cfg.wavenumber(), 1e-10, 500);
  CHECK(report.converged);
  CHECK(report.final_relative_residual <= 1e-10);

  const Eigen::MatrixXcd dense = assemble_dense_operator(grid, cfg.wavenumber());
  const Eigen::VectorXcd direct = dense.partialPivLu().solve(flatten_field(e_inc));
  const double rel = (flatten_field(e_tot) - direct).norm() / direct.norm();
  CHECK(rel < 1e-8);
}

TEST_CASE("solver reports non-convergence honestly") {
  const SystemConfig cfg = make_test_config(4, 4, 6);
  VoxelContrast grid = uniform_grid(cfg, Vec3(3, 0, 0), Cplx(3.0, -1.0));
  const FieldOnGrid e_inc = incident_field(0, cfg, grid);
  CHECK_THROWS_AS(solve_total_field(grid, e_inc, cfg.wavenumber(), 1e-12, 2),
                  std::runtime_error);
}

TEST_CASE("incident field scales linearly with the source amplitude") {
  SystemConfig cfg = make_test_config(4, 4, 4);
  VoxelContrast grid = make_sensing_grid(cfg, Vec3(3, 0, 0));
  const FieldOnGrid base = incident_field(2, cfg, grid);
  cfg.source_amplitude = 2.0;
  const FieldOnGrid doubled = incident_field(2, cfg, grid);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t v = 0; v < grid.cell_count(); ++v) {
      CHECK(std::abs(doubled.comp[c][v] - 2.0 * base.comp[c][v]) <=
            1e-14 * std::abs(base.comp[c][v]));
    }
  }
}

TEST_CASE("incident field matches a pointwise kernel re-evaluation") {
  const SystemConfig cfg = make_test_config(4, 4, 4);
  VoxelContrast grid = make_sensing_grid(cfg, Vec3(3, 0, 0));
  const int tx = 1;
  const FieldOnGrid field = incident_field(tx, cfg, grid);
  const double k = cfg.wavenumber();
  Rng rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    const int ix = static_cast<int>(rng.index(grid.dims[0]));
    const int iy = static_cast<int>(rng.index(grid.dims[1]));
    const int iz = static_cast<int>(rng.index(grid.dims[2]));
    const Vec3c expected = std::sqrt(cfg.tx_gain) * cfg.source_amplitude * k * k *
                           (dyadic_green(grid.voxel_center(ix, iy, iz),
                                         cfg.tx_antenna_positions[tx], k) *
                            cfg.tx_polarization);
    const Vec3c got = field.at(grid.index(ix, iy, iz));
    CHECK((got - expected).norm() <= 1e-13 * expected.norm());
  }
}

TEST_CASE("incident field has the dipole mirror symmetry") {
  // two voxels mirrored across the dipole (z) axis plane through the antenna
  const SystemConfig cfg = make_test_config(2, 2, 4);
  VoxelContrast grid = make_sensing_grid(cfg, Vec3(3, 0, 0));
  SystemConfig centered = cfg;
  centered.tx_antenna_positions[0] = Vec3(0, 0, 0);
  const FieldOnGrid field = incident_field(0, centered, grid);
  // voxel centers symmetric in y about the antenna: pick (ix, iy, iz) and its
  // mirrored iy; |E| must match
  const int ny = grid.dims[1];
  for (int ix = 0; ix < grid.dims[0]; ++ix) {
    for (int iy = 0; iy < ny / 2; ++iy) {
      const auto a = field.at(grid.index(ix, iy, 1));
      const auto b = field.at(grid.index(ix, ny - 1 - iy, 1));
      CHECK(a.norm() == doctest::Approx(b.norm()).epsilon(1e-10));
    }
  }
}

TEST_CASE("scattered field: zero contrast, single-voxel oracle, linearity") {
  const SystemConfig cfg = make_test_config(4, 4, 5);
  VoxelContrast grid = make_sensing_grid(cfg, Vec3(3, 0, 0));
  Rng rng(19);
  const FieldOnGrid total = random_field(grid, rng);
  const Vec3 rx = cfg.rx_antenna_positions[2];

  CHECK(scattered_field_at(grid, total, rx, cfg).norm() == 0.0);

  // single nonzero voxel
  const std::size_t cell = grid.index(2, 1, 3);
  const Cplx chi(0.8, -0.1);
  grid.chi[cell] = chi;
  const Vec3c got = scattered_field_at(grid, total, rx, cfg);
  const double k = cfg.wavenumber();
  const Vec3c expected = k * k * grid.voxel_volume() *
                         (dyadic_green(rx, grid.voxel_center(2, 1, 3), k) *
                          (chi * total.at(cell)));
  CHECK((got - expected).norm() <= 1e-13 * expected.norm());

  // linear in chi with the total field held fixed
  VoxelContrast doubled = grid;
  doubled.chi[cell] *= 2.0;
  const Vec3c got2 = scattered_field_at(doubled, total, rx, cfg);
  CHECK((got2 - 2.0 * got).norm() <= 1e-12 * got.norm());

  CHECK_THROWS_AS(scattered_field_at(grid, total, Vec3(3.1, 0, 0), cfg),
                  std::invalid_argument);
}

TEST_CASE("channel synthesis: zero contrast gives the zero matrix") {
  const SystemConfig cfg = make_test_config(4, 4, 4);
  VoxelContrast grid = make_sensing_grid(cfg, Vec3(3, 0, 0));
  const ChannelMatrix h = synthesize_channel(grid, cfg);
  CHECK(h.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("born-mode channel is exactly linear in the contrast") {
  const SystemConfig cfg = make_test_config(4, 4, 5);
  VoxelContrast grid = uniform_grid(cfg, Vec3(3, 0, 0), Cplx(0.25, -0.02));
  SynthesisOptions opt;
  opt.mode = ScatterMode::kBorn;
  const ChannelMatrix h1 = synthesize_channel(grid, cfg, opt);
  for (auto& v : grid.chi) v *= 2.0;
  const ChannelMatrix h2 = synthesize_channel(grid, cfg, opt);
  CHECK((h2 - 2.0 * h1).cwiseAbs().maxCoeff() <= 1e-12 * h1.cwiseAbs().maxCoeff());

  // superposition over disjoint supports
  VoxelContrast left = make_sensing_grid(cfg, Vec3(3, 0, 0));
  VoxelContrast right = make_sensing_grid(cfg, Vec3(3, 0, 0));
  Rng rng(29);
  VoxelContrast both = make_sensing_grid(cfg, Vec3(3, 0, 0));
  for (std::size_t v = 0; v < both.cell_count(); ++v) {
    const Cplx chi(rng.uniform(), -0.1 * rng.uniform());
    if (rng.uniform() < 0.5) {
      left.chi[v] = chi;
    } else {
      right.chi[v] = chi;
    }
    both.chi[v] = left.chi[v] + right.chi[v];
  }
  const ChannelMatrix hl = synthesize_channel(left, cfg, opt);
  const ChannelMatrix hr = synthesize_channel(right, cfg, opt);
  const ChannelMatrix hb = synthesize_channel(both, cfg, opt);
  CHECK((hb - hl - hr).cwiseAbs().maxCoeff() <= 1e-12 * hb.cwiseAbs().maxCoeff());
}

TEST_CASE("channel synthesis is independent of the worker count") {
  const SystemConfig cfg = make_test_config(6, 4, 5);
  VoxelContrast grid = uniform_grid(cfg, Vec3(3, 0, 0), Cplx(0.4, -0.05));
  SynthesisOptions one;
  one.threads = 1;
  SynthesisOptions four;
  four.threads = 4;
  const ChannelMatrix h1 = synthesize_channel(grid, cfg, one);
  const ChannelMatrix h4 = synthesize_channel(grid, cfg, four);
  CHECK((h1 - h4).cwiseAbs().maxCoeff() == 0.0);  // bit identical per antenna
}

TEST_CASE("summation order sensitivity stays within tolerance") {
  // reversed-order manual accumulation vs the canonical order
  const SystemConfig cfg = make_test_config(4, 4, 5);
  VoxelContrast grid = make_sensing_grid(cfg, Vec3(3, 0, 0));
  Rng rng(37);
  for (auto& v : grid.chi) v = Cplx(rng.uniform(), -0.3 * rng.uniform());
  const FieldOnGrid total = random_field(grid, rng);
  const Vec3 rx = cfg.rx_antenna_positions[0];
  const Vec3c canonical = scattered_field_at(grid, total, rx, cfg);

  const double k = cfg.wavenumber();
  Vec3c reversed = Vec3c::Zero();
  for (int iz = grid.dims[2] - 1; iz >= 0; --iz) {
    for (int iy = grid.dims[1] - 1; iy >= 0; --iy) {
      for (int ix = grid.dims[0] - 1; ix >= 0; --ix) {
        const std::size_t cell = grid.index(ix, iy, iz);
        reversed += dyadic_green(rx, grid.voxel_center(ix, iy, iz), k) *
                    (grid.chi[cell] * total.at(cell));
      }
    }
  }
  reversed *= k * k * grid.voxel_volume();
  CHECK((canonical - reversed).norm() <= 1e-12 * canonical.norm());
}

TEST_CASE("antennas inside the cube are rejected") {
  const SystemConfig cfg = make_test_config(4, 4, 4);
  VoxelContrast grid = make_sensing_grid(cfg, Vec3(0, 0, 0));  // covers the arrays
  CHECK_THROWS_AS(synthesize_channel(grid, cfg), std::invalid_argument);
}
