#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include "isac/config.hpp"

namespace isac::testing {

// Desk-scale system description shared by the suites. The default carrier
// keeps voxels subwavelength on the coarse test grids (pulse-basis validity).
inline SystemConfig make_test_config(int n_tx = 8, int n_rx = 8, int voxels = 6,
                                     int symbols = 64,
                                     double carrier_hz = 1.5e8) {
  SystemConfig cfg;
  cfg.carrier_frequency_hz = carrier_hz;
  cfg.wavelength_m = 0.0;
  cfg.n_tx = n_tx;
  cfg.n_rx = n_rx;
  cfg.symbol_count = symbols;
  cfg.noise_power_sensing_w = 3.9810717055349695e-14;
  cfg.noise_power_ue_w = 3.9810717055349695e-14;
  cfg.max_power_w = 0.0316227766016838;
  cfg.min_rate_bps_hz = 1.0;
  cfg.voxels_per_axis = voxels;
  cfg.domain_extent_m = 1.0;
  cfg.reference_location = Vec3(3, 0, 0);
  cfg.finalize();
  cfg.validate();
  return cfg;
}

// Scratch directory helper; unique per tag, wiped on creation.
inline std::string scratch_dir(const std::string& tag) {
  const std::string dir =
      (std::filesystem::temp_directory_path() / ("isac_test_" + tag)).string();
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace isac::testing
