#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "isac/types.hpp"

namespace isac {

struct SensingSector {
  double radius_m = 30.0;
  double half_angle_deg = 60.0;
};

// Full system description: array geometry, signal budget, sensing region and
// discretization. Immutable value type after load/validate.
struct SystemConfig {
  double carrier_frequency_hz = 2.99e9;
  double wavelength_m = 0.0;  // derived from f when not given explicitly
  int n_tx = 8;
  int n_rx = 8;
  int symbol_count = 64;
  double noise_power_sensing_w = 3.9810717055349695e-14;  // -104 dBm
  double noise_power_ue_w = 3.9810717055349695e-14;
  double max_power_w = 0.0316227766016838;  // 15 dBm
  double min_rate_bps_hz = 1.0;
  double tx_gain = 1.9952623149688795;  // 3 dBi
  double rx_gain = 1.9952623149688795;
  Vec3 tx_polarization = Vec3(0, 0, 1);
  Vec3 rx_polarization = Vec3(0, 1, 0);
  std::vector<Vec3> tx_antenna_positions;
  std::vector<Vec3> rx_antenna_positions;
  double domain_extent_m = 1.0;
  int voxels_per_axis = 8;
  SensingSector sensing_sector;
  Vec3 reference_location = Vec3(3, 0, 0);
  double source_amplitude = 1.0;
  double ula_spacing_m = 0.0;  // 0 means lambda/2

  double wavenumber() const { return 2.0 * 3.14159265358979323846 / wavelength_m; }
  double omega() const { return 2.0 * 3.14159265358979323846 * carrier_frequency_hz; }

  // Fills wavelength and antenna positions (tx ULA along y, rx ULA along z,
  // both centered at the origin) when not explicitly configured.
  void finalize();
  // Throws std::invalid_argument when an invariant is violated.
  void validate() const;

  static SystemConfig load(const std::string& path);
  static SystemConfig parse_keyvalues(const std::map<std::string, std::string>& kv);
  void save(const std::string& path) const;
};

// Flat key=value parser; '#' starts a comment. Throws on malformed lines.
std::map<std::string, std::string> read_keyvalue_file(const std::string& path);

// FNV-1a hash of a file's bytes, used as the config fingerprint.
std::uint64_t file_fingerprint(const std::string& path);

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);

}  // namespace isac
