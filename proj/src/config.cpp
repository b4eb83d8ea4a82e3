#include "isac/config.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include "isac/constants.hpp"

namespace isac {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

Vec3 parse_vec3(const std::string& v) {
  std::istringstream in(v);
  Vec3 out;
  char comma;
  if (!(in >> out.x() >> comma >> out.y() >> comma >> out.z())) {
    throw std::invalid_argument("expected 'x,y,z' triple, got '" + v + "'");
  }
  return out;
}

std::vector<Vec3> parse_vec3_list(const std::string& v) {
  std::vector<Vec3> out;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ';')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_vec3(item));
  }
  return out;
}

}  // namespace

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double watts_to_dbm(double watts) { return 10.0 * std::log10(watts) + 30.0; }

std::map<std::string, std::string> read_keyvalue_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": empty key");
    }
    if (kv.count(key)) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": duplicate key '" + key + "'");
    }
    kv[key] = val;
  }
  return kv;
}

std::uint64_t file_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open file for fingerprint: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

void SystemConfig::finalize() {
  if (wavelength_m <= 0.0) wavelength_m = kSpeedOfLight / carrier_frequency_hz;
  const double spacing = ula_spacing_m > 0.0 ? ula_spacing_m : wavelength_m / 2.0;
  if (tx_antenna_positions.empty()) {
    tx_antenna_positions.resize(n_tx);
    for (int m = 0; m < n_tx; ++m) {
      const double offset = (m - 0.5 * (n_tx - 1)) * spacing;
      tx_antenna_positions[m] = Vec3(0.0, offset, 0.0);
    }
  }
  if (rx_antenna_positions.empty()) {
    rx_antenna_positions.resize(n_rx);
    for (int n = 0; n < n_rx; ++n) {
      const double offset = (n - 0.5 * (n_rx - 1)) * spacing;
      rx_antenna_positions[n] = Vec3(0.0, 0.0, offset);
    }
  }
}

void SystemConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (carrier_frequency_hz <= 0.0) fail("carrier frequency must be positive");
  const double lambda_expected = kSpeedOfLight / carrier_frequency_hz;
  if (std::abs(wavelength_m - lambda_expected) > 1e-9 * lambda_expected) {
    fail("wavelength inconsistent with carrier frequency");
  }
  if (n_tx < 1 || n_rx < 1) fail("antenna counts must be >= 1");
  if (symbol_count < 1) fail("symbol count must be >= 1");
  if (noise_power_sensing_w <= 0.0) fail("sensing noise power must be positive");
  if (noise_power_ue_w <= 0.0) fail("UE noise power must be positive");
  if (max_power_w <= 0.0) fail("max power must be positive");
  if (min_rate_bps_hz < 0.0) fail("min rate must be >= 0");
  if (tx_gain <= 0.0 || rx_gain <= 0.0) fail("antenna gains must be positive");
  if (std::abs(tx_polarization.norm() - 1.0) > 1e-12) fail("tx polarization must be unit norm");
  if (std::abs(rx_polarization.norm() - 1.0) > 1e-12) fail("rx polarization must be unit norm");
  if (domain_extent_m <= 0.0) fail("domain extent must be positive");
  if (voxels_per_axis < 2) fail("voxels per axis must be >= 2");
  if (sensing_sector.radius_m <= 0.0) fail("sector radius must be positive");
  if (static_cast<int>(tx_antenna_positions.size()) != n_tx) {
    fail("tx antenna position count does not match n_tx");
  }
  if (static_cast<int>(rx_antenna_positions.size()) != n_rx) {
    fail("rx antenna position count does not match n_rx");
  }
  // Antennas must lie outside the sensing cube when it sits at the reference
  // location; grid placement re-checks this for every synthesized target.
  const double half = 0.5 * domain_extent_m;
  for (const auto& p : tx_antenna_positions) {
    if (((p - reference_location).cwiseAbs().maxCoeff()) <= half) {
      fail("tx antenna inside sensing cube at reference location");
    }
  }
  for (const auto& p : rx_antenna_positions) {
    if (((p - reference_location).cwiseAbs().maxCoeff()) <= half) {
      fail("rx antenna inside sensing cube at reference location");
    }
  }
}

SystemConfig SystemConfig::parse_keyvalues(const std::map<std::string, std::string>& kv) {
  SystemConfig cfg;
  cfg.wavelength_m = 0.0;
  const std::set<std::string> known = {
      "carrier_frequency_hz", "wavelength_m", "n_tx", "n_rx", "symbol_count",
      "noise_power_sensing_w", "noise_power_ue_w", "max_power_w", "min_rate_bps_hz",
      "tx_gain", "rx_gain", "tx_polarization", "rx_polarization",
      "tx_antenna_positions", "rx_antenna_positions", "domain_extent_m",
      "voxels_per_axis", "sector_radius_m", "sector_half_angle_deg",
      "reference_location", "source_amplitude", "ula_spacing_m"};
  for (const auto& [key, val] : kv) {
    if (!known.count(key)) {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    if (key == "carrier_frequency_hz") cfg.carrier_frequency_hz = std::stod(val);
    else if (key == "wavelength_m") cfg.wavelength_m = std::stod(val);
    else if (key == "n_tx") cfg.n_tx = std::stoi(val);
    else if (key == "n_rx") cfg.n_rx = std::stoi(val);
    else if (key == "symbol_count") cfg.symbol_count = std::stoi(val);
    else if (key == "noise_power_sensing_w") cfg.noise_power_sensing_w = std::stod(val);
    else if (key == "noise_power_ue_w") cfg.noise_power_ue_w = std::stod(val);
    else if (key == "max_power_w") cfg.max_power_w = std::stod(val);
    else if (key == "min_rate_bps_hz") cfg.min_rate_bps_hz = std::stod(val);
    else if (key == "tx_gain") cfg.tx_gain = std::stod(val);
    else if (key == "rx_gain") cfg.rx_gain = std::stod(val);
    else if (key == "tx_polarization") cfg.tx_polarization = parse_vec3(val);
    else if (key == "rx_polarization") cfg.rx_polarization = parse_vec3(val);
    else if (key == "tx_antenna_positions") cfg.tx_antenna_positions = parse_vec3_list(val);
    else if (key == "rx_antenna_positions") cfg.rx_antenna_positions = parse_vec3_list(val);
    else if (key == "domain_extent_m") cfg.domain_extent_m = std::stod(val);
    else if (key == "voxels_per_axis") cfg.voxels_per_axis = std::stoi(val);
    else if (key == "sector_radius_m") cfg.sensing_sector.radius_m = std::stod(val);
    else if (key == "sector_half_angle_deg") cfg.sensing_sector.half_angle_deg = std::stod(val);
    else if (key == "reference_location") cfg.reference_location = parse_vec3(val);
    else if (key == "source_amplitude") cfg.source_amplitude = std::stod(val);
    else if (key == "ula_spacing_m") cfg.ula_spacing_m = std::stod(val);
  }
  cfg.finalize();
  cfg.validate();
  return cfg;
}

SystemConfig SystemConfig::load(const std::string& path) {
  return parse_keyvalues(read_keyvalue_file(path));
}

void SystemConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write config file: " + path);
  out << std::setprecision(17);
  out << "carrier_frequency_hz = " << carrier_frequency_hz << "\n";
  out << "wavelength_m = " << wavelength_m << "\n";
  out << "n_tx = " << n_tx << "\n";
  out << "n_rx = " << n_rx << "\n";
  out << "symbol_count = " << symbol_count << "\n";
  out << "noise_power_sensing_w = " << noise_power_sensing_w << "\n";
  out << "noise_power_ue_w = " << noise_power_ue_w << "\n";
  out << "max_power_w = " << max_power_w << "\n";
  out << "min_rate_bps_hz = " << min_rate_bps_hz << "\n";
  out << "tx_gain = " << tx_gain << "\n";
  out << "rx_gain = " << rx_gain << "\n";
  out << "tx_polarization = " << tx_polarization.x() << "," << tx_polarization.y()
      << "," << tx_polarization.z() << "\n";
  out << "rx_polarization = " << rx_polarization.x() << "," << rx_polarization.y()
      << "," << rx_polarization.z() << "\n";
  auto write_list = [&out](const char* key, const std::vector<Vec3>& ps) {
    out << key << " = ";
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (i) out << "; ";
      out << ps[i].x() << "," << ps[i].y() << "," << ps[i].z();
    }
    out << "\n";
  };
  write_list("tx_antenna_positions", tx_antenna_positions);
  write_list("rx_antenna_positions", rx_antenna_positions);
  out << "domain_extent_m = " << domain_extent_m << "\n";
  out << "voxels_per_axis = " << voxels_per_axis << "\n";
  out << "sector_radius_m = " << sensing_sector.radius_m << "\n";
  out << "sector_half_angle_deg = " << sensing_sector.half_angle_deg << "\n";
  out << "reference_location = " << reference_location.x() << ","
      << reference_location.y() << "," << reference_location.z() << "\n";
  out << "source_amplitude = " << source_amplitude << "\n";
}

}  // namespace isac
