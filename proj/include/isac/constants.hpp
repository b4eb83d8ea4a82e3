#pragma once

namespace isac {

// Physical constants (CODATA), single source of truth for the whole library.
inline constexpr double kSpeedOfLight = 299792458.0;        // m/s
inline constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F/m
inline constexpr double kPi = 3.14159265358979323846;

}  // namespace isac
