#pragma once

// Unit conversions. The simulation engine works in feet / seconds (the
// corridor geometry and driving-behavior parameters are given in feet),
// the probability model and the safety gaps work in SI units.

namespace lanedrop {

inline constexpr double kFtPerMile = 5280.0;
inline constexpr double kMetersPerFoot = 0.3048;

constexpr double mph_to_ftps(double mph) { return mph * kFtPerMile / 3600.0; }
constexpr double ftps_to_mph(double ftps) { return ftps * 3600.0 / kFtPerMile; }
constexpr double ft_to_m(double ft) { return ft * kMetersPerFoot; }
constexpr double m_to_ft(double m) { return m / kMetersPerFoot; }
constexpr double ftps_to_mps(double v) { return v * kMetersPerFoot; }
constexpr double mps_to_ftps(double v) { return v / kMetersPerFoot; }

}  // namespace lanedrop
