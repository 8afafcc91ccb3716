#pragma once

namespace skyloss {

/// Speed of light in vacuum, m/s (exact SI value).
inline constexpr double kSpeedOfLight = 299'792'458.0;

/// Cartesian position in meters, z measured from sea level.
struct Position3D {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool operator==(const Position3D&) const = default;
};

/// Link parameters of a transceiver pair. Lengths in meters, theta in degrees
/// from vertical; l is the altitude of the lower transceiver.
struct LinkGeometry {
  double l = 0.0;
  double d = 0.0;
  double d_h = 0.0;
  double d_v = 0.0;
  double theta = 0.0;

  bool operator==(const LinkGeometry&) const = default;
};

struct DistanceSplit {
  double d_h = 0.0;
  double d_v = 0.0;
};

// sin/cos of an angle in degrees, exact at 0 and 90.
double sin_deg(double deg);
double cos_deg(double deg);

/// Throws Range if theta is not within [0, 90] degrees.
void check_zenith(double theta_deg);

LinkGeometry link_geometry_from_positions(const Position3D& p1, const Position3D& p2);

DistanceSplit decompose(double d, double theta_deg);

/// Free-space path loss in dB; frequency in THz and distance in meters.
double fspl_db(double f_thz, double d_m);

}  // namespace skyloss
