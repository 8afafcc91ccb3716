#include "skyloss/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "skyloss/error.hpp"

namespace skyloss {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void check_position(const Position3D& p) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
    throw Error(ErrorKind::Range, "position has non-finite coordinates");
  if (p.z < 0.0)
    throw Error(ErrorKind::Range, "position below sea level (z = " + std::to_string(p.z) + " m)");
}

}  // namespace

double sin_deg(double deg) {
  if (deg == 0.0) return 0.0;
  if (deg == 90.0) return 1.0;
  return std::sin(deg * kDegToRad);
}

double cos_deg(double deg) {
  if (deg == 0.0) return 1.0;
  if (deg == 90.0) return 0.0;
  return std::cos(deg * kDegToRad);
}

void check_zenith(double theta_deg) {
  if (!(theta_deg >= 0.0 && theta_deg <= 90.0))
    throw Error(ErrorKind::Range,
                "zenith angle " + std::to_string(theta_deg) + " deg outside [0, 90]");
}

LinkGeometry link_geometry_from_positions(const Position3D& p1, const Position3D& p2) {
  check_position(p1);
  check_position(p2);
  // Relabel so that the lower transceiver comes first; makes the result
  // independent of argument order.
  const bool swap = p2.z < p1.z || (p2.z == p1.z && (p2.x < p1.x || (p2.x == p1.x && p2.y < p1.y)));
  const Position3D& lo = swap ? p2 : p1;
  const Position3D& hi = swap ? p1 : p2;

  LinkGeometry g;
  g.l = lo.z;
  g.d_h = std::hypot(hi.x - lo.x, hi.y - lo.y);
  g.d_v = hi.z - lo.z;
  g.d = std::hypot(g.d_h, g.d_v);
  if (g.d == 0.0)
    throw Error(ErrorKind::DegenerateGeometry, "coincident transceiver positions (d = 0)");
  if (g.d_h == 0.0)
    g.theta = 0.0;
  else if (g.d_v == 0.0)
    g.theta = 90.0;
  else
    g.theta = std::atan2(g.d_h, g.d_v) / kDegToRad;
  return g;
}

DistanceSplit decompose(double d, double theta_deg) {
  check_zenith(theta_deg);
  if (!(d > 0.0) || !std::isfinite(d))
    throw Error(ErrorKind::Range, "distance must be positive and finite");
  return {d * sin_deg(theta_deg), d * cos_deg(theta_deg)};
}

double fspl_db(double f_thz, double d_m) {
  if (!(f_thz > 0.0) || !(d_m > 0.0))
    throw Error(ErrorKind::Range, "FSPL needs positive frequency and distance");
  return 20.0 * std::log10(4.0 * std::numbers::pi * f_thz * 1e12 * d_m / kSpeedOfLight);
}

}  // namespace skyloss
