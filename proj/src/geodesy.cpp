#include "geodesy.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace gnss_sentry::geodesy {

double hav(double theta_rad) {
  if (!std::isfinite(theta_rad)) throw_invalid("hav: non-finite angle");
  const double s = std::sin(theta_rad / 2.0);
  return s * s;
}

double haversine_distance(const GeoPoint& a, const GeoPoint& b, const EarthModel& earth) {
  if (!std::isfinite(a.lat_deg) || !std::isfinite(a.lon_deg) ||
      !std::isfinite(b.lat_deg) || !std::isfinite(b.lon_deg)) {
    throw_invalid("haversine_distance: non-finite coordinate");
  }
  if (!(earth.radius_m > 0.0) || !std::isfinite(earth.radius_m)) {
    throw_invalid("haversine_distance: earth radius must be positive");
  }

  const double lat1 = deg_to_rad(a.lat_deg);
  const double lat2 = deg_to_rad(b.lat_deg);
  const double lon1 = deg_to_rad(a.lon_deg);
  const double lon2 = deg_to_rad(b.lon_deg);

  double h = hav(lat2 - lat1) + std::cos(lat1) * std::cos(lat2) * hav(lon2 - lon1);
  // Rounding can push h just past 1 for near-antipodal pairs.
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * earth.radius_m * std::asin(std::sqrt(h));
}

}  // namespace gnss_sentry::geodesy
