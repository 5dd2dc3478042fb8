#pragma once

namespace gnss_sentry::geodesy {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Mean Earth radius. The detection threshold (~1.5 m over ~2.7 m steps)
// is insensitive to the radius choice at this scale.
inline constexpr double kMeanEarthRadiusM = 6'371'000.0;

// Position as delivered by the GNSS receiver: decimal degrees,
// lat in [-90, 90], lon in [-180, 180]. Converted to radians internally.
struct GeoPoint {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
};

struct EarthModel {
  double radius_m = kMeanEarthRadiusM;
};

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }

// sin^2(theta/2), the half-versed-sine of an angle in radians.
double hav(double theta_rad);

// Great-circle distance in meters between two surface points.
// Throws on non-finite coordinates or a non-positive radius.
double haversine_distance(const GeoPoint& a, const GeoPoint& b,
                          const EarthModel& earth = {});

}  // namespace gnss_sentry::geodesy
