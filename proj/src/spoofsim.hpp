#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geodesy.hpp"
#include "streams.hpp"

namespace gnss_sentry::spoofsim {

// A spoof route: at least two points, consecutive points distinct.
struct Route {
  std::vector<geodesy::GeoPoint> points;
};

// Ground truth plus the lie to splice into it at onset_index.
struct SpoofScenario {
  std::vector<streams::GnssFix> truth;
  Route spoof_route;
  std::size_t onset_index = 0;
};

// Extracts the first LineString <coordinates> block: whitespace-separated
// "lon,lat[,alt]" tokens, altitude ignored. Total over arbitrary bytes —
// returns a Route or throws a structured error, never crashes.
Route parse_kml_route(std::string_view text);

// CSV alternative, header "lat_deg,lon_deg".
Route parse_csv_route(const std::string& path);

// Dispatches on extension: .kml via the KML subset, anything else CSV.
Route load_route(const std::string& path);

// Replaces fixes from onset_index onward with points walked along the
// spoof route at the ground truth's own per-step spacing; timestamps and
// speeds stay untouched. A route walked past its end clamps to its final
// point.
std::vector<streams::GnssFix> inject_spoof(const SpoofScenario& scenario,
                                           const geodesy::EarthModel& earth = {});

// Parametric attack: fix k steps past onset is displaced perpendicular to
// the local heading by k * cross_track_rate_m meters.
std::vector<streams::GnssFix> synth_deviation(std::span<const streams::GnssFix> truth,
                                              std::size_t onset_index, double cross_track_rate_m,
                                              const geodesy::EarthModel& earth = {});

}  // namespace gnss_sentry::spoofsim
