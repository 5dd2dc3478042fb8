#include "spoofsim.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "error.hpp"
#include "textio.hpp"

namespace gnss_sentry::spoofsim {

namespace {

using geodesy::GeoPoint;
using geodesy::kPi;

struct Vec3 {
  double x, y, z;
};

Vec3 to_unit_vector(const GeoPoint& p) {
  const double lat = geodesy::deg_to_rad(p.lat_deg);
  const double lon = geodesy::deg_to_rad(p.lon_deg);
  return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
}

GeoPoint to_geo_point(const Vec3& v) {
  const double lat = std::atan2(v.z, std::hypot(v.x, v.y));
  const double lon = std::atan2(v.y, v.x);
  return {lat * 180.0 / kPi, lon * 180.0 / kPi};
}

// Great-circle interpolation between two unit vectors; u in [0, 1] maps
// linearly onto arc length, so resampled spacing is exact.
GeoPoint slerp(const Vec3& a, const Vec3& b, double u) {
  double dot = a.x * b.x + a.y * b.y + a.z * b.z;
  dot = std::clamp(dot, -1.0, 1.0);
  const double omega = std::acos(dot);
  if (omega == 0.0) return to_geo_point(a);
  const double s = std::sin(omega);
  const double ca = std::sin((1.0 - u) * omega) / s;
  const double cb = std::sin(u * omega) / s;
  return to_geo_point({ca * a.x + cb * b.x, ca * a.y + cb * b.y, ca * a.z + cb * b.z});
}

void validate_route(const Route& route) {
  if (route.points.size() < 2) throw_invalid("route: needs at least 2 points");
  for (std::size_t i = 1; i < route.points.size(); ++i) {
    if (route.points[i].lat_deg == route.points[i - 1].lat_deg &&
        route.points[i].lon_deg == route.points[i - 1].lon_deg) {
      throw_invalid("route: consecutive identical points at index " + std::to_string(i));
    }
  }
}

void validate_lat_lon(double lat, double lon, std::size_t token_index) {
  if (lat < -90.0 || lat > 90.0 || lon < -180.0 || lon > 180.0) {
    throw_invalid("route token " + std::to_string(token_index) +
                  ": latitude/longitude out of range");
  }
}

// Walks a route by arc length. Cumulative vertex distances are computed
// once; queries past the end clamp to the final vertex.
class RouteWalker {
public:
  RouteWalker(const Route& route, const geodesy::EarthModel& earth) {
    vertices_.reserve(route.points.size());
    for (const auto& p : route.points) vertices_.push_back(to_unit_vector(p));
    arc_.resize(route.points.size());
    arc_[0] = 0.0;
    for (std::size_t i = 1; i < route.points.size(); ++i) {
      const double seg = geodesy::haversine_distance(route.points[i - 1], route.points[i], earth);
      if (!(seg > 0.0)) {
        throw_invalid("route: zero-length segment at index " + std::to_string(i));
      }
      arc_[i] = arc_[i - 1] + seg;
    }
  }

  double total_length() const { return arc_.back(); }

  GeoPoint point_at(double s) const {
    if (s <= 0.0) return to_geo_point(vertices_.front());
    if (s >= arc_.back()) return to_geo_point(vertices_.back());
    const auto it = std::upper_bound(arc_.begin(), arc_.end(), s);
    const std::size_t hi = static_cast<std::size_t>(it - arc_.begin());
    const std::size_t lo = hi - 1;
    const double u = (s - arc_[lo]) / (arc_[hi] - arc_[lo]);
    return slerp(vertices_[lo], vertices_[hi], u);
  }

private:
  std::vector<Vec3> vertices_;
  std::vector<double> arc_;
};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

}  // namespace

Route parse_kml_route(std::string_view text) {
  const std::string_view open_tag = "<coordinates";
  const std::size_t open_at = text.find(open_tag);
  if (open_at == std::string_view::npos) {
    throw_format("kml: no <coordinates> block found");
  }
  const std::size_t open_end = text.find('>', open_at + open_tag.size());
  if (open_end == std::string_view::npos) {
    throw_format("kml: unterminated <coordinates> tag");
  }
  const std::size_t close_at = text.find("</coordinates>", open_end + 1);
  if (close_at == std::string_view::npos) {
    throw_format("kml: missing </coordinates>");
  }
  const std::string_view body = text.substr(open_end + 1, close_at - open_end - 1);

  Route route;
  std::size_t token_index = 0;
  std::size_t pos = 0;
  while (pos < body.size()) {
    while (pos < body.size() && is_space(body[pos])) ++pos;
    if (pos >= body.size()) break;
    std::size_t end = pos;
    while (end < body.size() && !is_space(body[end])) ++end;
    const std::string_view token = body.substr(pos, end - pos);
    pos = end;
    ++token_index;

    const auto parts = textio::split(token, ',');
    if (parts.size() < 2 || parts.size() > 3) {
      throw_format("kml: token " + std::to_string(token_index) + " has " +
                   std::to_string(parts.size()) + " fields, expected lon,lat[,alt]");
    }
    const auto lon = textio::parse_finite_double(parts[0]);
    const auto lat = textio::parse_finite_double(parts[1]);
    if (!lon || !lat) {
      throw_format("kml: token " + std::to_string(token_index) + ": not a number");
    }
    if (parts.size() == 3 && !textio::parse_finite_double(parts[2])) {
      throw_format("kml: token " + std::to_string(token_index) + ": bad altitude");
    }
    validate_lat_lon(*lat, *lon, token_index);
    route.points.push_back({*lat, *lon});
  }
  validate_route(route);
  return route;
}

Route parse_csv_route(const std::string& path) {
  const std::string text = textio::read_file(path);
  const auto lines = textio::split_lines(text);
  if (lines.empty() || textio::trim(lines[0]) != "lat_deg,lon_deg") {
    throw_format(path + ": expected header 'lat_deg,lon_deg'");
  }
  Route route;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (textio::trim(lines[li]).empty()) continue;
    const auto fields = textio::split(lines[li], ',');
    if (fields.size() != 2) {
      throw_format(path + ":" + std::to_string(li + 1) + ": expected 2 fields");
    }
    const auto lat = textio::parse_finite_double(fields[0]);
    const auto lon = textio::parse_finite_double(fields[1]);
    if (!lat || !lon) {
      throw_format(path + ":" + std::to_string(li + 1) + ": not a finite number");
    }
    validate_lat_lon(*lat, *lon, li + 1);
    route.points.push_back({*lat, *lon});
  }
  validate_route(route);
  return route;
}

Route load_route(const std::string& path) {
  if (path.size() >= 4) {
    std::string ext = path.substr(path.size() - 4);
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".kml") return parse_kml_route(textio::read_file(path));
  }
  return parse_csv_route(path);
}

std::vector<streams::GnssFix> inject_spoof(const SpoofScenario& scenario,
                                           const geodesy::EarthModel& earth) {
  const auto& truth = scenario.truth;
  if (scenario.onset_index == 0 || scenario.onset_index >= truth.size()) {
    throw_invalid("inject_spoof: onset_index must satisfy 0 < onset < " +
                  std::to_string(truth.size()));
  }
  validate_route(scenario.spoof_route);
  const RouteWalker walker(scenario.spoof_route, earth);

  // The first post-onset step must fit on the route; later steps clamp.
  if (scenario.onset_index + 1 < truth.size()) {
    const double first_step = geodesy::haversine_distance(
        truth[scenario.onset_index].pos, truth[scenario.onset_index + 1].pos, earth);
    if (walker.total_length() < first_step) {
      throw_invalid("inject_spoof: spoof route shorter than one ground-truth step");
    }
  }

  std::vector<streams::GnssFix> spoofed(truth.begin(), truth.end());
  double arc = 0.0;
  for (std::size_t i = scenario.onset_index; i < truth.size(); ++i) {
    if (i > scenario.onset_index) {
      arc += geodesy::haversine_distance(truth[i - 1].pos, truth[i].pos, earth);
    }
    spoofed[i].pos = walker.point_at(arc);
  }
  return spoofed;
}

std::vector<streams::GnssFix> synth_deviation(std::span<const streams::GnssFix> truth,
                                              std::size_t onset_index, double cross_track_rate_m,
                                              const geodesy::EarthModel& earth) {
  if (!(cross_track_rate_m > 0.0)) {
    throw_invalid("synth_deviation: cross_track_rate must be positive");
  }
  if (onset_index == 0 || onset_index >= truth.size()) {
    throw_invalid("synth_deviation: onset_index must satisfy 0 < onset < " +
                  std::to_string(truth.size()));
  }

  // East/north heading at fix i on the local tangent plane, from the
  // segment leaving i (falling back to the segment arriving at i).
  auto heading_at = [&](std::size_t i) -> std::array<double, 2> {
    auto segment = [&](std::size_t a, std::size_t b) -> std::array<double, 2> {
      const double lat_ref = geodesy::deg_to_rad(truth[a].pos.lat_deg);
      const double de = geodesy::deg_to_rad(truth[b].pos.lon_deg - truth[a].pos.lon_deg) *
                        earth.radius_m * std::cos(lat_ref);
      const double dn =
          geodesy::deg_to_rad(truth[b].pos.lat_deg - truth[a].pos.lat_deg) * earth.radius_m;
      return {de, dn};
    };
    std::array<double, 2> d{0.0, 0.0};
    if (i + 1 < truth.size()) d = segment(i, i + 1);
    if (d[0] == 0.0 && d[1] == 0.0 && i > 0) d = segment(i - 1, i);
    const double norm = std::hypot(d[0], d[1]);
    if (norm == 0.0) {
      throw_invalid("synth_deviation: degenerate heading at fix " + std::to_string(i) +
                    " (stationary vehicle)");
    }
    return {d[0] / norm, d[1] / norm};
  };

  std::vector<streams::GnssFix> spoofed(truth.begin(), truth.end());
  for (std::size_t i = onset_index + 1; i < truth.size(); ++i) {
    const double displacement = static_cast<double>(i - onset_index) * cross_track_rate_m;
    const auto [he, hn] = heading_at(i);
    // Left-perpendicular offset on the tangent plane.
    const double de = -hn * displacement;
    const double dn = he * displacement;
    const double lat_rad = geodesy::deg_to_rad(truth[i].pos.lat_deg);
    spoofed[i].pos.lat_deg += (dn / earth.radius_m) * 180.0 / kPi;
    spoofed[i].pos.lon_deg += (de / (earth.radius_m * std::cos(lat_rad))) * 180.0 / kPi;
  }
  return spoofed;
}

}  // namespace gnss_sentry::spoofsim
