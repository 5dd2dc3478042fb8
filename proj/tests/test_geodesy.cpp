#include "geodesy.hpp"

#include <cmath>
#include <doctest.h>
#include <limits>

#include "error.hpp"
#include "rng.hpp"
#include "support/oracles.hpp"

using namespace gnss_sentry;
using geodesy::EarthModel;
using geodesy::GeoPoint;
using geodesy::haversine_distance;
using geodesy::hav;

namespace {

GeoPoint random_point(Rng& rng) {
  // Uniform on the sphere: lat from asin, lon uniform.
  const double lat = std::asin(rng.uniform(-1.0, 1.0)) * 180.0 / geodesy::kPi;
  const double lon = rng.uniform(-180.0, 180.0);
  return {lat, lon};
}

}  // namespace

TEST_CASE("hav basics") {
  CHECK(hav(0.0) == 0.0);
  CHECK(hav(geodesy::kPi) == doctest::Approx(1.0).epsilon(1e-15));
  // sin^2(0.1), evaluated independently in extended precision.
  CHECK(hav(0.2) == doctest::Approx(0.0099667110793791844).epsilon(1e-14));
  CHECK_THROWS_AS(hav(std::numeric_limits<double>::quiet_NaN()), Error);
}

TEST_CASE("hav equals (1 - cos)/2 within 1e-12 on [-pi, pi]") {
  Rng rng(11);
  for (int i = 0; i < 10'000; ++i) {
    const double theta = rng.uniform(-geodesy::kPi, geodesy::kPi);
    CHECK(std::abs(hav(theta) - (1.0 - std::cos(theta)) / 2.0) < 1e-12);
  }
}

TEST_CASE("haversine distance examples") {
  const GeoPoint sf{37.63443, -122.414};
  CHECK(haversine_distance(sf, sf) == 0.0);

  // Antipodal on the equator: half the circumference.
  const double d = haversine_distance({0.0, 0.0}, {0.0, 180.0}, {6'371'000.0});
  CHECK(d == doctest::Approx(geodesy::kPi * 6'371'000.0).epsilon(1e-12));

  // Delta lon of 1e-5 rad on the equator: arc of 63.71 m.
  const double small = haversine_distance({0.0, 0.0}, {0.0, 5.729577951e-4}, {6'371'000.0});
  CHECK(std::abs(small - 63.71) < 1e-4);
}

TEST_CASE("haversine rejects bad input") {
  const GeoPoint ok{10.0, 20.0};
  const GeoPoint bad{std::numeric_limits<double>::quiet_NaN(), 20.0};
  CHECK_THROWS_AS(haversine_distance(ok, bad), Error);
  CHECK_THROWS_AS(haversine_distance(bad, ok), Error);
  CHECK_THROWS_AS(haversine_distance(ok, ok, {0.0}), Error);
  CHECK_THROWS_AS(haversine_distance(ok, ok, {-1.0}), Error);
  try {
    haversine_distance(ok, bad);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_input);
  }
}

TEST_CASE("haversine symmetry, identity and range over random pairs") {
  Rng rng(42);
  const EarthModel earth;
  const double half_circumference = geodesy::kPi * earth.radius_m;
  for (int i = 0; i < 10'000; ++i) {
    const GeoPoint a = random_point(rng);
    const GeoPoint b = random_point(rng);
    const double ab = haversine_distance(a, b, earth);
    const double ba = haversine_distance(b, a, earth);
    CHECK(oracles::ulp_distance(ab, ba) <= 1);
    CHECK(haversine_distance(a, a, earth) == 0.0);
    CHECK(ab >= 0.0);
    CHECK(ab <= half_circumference * (1.0 + 1e-15));
  }
}

TEST_CASE("haversine agrees with the spherical law of cosines") {
  Rng rng(7);
  const EarthModel earth;
  const double near_antipodal = (geodesy::kPi - 1e-3) * earth.radius_m;
  int compared = 0;
  for (int i = 0; i < 10'000; ++i) {
    const GeoPoint a = random_point(rng);
    const GeoPoint b = random_point(rng);
    const double hv = haversine_distance(a, b, earth);
    if (hv > near_antipodal) {
      CHECK(hv <= geodesy::kPi * earth.radius_m * (1.0 + 1e-15));
      continue;
    }
    const double loc = oracles::law_of_cosines_distance(a.lat_deg, a.lon_deg, b.lat_deg,
                                                        b.lon_deg, earth.radius_m);
    CHECK(std::abs(hv - loc) <= 1e-6 * std::max(1.0, loc));
    ++compared;
  }
  CHECK(compared > 9'000);
}
