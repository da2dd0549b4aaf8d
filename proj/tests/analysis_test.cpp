#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "geocollab/analysis.hpp"
#include "geocollab/error.hpp"
#include "support/generators.hpp"
#include "support/geodesy_oracle.hpp"

using namespace geocollab;
namespace gen = geocollab::testing;
using namespace geocollab::analysis;
namespace oracle = geocollab::testing::oracle;

namespace {

Errc error_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Timeout;
}

GeoPoint random_point(gen::Rng& rng) {
  return {gen::uniform(rng, -90, 90), gen::uniform(rng, -180, 180)};
}

std::vector<GeoAnchor> as_anchors(const std::vector<GeoPoint>& line) {
  std::vector<GeoAnchor> out;
  for (const auto& p : line) out.push_back(GeoAnchor{p.lat, p.lon, 0, std::nullopt});
  return out;
}

}  // namespace

TEST(Distance, ClosedForms) {
  EXPECT_EQ(geodesic_distance({12.5, -40.25}, {12.5, -40.25}), 0.0);
  // R * pi / 180 and R * pi, evaluated in Python.
  EXPECT_NEAR(geodesic_distance({0, 0}, {0, 1}), 111195.08023353292, 1e-6);
  EXPECT_NEAR(geodesic_distance({0, 0}, {0, -180}), 20015114.442035925, 1e-4);
  EXPECT_NEAR(geodesic_distance({90, 0}, {-90, 0}), 20015114.442035925, 1e-4);
}

TEST(Distance, RejectsInvalidPoints) {
  EXPECT_EQ(error_of([] { geodesic_distance({91, 0}, {0, 0}); }), Errc::InvalidPoint);
  EXPECT_EQ(error_of([] { geodesic_distance({0, 0}, {0, NAN}); }), Errc::InvalidPoint);
}

TEST(Distance, SymmetricAndTriangleInequality) {
  gen::Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const GeoPoint a = random_point(rng), b = random_point(rng), c = random_point(rng);
    const double ab = geodesic_distance(a, b), ba = geodesic_distance(b, a);
    EXPECT_EQ(ab, ba);
    EXPECT_GE(ab, 0.0);
    const double ac = geodesic_distance(a, c), cb = geodesic_distance(c, b);
    EXPECT_LE(ab, (ac + cb) * (1 + 1e-6) + 1e-6);
  }
}

TEST(Distance, MatchesVectorOracle) {
  gen::Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    GeoPoint a = random_point(rng);
    GeoPoint b = random_point(rng);
    if (i % 4 == 0) {  // near antipodal
      b = {-a.lat + gen::uniform(rng, -1e-3, 1e-3),
           std::fmod(a.lon + 360.0, 360.0) - 180.0 + gen::uniform(rng, -1e-3, 1e-3)};
      if (b.lon >= 180.0) b.lon -= 360.0;
      if (b.lon < -180.0) b.lon += 360.0;
    }
    const long double ref = oracle::distance_m(a.lat, a.lon, b.lat, b.lon);
    const double got = geodesic_distance(a, b);
    if (ref > 1.0) EXPECT_LE(std::abs(got - ref) / ref, 5e-3L);
  }
}

TEST(BufferPoint, FourVerticesAtCardinalBearings) {
  const auto poly = buffer_point({0, 0}, 1000.0, 4);
  ASSERT_EQ(poly.size(), 4u);
  for (const auto& v : poly) EXPECT_NEAR(oracle::distance_m(0, 0, v.lat, v.lon), 1000.0, 1.0);
  // Counterclockwise from north: N, W, S, E.
  EXPECT_GT(poly[0].lat, 0);
  EXPECT_NEAR(poly[0].lon, 0, 1e-12);
  EXPECT_LT(poly[1].lon, 0);
  EXPECT_NEAR(poly[1].lat, 0, 1e-12);
  EXPECT_LT(poly[2].lat, 0);
  EXPECT_GT(poly[3].lon, 0);
}

TEST(BufferPoint, VerticesWithinTenthPercent) {
  gen::Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    const GeoPoint c{gen::uniform(rng, -70, 70), gen::uniform(rng, -180, 180)};
    const double r = gen::uniform(rng, 1.0, 1'000'000.0);
    for (const auto& v : buffer_point(c, r)) {
      const long double d = oracle::distance_m(c.lat, c.lon, v.lat, v.lon);
      EXPECT_LE(std::abs(d - r) / r, 1e-3L);
    }
  }
}

TEST(BufferPoint, Guards) {
  EXPECT_EQ(error_of([] { buffer_point({0, 0}, 0.0); }), Errc::InvalidRadius);
  EXPECT_EQ(error_of([] { buffer_point({0, 0}, -5.0); }), Errc::InvalidRadius);
  EXPECT_EQ(error_of([] { buffer_point({0, 0}, 1'000'001.0); }), Errc::InvalidRadius);
  EXPECT_EQ(error_of([] { buffer_point({89.9999, 0}, 100'000.0); }), Errc::PoleProximity);
  EXPECT_EQ(error_of([] { buffer_point({-89.5, 0}, 100'000.0); }), Errc::PoleProximity);
  EXPECT_NO_THROW(buffer_point({88.0, 0}, 100'000.0));
}

TEST(BufferPolyline, TwoPointAreaMatchesRectanglePlusCaps) {
  gen::Rng rng(14);
  for (int i = 0; i < 100; ++i) {
    const GeoPoint a{gen::uniform(rng, -60, 60), gen::uniform(rng, -179, 179)};
    const double len = gen::uniform(rng, 100.0, 99'000.0);
    const GeoPoint b = destination(a, gen::uniform(rng, 0, 360), len);
    const double r = gen::uniform(rng, 10.0, 20'000.0);
    const std::vector<GeoPoint> line{a, b};
    const auto poly = buffer_polyline(line, r);
    const long double L = oracle::distance_m(a.lat, a.lon, b.lat, b.lon);
    const long double expected = 2 * r * L + oracle::kPi * r * r;
    const long double area = oracle::polygon_area_m2(poly);
    EXPECT_LE(std::abs(area - expected) / expected, 0.05L) << "L=" << L << " r=" << r;
  }
}

TEST(BufferPolyline, EnvelopeAndContainment) {
  gen::Rng rng(15);
  for (int i = 0; i < 40; ++i) {
    std::vector<GeoPoint> line{{gen::uniform(rng, -60, 60), gen::uniform(rng, -170, 170)}};
    const double r = gen::uniform(rng, 50.0, 2000.0);
    double bearing = gen::uniform(rng, 0, 360);
    const int n = 2 + static_cast<int>(gen::pick(rng, 5));
    for (int k = 1; k < n; ++k) {
      bearing = std::fmod(bearing + gen::uniform(rng, -100, 100) + 360.0, 360.0);
      line.push_back(destination(line.back(), bearing, gen::uniform(rng, 3 * r, 20 * r)));
    }
    const auto poly = buffer_polyline(line, r);
    const auto line_anchors = as_anchors(line);
    for (const auto& v : poly) {
      const long double d = oracle::distance_to_polyline_m(v, line_anchors);
      EXPECT_GE(d, 0.9L * r);
      EXPECT_LE(d, 1.5L * r);
    }
    for (const auto& p : line_anchors) EXPECT_TRUE(oracle::inside(p, poly, line_anchors[0]));
  }
}

TEST(BufferPolyline, DegenerateLineBehavesAsPoint) {
  const std::vector<GeoPoint> line{{31.2, 121.4}, {31.2, 121.4}, {31.2, 121.4}};
  const auto poly = buffer_polyline(line, 250.0);
  ASSERT_GE(poly.size(), 8u);
  for (const auto& v : poly) EXPECT_NEAR(oracle::distance_m(31.2, 121.4, v.lat, v.lon), 250.0, 0.25);
}

TEST(BufferPolyline, Guards) {
  const GeoPoint a{10, 10};
  const GeoPoint far = destination(a, 45, 500'000);
  EXPECT_EQ(error_of([&] { buffer_polyline(std::vector<GeoPoint>{a, far}, 100.0); }), Errc::SegmentTooLong);
  EXPECT_EQ(error_of([&] { buffer_polyline(std::vector<GeoPoint>{a, {10.01, 10}}, 0.0); }), Errc::InvalidRadius);
}

TEST(Builtins, DispatchAndErrors) {
  Json r = run_builtin("distance", {{"a", {{"lat", 0}, {"lon", 0}}}, {"b", {{"lat", 0}, {"lon", 1}}}});
  EXPECT_NEAR(r["meters"].get<double>(), 111195.08023353292, 1e-6);
  Json bp = run_builtin("buffer_point", {{"center", {{"lat", 0}, {"lon", 0}}}, {"radius_m", 100}, {"n", 8}});
  EXPECT_EQ(bp["polygon"].size(), 8u);
  Json bl = run_builtin("buffer_polyline", {{"line", {{{"lat", 0}, {"lon", 0}}, {{"lat", 0}, {"lon", 0.01}}}}, {"radius_m", 50}});
  EXPECT_EQ(bl["polygon"].size(), 2u * kCapArcVertices);
  EXPECT_EQ(error_of([] { run_builtin("viewshed", Json::object()); }), Errc::UnknownService);
  EXPECT_EQ(error_of([] { run_builtin("distance", Json::object()); }), Errc::SchemaViolation);
  EXPECT_TRUE(is_builtin("buffer_point"));
  EXPECT_FALSE(is_builtin("viewshed"));
}
