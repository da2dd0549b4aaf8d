#pragma once

// Independent reference geometry for checking the analysis module. Nothing
// here calls into geocollab::analysis; everything works on unit vectors in
// long double.

#include <cmath>
#include <vector>

#include "geocollab/geo_anchor.hpp"

namespace geocollab::testing::oracle {

inline constexpr long double kRadius = 6371008.8L;
inline constexpr long double kPi = 3.141592653589793238462643383279502884L;

struct V3 {
  long double x, y, z;
};

inline V3 unit(long double lat_deg, long double lon_deg) {
  const long double la = lat_deg * kPi / 180, lo = lon_deg * kPi / 180;
  return {std::cos(la) * std::cos(lo), std::cos(la) * std::sin(lo), std::sin(la)};
}
inline long double dot(V3 a, V3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline V3 cross(V3 a, V3 b) { return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x}; }
inline long double norm(V3 a) { return std::sqrt(dot(a, a)); }

/// Central angle by atan2(|a x b|, a . b): well conditioned at every separation.
inline long double distance_m(long double lat1, long double lon1, long double lat2, long double lon2) {
  const V3 a = unit(lat1, lon1), b = unit(lat2, lon2);
  return kRadius * std::atan2(norm(cross(a, b)), dot(a, b));
}

/// Signed spherical-triangle excess (Van Oosterom and Strackee).
inline long double triangle_excess(V3 a, V3 b, V3 c) {
  const long double num = dot(a, cross(b, c));
  const long double den = 1 + dot(a, b) + dot(b, c) + dot(c, a);
  return 2 * std::atan2(num, den);
}

/// Area in m^2 of a simple polygon (ring not closed), fanned from its first vertex.
inline long double polygon_area_m2(const std::vector<GeoAnchor>& ring) {
  long double excess = 0;
  const V3 o = unit(ring[0].lat, ring[0].lon);
  for (std::size_t i = 1; i + 1 < ring.size(); ++i)
    excess += triangle_excess(o, unit(ring[i].lat, ring[i].lon), unit(ring[i + 1].lat, ring[i + 1].lon));
  return std::abs(excess) * kRadius * kRadius;
}

/// Minimum distance from p to a polyline, by dense sampling of each great-circle segment.
inline long double distance_to_polyline_m(const GeoAnchor& p, const std::vector<GeoAnchor>& line, int samples = 4000) {
  long double best = INFINITY;
  const V3 q = unit(p.lat, p.lon);
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const V3 a = unit(line[i].lat, line[i].lon), b = unit(line[i + 1].lat, line[i + 1].lon);
    for (int k = 0; k <= samples; ++k) {
      const long double t = static_cast<long double>(k) / samples;
      V3 s{a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, a.z + (b.z - a.z) * t};
      const long double n = norm(s);
      s = {s.x / n, s.y / n, s.z / n};
      best = std::min(best, kRadius * std::atan2(norm(cross(q, s)), dot(q, s)));
    }
  }
  return best;
}

/// Point-in-polygon by ray casting in a gnomonic projection about `center`
/// (great circles map to straight lines there).
inline bool inside(const GeoAnchor& p, const std::vector<GeoAnchor>& ring, const GeoAnchor& center) {
  const V3 c = unit(center.lat, center.lon);
  V3 east = cross({0, 0, 1}, c);
  east = {east.x / norm(east), east.y / norm(east), east.z / norm(east)};
  const V3 north = cross(c, east);
  auto project = [&](const GeoAnchor& g) {
    const V3 v = unit(g.lat, g.lon);
    const long double d = dot(v, c);
    return std::pair<long double, long double>{dot(v, east) / d, dot(v, north) / d};
  };
  const auto [px, py] = project(p);
  bool in = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const auto [xi, yi] = project(ring[i]);
    const auto [xj, yj] = project(ring[j]);
    if ((yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi) in = !in;
  }
  return in;
}

}  // namespace geocollab::testing::oracle
