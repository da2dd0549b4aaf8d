#include "geocollab/analysis.hpp"

#include <cmath>
#include <numbers>

#include "geocollab/error.hpp"

namespace geocollab::analysis {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

double normalize_lon(double lon) {
  lon = std::fmod(lon + 180.0, 360.0);
  if (lon < 0) lon += 360.0;
  return lon - 180.0;
}

double initial_bearing_rad(const GeoPoint& from, const GeoPoint& to) {
  const double p1 = from.lat * kDeg, p2 = to.lat * kDeg;
  const double dl = (to.lon - from.lon) * kDeg;
  return std::atan2(std::sin(dl) * std::cos(p2), std::cos(p1) * std::sin(p2) - std::sin(p1) * std::cos(p2) * std::cos(dl));
}

void check_radius(double radius_m) {
  if (!std::isfinite(radius_m) || radius_m <= 0.0 || radius_m > kMaxBufferRadiusM)
    throw Error(Errc::InvalidRadius, "radius must be in (0, 1000000] meters");
}

void check_point(const GeoPoint& p) {
  if (!is_valid(p)) throw Error(Errc::InvalidPoint, "point out of range");
}

struct Vec2 {
  double x = 0, y = 0;
  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
};
double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }
Vec2 polar(double angle) { return {std::cos(angle), std::sin(angle)}; }

// Azimuthal equidistant projection about `center`: x east, y north, meters.
// Distances and bearings from the centre are preserved exactly.
class LocalPlane {
 public:
  explicit LocalPlane(GeoPoint center) : center_(center) {}

  Vec2 forward(const GeoPoint& p) const {
    const double d = geodesic_distance(center_, p);
    if (d == 0.0) return {};
    const double b = initial_bearing_rad(center_, p);
    return {d * std::sin(b), d * std::cos(b)};
  }

  GeoPoint inverse(Vec2 v) const {
    const double d = norm(v);
    if (d == 0.0) return center_;
    return destination(center_, std::atan2(v.x, v.y) / kDeg, d);
  }

 private:
  GeoPoint center_;
};

GeoPoint spherical_centroid(std::span<const GeoPoint> pts) {
  double x = 0, y = 0, z = 0;
  for (const auto& p : pts) {
    const double la = p.lat * kDeg, lo = p.lon * kDeg;
    x += std::cos(la) * std::cos(lo);
    y += std::cos(la) * std::sin(lo);
    z += std::sin(la);
  }
  const double h = std::hypot(x, y);
  if (h == 0.0 && z == 0.0) return pts.front();
  return {std::atan2(z, h) / kDeg, normalize_lon(std::atan2(y, x) / kDeg)};
}

// Points on a circle of `radius` around `c`, sweeping counterclockwise from
// angle `from` by `sweep` radians, both ends included.
void append_arc(std::vector<Vec2>& ring, Vec2 c, double radius, double from, double sweep, int min_points) {
  const int steps = std::max(min_points - 1, static_cast<int>(std::ceil(sweep / (kPi / (kCapArcVertices - 1)))));
  for (int j = 0; j <= steps; ++j) ring.push_back(c + polar(from + sweep * j / steps) * radius);
}

double ccw_sweep(double from, double to) {
  double s = std::fmod(to - from, 2 * kPi);
  if (s < 0) s += 2 * kPi;
  return s;
}

// Concave side of a join: the intersection of the two offset lines when it
// falls on both offset segments, otherwise both offset endpoints.
void append_inner_join(std::vector<Vec2>& ring, Vec2 a0, Vec2 dir_a, double len_a, Vec2 b0, Vec2 dir_b, double len_b,
                       bool a_first) {
  const double denom = cross(dir_a, dir_b);
  if (std::abs(denom) > 1e-12) {
    const double t = cross(b0 - a0, dir_b) / denom;
    const double s = cross(b0 - a0, dir_a) / denom;
    if (t >= 0 && t <= len_a && s >= 0 && s <= len_b) {
      ring.push_back(a0 + dir_a * t);
      return;
    }
  }
  const Vec2 a_end = a0 + dir_a * len_a;
  if (a_first) {
    ring.push_back(a_end);
    ring.push_back(b0);
  } else {
    ring.push_back(b0);
    ring.push_back(a_end);
  }
}

}  // namespace

bool is_valid(const GeoPoint& p) noexcept {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 && p.lon >= -180.0 &&
         p.lon < 180.0;
}

double geodesic_distance(const GeoPoint& a, const GeoPoint& b) {
  check_point(a);
  check_point(b);
  const double p1 = a.lat * kDeg, p2 = b.lat * kDeg;
  const double s_lat = std::sin((p2 - p1) / 2);
  const double s_lon = std::sin((b.lon - a.lon) * kDeg / 2);
  double h = s_lat * s_lat + std::cos(p1) * std::cos(p2) * s_lon * s_lon;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusM * std::atan2(std::sqrt(h), std::sqrt(1.0 - h));
}

GeoPoint destination(const GeoPoint& start, double bearing_deg, double distance_m) noexcept {
  const double delta = distance_m / kEarthRadiusM;
  const double theta = bearing_deg * kDeg;
  const double p1 = start.lat * kDeg, l1 = start.lon * kDeg;
  const double sin_p2 = std::clamp(std::sin(p1) * std::cos(delta) + std::cos(p1) * std::sin(delta) * std::cos(theta), -1.0, 1.0);
  const double p2 = std::asin(sin_p2);
  const double l2 = l1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(p1), std::cos(delta) - std::sin(p1) * sin_p2);
  return {p2 / kDeg, normalize_lon(l2 / kDeg)};
}

std::vector<GeoAnchor> buffer_point(const GeoPoint& center, double radius_m, int n) {
  check_point(center);
  check_radius(radius_m);
  if (n < 3) throw Error(Errc::InvalidRadius, "a buffer needs at least 3 vertices");
  const double pole_gap_m = (90.0 - std::abs(center.lat)) * kDeg * kEarthRadiusM;
  if (pole_gap_m <= radius_m) throw Error(Errc::PoleProximity, "buffer would contain a pole");

  std::vector<GeoAnchor> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double bearing = k == 0 ? 0.0 : 360.0 - 360.0 * k / n;
    const GeoPoint v = destination(center, bearing, radius_m);
    out.push_back(GeoAnchor{v.lat, v.lon, 0.0, std::nullopt});
  }
  return out;
}

std::vector<GeoAnchor> buffer_polyline(std::span<const GeoPoint> line, double radius_m) {
  check_radius(radius_m);
  if (line.size() < 2) throw Error(Errc::InvalidPoint, "a polyline needs at least 2 points");
  for (const auto& p : line) check_point(p);
  for (std::size_t i = 1; i < line.size(); ++i)
    if (geodesic_distance(line[i - 1], line[i]) > kMaxSegmentM)
      throw Error(Errc::SegmentTooLong, "segment " + std::to_string(i - 1) + " exceeds 100 km");

  const LocalPlane plane(spherical_centroid(line));
  std::vector<Vec2> pts;
  for (const auto& p : line) {
    const Vec2 v = plane.forward(p);
    if (pts.empty() || norm(v - pts.back()) > 1e-6) pts.push_back(v);
  }
  if (pts.size() == 1) return buffer_point(line.front(), radius_m);

  const std::size_t m = pts.size();
  std::vector<Vec2> dir(m - 1);
  std::vector<double> len(m - 1);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    len[i] = norm(pts[i + 1] - pts[i]);
    dir[i] = (pts[i + 1] - pts[i]) * (1.0 / len[i]);
  }
  auto angle_of = [](Vec2 v) { return std::atan2(v.y, v.x); };
  auto right_normal = [](Vec2 d) { return Vec2{d.y, -d.x}; };
  auto left_normal = [](Vec2 d) { return Vec2{-d.y, d.x}; };
  const double r = radius_m;

  std::vector<Vec2> ring;
  // Start cap: left normal round the back to the right normal.
  append_arc(ring, pts[0], r, angle_of(left_normal(dir[0])), kPi, kCapArcVertices);

  // Right side, forward.
  for (std::size_t i = 1; i + 1 < m; ++i) {
    const Vec2 d1 = dir[i - 1], d2 = dir[i];
    const double turn = cross(d1, d2);
    const Vec2 n1 = right_normal(d1), n2 = right_normal(d2);
    if (std::abs(turn) < 1e-12 && dot(d1, d2) > 0) {
      ring.push_back(pts[i] + n1 * r);
    } else if (turn >= 0) {
      const double from = angle_of(n1);
      append_arc(ring, pts[i], r, from, ccw_sweep(from, angle_of(n2)), 2);
    } else {
      append_inner_join(ring, pts[i - 1] + n1 * r, d1, len[i - 1], pts[i] + n2 * r, d2, len[i], true);
    }
  }

  // End cap: right normal round the front to the left normal.
  append_arc(ring, pts[m - 1], r, angle_of(right_normal(dir[m - 2])), kPi, kCapArcVertices);

  // Left side, backward.
  for (std::size_t i = m - 2; i >= 1; --i) {
    const Vec2 d1 = dir[i - 1], d2 = dir[i];
    const double turn = cross(d1, d2);
    const Vec2 n1 = left_normal(d1), n2 = left_normal(d2);
    if (std::abs(turn) < 1e-12 && dot(d1, d2) > 0) {
      ring.push_back(pts[i] + n1 * r);
    } else if (turn < 0) {
      const double from = angle_of(n2);
      append_arc(ring, pts[i], r, from, ccw_sweep(from, angle_of(n1)), 2);
    } else {
      append_inner_join(ring, pts[i - 1] + n1 * r, d1, len[i - 1], pts[i] + n2 * r, d2, len[i], false);
    }
  }

  std::vector<GeoAnchor> out;
  out.reserve(ring.size());
  for (const Vec2& v : ring) {
    const GeoPoint g = plane.inverse(v);
    out.push_back(GeoAnchor{g.lat, g.lon, 0.0, std::nullopt});
  }
  return out;
}

namespace {

GeoPoint point_param(const Json& params, std::string_view key) {
  const Json& p = json_field::require(params, key, "params");
  const std::string f = json_field::join("params", key);
  GeoPoint g{json_field::number(p, "lat", f), json_field::number(p, "lon", f)};
  check_point(g);
  return g;
}

Json polygon_json(const std::vector<GeoAnchor>& poly) {
  Json arr = Json::array();
  for (const auto& a : poly) arr.push_back(to_json(a));
  return {{"polygon", std::move(arr)}};
}

}  // namespace

bool is_builtin(std::string_view op_kind) noexcept {
  return op_kind == "distance" || op_kind == "buffer_point" || op_kind == "buffer_polyline";
}

Json run_builtin(std::string_view op_kind, const Json& params) {
  if (op_kind == "distance") {
    return {{"meters", geodesic_distance(point_param(params, "a"), point_param(params, "b"))}};
  }
  if (op_kind == "buffer_point") {
    int n = 64;
    if (params.contains("n")) n = static_cast<int>(json_field::integer(params, "n", "params"));
    return polygon_json(buffer_point(point_param(params, "center"), json_field::number(params, "radius_m", "params"), n));
  }
  if (op_kind == "buffer_polyline") {
    const Json& arr = json_field::require(params, "line", "params");
    if (!arr.is_array()) throw Error(Errc::SchemaViolation, "expected an array", "params.line");
    std::vector<GeoPoint> line;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string f = "params.line[" + std::to_string(i) + "]";
      line.push_back({json_field::number(arr[i], "lat", f), json_field::number(arr[i], "lon", f)});
    }
    return polygon_json(buffer_polyline(line, json_field::number(params, "radius_m", "params")));
  }
  throw Error(Errc::UnknownService, "no built-in analysis '" + std::string(op_kind) + "'");
}

}  // namespace geocollab::analysis
