#pragma once

#include <span>
#include <vector>

#include "geocollab/geo_anchor.hpp"

namespace geocollab::analysis {

/// Mean earth radius used by every spherical computation in the project.
inline constexpr double kEarthRadiusM = 6'371'008.8;
inline constexpr double kMaxBufferRadiusM = 1'000'000.0;
inline constexpr double kMaxSegmentM = 100'000.0;
inline constexpr int kCapArcVertices = 16;

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

bool is_valid(const GeoPoint& p) noexcept;

/// Great-circle distance in meters (haversine). Throws Error(InvalidPoint).
double geodesic_distance(const GeoPoint& a, const GeoPoint& b);

/// Point reached from `start` after travelling `distance_m` along the initial
/// bearing (degrees clockwise from north). Longitude normalized to [-180, 180).
GeoPoint destination(const GeoPoint& start, double bearing_deg, double distance_m) noexcept;

/// n-gon around `center`, every vertex `radius_m` away, counterclockwise
/// starting at true north.
/// Throws Error(InvalidRadius) for radius outside (0, 1e6] or n < 3, and
/// Error(PoleProximity) when a pole lies within the radius.
std::vector<GeoAnchor> buffer_point(const GeoPoint& center, double radius_m, int n = 64);

/// Buffer around a polyline, built in an azimuthal-equidistant plane centred
/// on the line and projected back. Round caps with kCapArcVertices arc
/// vertices, round outer joins.
/// Throws Error(SegmentTooLong) for any segment over 100 km and
/// Error(InvalidRadius) as buffer_point.
std::vector<GeoAnchor> buffer_polyline(std::span<const GeoPoint> line, double radius_m);

/// Op dispatcher for the built-in op kinds "distance", "buffer_point" and
/// "buffer_polyline". Returns the op_result `result` object.
/// Throws Error(UnknownService) for other kinds and Error(SchemaViolation)
/// for malformed params.
Json run_builtin(std::string_view op_kind, const Json& params);
bool is_builtin(std::string_view op_kind) noexcept;

}  // namespace geocollab::analysis
