#include "geocollab/geo_anchor.hpp"

#include <cmath>

#include "geocollab/error.hpp"

namespace geocollab {

bool is_valid(const GeoAnchor& a) noexcept {
  if (!std::isfinite(a.lat) || !std::isfinite(a.lon) || !std::isfinite(a.height)) return false;
  if (a.lat < -90.0 || a.lat > 90.0) return false;
  if (a.lon < -180.0 || a.lon >= 180.0) return false;
  if (a.feature_id && a.feature_id->empty()) return false;
  return true;
}

Json to_json(const GeoAnchor& a) {
  Json j = {{"lat", a.lat}, {"lon", a.lon}, {"height", a.height}};
  if (a.feature_id) j["feature_id"] = *a.feature_id;
  return j;
}

GeoAnchor anchor_from_json(const Json& j, std::string_view field) {
  if (!j.is_object()) throw Error(Errc::SchemaViolation, "anchor must be an object", std::string(field));
  GeoAnchor a;
  a.lat = json_field::number(j, "lat", field);
  a.lon = json_field::number(j, "lon", field);
  a.height = json_field::opt_number(j, "height", field).value_or(0.0);
  a.feature_id = json_field::opt_string(j, "feature_id", field);
  if (!is_valid(a)) throw Error(Errc::InvariantViolation, "anchor out of range", std::string(field));
  return a;
}

namespace json_field {

std::string join(std::string_view field, std::string_view key) {
  if (field.empty()) return std::string(key);
  std::string out(field);
  out += '.';
  out += key;
  return out;
}

const Json& require(const Json& obj, std::string_view key, std::string_view field) {
  if (!obj.is_object()) throw Error(Errc::SchemaViolation, "expected an object", std::string(field));
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(Errc::SchemaViolation, "missing field", join(field, key));
  return *it;
}

std::string string(const Json& obj, std::string_view key, std::string_view field) {
  const Json& v = require(obj, key, field);
  if (!v.is_string()) throw Error(Errc::SchemaViolation, "expected a string", join(field, key));
  return v.get<std::string>();
}

double number(const Json& obj, std::string_view key, std::string_view field) {
  const Json& v = require(obj, key, field);
  if (!v.is_number()) throw Error(Errc::SchemaViolation, "expected a number", join(field, key));
  double d = v.get<double>();
  if (!std::isfinite(d)) throw Error(Errc::SchemaViolation, "number not finite", join(field, key));
  return d;
}

std::int64_t integer(const Json& obj, std::string_view key, std::string_view field) {
  const Json& v = require(obj, key, field);
  if (v.is_number_unsigned()) {
    auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(INT64_MAX))
      throw Error(Errc::SchemaViolation, "integer out of range", join(field, key));
    return static_cast<std::int64_t>(u);
  }
  if (!v.is_number_integer()) throw Error(Errc::SchemaViolation, "expected an integer", join(field, key));
  return v.get<std::int64_t>();
}

bool boolean(const Json& obj, std::string_view key, std::string_view field) {
  const Json& v = require(obj, key, field);
  if (!v.is_boolean()) throw Error(Errc::SchemaViolation, "expected a boolean", join(field, key));
  return v.get<bool>();
}

std::optional<std::string> opt_string(const Json& obj, std::string_view key, std::string_view field) {
  if (!obj.is_object() || !obj.contains(key)) return std::nullopt;
  return string(obj, key, field);
}

std::optional<double> opt_number(const Json& obj, std::string_view key, std::string_view field) {
  if (!obj.is_object() || !obj.contains(key)) return std::nullopt;
  return number(obj, key, field);
}

}  // namespace json_field

std::size_t utf8_length(std::string_view s) noexcept {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

}  // namespace geocollab
