#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace geocollab {

using Json = nlohmann::json;

/// A point on the reference sphere, optionally naming the scene object it
/// refers to. Used for chat anchors, comment anchors and all scene geometry.
struct GeoAnchor {
  double lat = 0.0;     // [-90, 90]
  double lon = 0.0;     // [-180, 180)
  double height = 0.0;  // meters above the reference sphere
  std::optional<std::string> feature_id;

  bool operator==(const GeoAnchor&) const = default;
};

bool is_valid(const GeoAnchor& a) noexcept;

Json to_json(const GeoAnchor& a);

// Throws Error(SchemaViolation, field) on shape errors and
// Error(InvariantViolation, field) on out-of-range values.
GeoAnchor anchor_from_json(const Json& j, std::string_view field = "anchor");

// Field access helpers shared by every JSON decoder in the library. Each throws
// Error(SchemaViolation, "<field>.<key>") when the key is missing or mistyped.
namespace json_field {
const Json& require(const Json& obj, std::string_view key, std::string_view field);
std::string string(const Json& obj, std::string_view key, std::string_view field);
double number(const Json& obj, std::string_view key, std::string_view field);
std::int64_t integer(const Json& obj, std::string_view key, std::string_view field);
bool boolean(const Json& obj, std::string_view key, std::string_view field);
std::optional<std::string> opt_string(const Json& obj, std::string_view key, std::string_view field);
std::optional<double> opt_number(const Json& obj, std::string_view key, std::string_view field);
std::string join(std::string_view field, std::string_view key);
}  // namespace json_field

/// Number of Unicode code points in a UTF-8 string (invalid bytes count as one each).
std::size_t utf8_length(std::string_view s) noexcept;

}  // namespace geocollab
