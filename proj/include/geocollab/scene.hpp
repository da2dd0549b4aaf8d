#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "geocollab/geo_anchor.hpp"
#include "geocollab/protocol.hpp"

namespace geocollab::geo {

/// Camera pose shared from the leader to every follower.
struct ViewState {
  GeoAnchor position;
  double heading = 0.0;  // [0, 360)
  double pitch = 0.0;    // [-90, 90]
  double roll = 0.0;     // [-180, 180)

  bool operator==(const ViewState&) const = default;
};

enum class SketchKind { polyline, polygon, arrow, text_annotation };

struct SketchStyle {
  std::optional<std::string> color;
  std::optional<double> width;  // > 0

  bool operator==(const SketchStyle&) const = default;
};

struct Sketch {
  std::string id;
  SketchKind kind = SketchKind::polyline;
  std::vector<GeoAnchor> vertices;  // arrow: tail then head
  std::optional<std::string> text;  // text_annotation only
  std::string author;
  std::optional<SketchStyle> style;

  bool operator==(const Sketch&) const = default;
};

struct ModelPlacement {
  std::string id;
  std::string model_ref;
  GeoAnchor position;
  double heading = 0.0;
  double scale = 1.0;

  bool operator==(const ModelPlacement&) const = default;
};

enum class GeometryType { point, linestring, polygon };

struct Feature {
  GeometryType type = GeometryType::point;
  std::vector<GeoAnchor> coordinates;  // polygon: exterior ring, not closed
  std::map<std::string, std::string> properties;

  bool operator==(const Feature&) const = default;
};

struct VectorLayer {
  std::string id;
  std::string name;
  std::vector<Feature> features;

  bool operator==(const VectorLayer&) const = default;
};

enum class Stage { problem_definition, problem_analysis, solution_generation, solution_evaluation };

struct SceneState {
  std::map<std::string, Sketch> sketches;
  std::map<std::string, ModelPlacement> placements;
  std::map<std::string, VectorLayer> layers;
  Stage stage = Stage::problem_definition;

  bool operator==(const SceneState&) const = default;
};

// Scene-mutating actions, one per mutating message kind.
struct SketchCreate { Sketch sketch; };
struct SketchDelete { std::string id; };
struct ModelPlace { ModelPlacement placement; };
struct ModelMove {
  std::string id;
  GeoAnchor position;
  std::optional<double> heading;
  std::optional<double> scale;
};
struct ModelRemove { std::string id; };
struct LayerImport { VectorLayer layer; };
struct StageChange { Stage stage; };

using SceneAction =
    std::variant<SketchCreate, SketchDelete, ModelPlace, ModelMove, ModelRemove, LayerImport, StageChange>;

std::string_view to_string(SketchKind k) noexcept;
std::string_view to_string(GeometryType t) noexcept;
std::string_view to_string(Stage s) noexcept;
std::optional<Stage> stage_from_string(std::string_view s) noexcept;

bool is_valid(const ViewState& v) noexcept;

// JSON codecs. Decoders validate every type invariant and throw
// Error(SchemaViolation | InvariantViolation, field).
Json to_json(const ViewState& v);
Json to_json(const Sketch& s);
Json to_json(const ModelPlacement& p);
Json to_json(const VectorLayer& l);
Json to_json(const SceneState& s);
ViewState view_from_json(const Json& j, std::string_view field = "view");
Sketch sketch_from_json(const Json& j, std::string_view field = "sketch");
ModelPlacement placement_from_json(const Json& j, std::string_view field = "placement");
VectorLayer layer_from_json(const Json& j, std::string_view field = "layer");
SceneState scene_from_json(const Json& j, std::string_view field = "scene");

/// Parses a mutating message payload. layer_import accepts either an inline
/// layer ({id, name, features}) or {id, name, geojson} which is ingested.
SceneAction parse_scene_action(protocol::MessageKind kind, const Json& payload);
protocol::MessageKind action_kind(const SceneAction& action) noexcept;
Json action_payload(const SceneAction& action);

/// Pure and deterministic. Throws Error(DuplicateId | UnknownId | InvariantViolation);
/// the input is never partially modified.
SceneState scene_apply(SceneState scene, const SceneAction& action);

using SceneDigest = std::array<std::uint8_t, 32>;

/// Compact JSON with ascending keys and floats printed with 9 significant digits.
std::string canonical_serialization(const SceneState& scene);
/// SHA-256 of canonical_serialization.
SceneDigest scene_hash(const SceneState& scene);
std::string to_hex(const SceneDigest& d);

/// Converts a GeoJSON FeatureCollection (Point, LineString, Polygon only) into a layer.
/// Throws Error(ParseError) on malformed input and Error(UnsupportedGeometry) on
/// Multi*, GeometryCollection or polygons with holes.
VectorLayer ingest_geojson(std::string_view doc, std::string id = "layer", std::string name = {});

}  // namespace geocollab::geo
