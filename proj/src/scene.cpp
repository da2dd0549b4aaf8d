#include "geocollab/scene.hpp"

#include <cmath>

#include "geocollab/error.hpp"

namespace geocollab::geo {

using json_field::join;
using protocol::MessageKind;

namespace {

bool in_heading_range(double h) { return std::isfinite(h) && h >= 0.0 && h < 360.0; }

std::size_t min_vertices(SketchKind k) {
  switch (k) {
    case SketchKind::polyline: return 2;
    case SketchKind::polygon: return 3;
    case SketchKind::arrow: return 2;
    case SketchKind::text_annotation: return 1;
  }
  return 1;
}

std::optional<std::size_t> exact_vertices(SketchKind k) {
  if (k == SketchKind::arrow) return 2;
  if (k == SketchKind::text_annotation) return 1;
  return std::nullopt;
}

std::optional<SketchKind> sketch_kind_from_string(std::string_view s) {
  if (s == "polyline") return SketchKind::polyline;
  if (s == "polygon") return SketchKind::polygon;
  if (s == "arrow") return SketchKind::arrow;
  if (s == "text_annotation") return SketchKind::text_annotation;
  return std::nullopt;
}

std::optional<GeometryType> geometry_from_string(std::string_view s) {
  if (s == "point") return GeometryType::point;
  if (s == "linestring") return GeometryType::linestring;
  if (s == "polygon") return GeometryType::polygon;
  return std::nullopt;
}

std::vector<GeoAnchor> anchors_from_json(const Json& obj, std::string_view key, std::string_view field) {
  const Json& arr = json_field::require(obj, key, field);
  const std::string here = join(field, key);
  if (!arr.is_array()) throw Error(Errc::SchemaViolation, "expected an array", here);
  std::vector<GeoAnchor> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i)
    out.push_back(anchor_from_json(arr[i], here + "[" + std::to_string(i) + "]"));
  return out;
}

Json anchors_to_json(const std::vector<GeoAnchor>& v) {
  Json arr = Json::array();
  for (const auto& a : v) arr.push_back(to_json(a));
  return arr;
}

std::string non_empty_string(const Json& obj, std::string_view key, std::string_view field) {
  std::string s = json_field::string(obj, key, field);
  if (s.empty()) throw Error(Errc::InvariantViolation, "must not be empty", join(field, key));
  return s;
}

bool id_in_use(const SceneState& scene, const std::string& id) {
  return scene.sketches.contains(id) || scene.placements.contains(id) || scene.layers.contains(id);
}

void check_sketch(const Sketch& s, std::string_view field) {
  if (s.id.empty()) throw Error(Errc::InvariantViolation, "empty sketch id", join(field, "id"));
  if (s.author.empty()) throw Error(Errc::InvariantViolation, "empty author", join(field, "author"));
  const auto n = s.vertices.size();
  if (n < min_vertices(s.kind) || (exact_vertices(s.kind) && n != *exact_vertices(s.kind)))
    throw Error(Errc::InvariantViolation, "vertex count invalid for " + std::string(to_string(s.kind)),
                join(field, "vertices"));
  for (const auto& v : s.vertices)
    if (!is_valid(v)) throw Error(Errc::InvariantViolation, "vertex out of range", join(field, "vertices"));
  const bool wants_text = s.kind == SketchKind::text_annotation;
  if (wants_text && (!s.text || s.text->empty()))
    throw Error(Errc::InvariantViolation, "text_annotation requires text", join(field, "text"));
  if (!wants_text && s.text) throw Error(Errc::InvariantViolation, "text only allowed on text_annotation", join(field, "text"));
  if (s.style && s.style->width && !(std::isfinite(*s.style->width) && *s.style->width > 0.0))
    throw Error(Errc::InvariantViolation, "style width must be positive", join(field, "style.width"));
}

void check_placement(const ModelPlacement& p, std::string_view field) {
  if (p.id.empty()) throw Error(Errc::InvariantViolation, "empty placement id", join(field, "id"));
  if (p.model_ref.empty()) throw Error(Errc::InvariantViolation, "empty model_ref", join(field, "model_ref"));
  if (!is_valid(p.position)) throw Error(Errc::InvariantViolation, "position out of range", join(field, "position"));
  if (!in_heading_range(p.heading)) throw Error(Errc::InvariantViolation, "heading out of range", join(field, "heading"));
  if (!(std::isfinite(p.scale) && p.scale > 0.0)) throw Error(Errc::InvariantViolation, "scale must be positive", join(field, "scale"));
}

void check_feature(const Feature& f, std::string_view field) {
  const auto n = f.coordinates.size();
  const bool ok = (f.type == GeometryType::point && n == 1) || (f.type == GeometryType::linestring && n >= 2) ||
                  (f.type == GeometryType::polygon && n >= 3);
  if (!ok) throw Error(Errc::InvariantViolation, "vertex count invalid for " + std::string(to_string(f.type)), std::string(field));
  for (const auto& a : f.coordinates)
    if (!is_valid(a)) throw Error(Errc::InvariantViolation, "coordinate out of range", std::string(field));
}

}  // namespace

std::string_view to_string(SketchKind k) noexcept {
  switch (k) {
    case SketchKind::polyline: return "polyline";
    case SketchKind::polygon: return "polygon";
    case SketchKind::arrow: return "arrow";
    case SketchKind::text_annotation: return "text_annotation";
  }
  return "polyline";
}

std::string_view to_string(GeometryType t) noexcept {
  switch (t) {
    case GeometryType::point: return "point";
    case GeometryType::linestring: return "linestring";
    case GeometryType::polygon: return "polygon";
  }
  return "point";
}

std::string_view to_string(Stage s) noexcept {
  switch (s) {
    case Stage::problem_definition: return "problem_definition";
    case Stage::problem_analysis: return "problem_analysis";
    case Stage::solution_generation: return "solution_generation";
    case Stage::solution_evaluation: return "solution_evaluation";
  }
  return "problem_definition";
}

std::optional<Stage> stage_from_string(std::string_view s) noexcept {
  for (Stage st : {Stage::problem_definition, Stage::problem_analysis, Stage::solution_generation,
                   Stage::solution_evaluation})
    if (to_string(st) == s) return st;
  return std::nullopt;
}

bool is_valid(const ViewState& v) noexcept {
  return is_valid(v.position) && in_heading_range(v.heading) && std::isfinite(v.pitch) && v.pitch >= -90.0 &&
         v.pitch <= 90.0 && std::isfinite(v.roll) && v.roll >= -180.0 && v.roll < 180.0;
}

// ---- encoders ----

Json to_json(const ViewState& v) {
  return {{"position", to_json(v.position)}, {"heading", v.heading}, {"pitch", v.pitch}, {"roll", v.roll}};
}

Json to_json(const Sketch& s) {
  Json j = {{"id", s.id},
            {"kind", std::string(to_string(s.kind))},
            {"vertices", anchors_to_json(s.vertices)},
            {"author", s.author}};
  if (s.text) j["text"] = *s.text;
  if (s.style) {
    Json st = Json::object();
    if (s.style->color) st["color"] = *s.style->color;
    if (s.style->width) st["width"] = *s.style->width;
    j["style"] = std::move(st);
  }
  return j;
}

Json to_json(const ModelPlacement& p) {
  return {{"id", p.id},
          {"model_ref", p.model_ref},
          {"position", to_json(p.position)},
          {"heading", p.heading},
          {"scale", p.scale}};
}

Json to_json(const VectorLayer& l) {
  Json features = Json::array();
  for (const auto& f : l.features) {
    features.push_back({{"geometry", {{"type", std::string(to_string(f.type))}, {"coordinates", anchors_to_json(f.coordinates)}}},
                        {"properties", f.properties}});
  }
  return {{"id", l.id}, {"name", l.name}, {"features", std::move(features)}};
}

Json to_json(const SceneState& s) {
  Json sketches = Json::object();
  for (const auto& [id, sk] : s.sketches) sketches[id] = to_json(sk);
  Json placements = Json::object();
  for (const auto& [id, p] : s.placements) placements[id] = to_json(p);
  Json layers = Json::object();
  for (const auto& [id, l] : s.layers) layers[id] = to_json(l);
  return {{"sketches", std::move(sketches)},
          {"placements", std::move(placements)},
          {"layers", std::move(layers)},
          {"stage", std::string(to_string(s.stage))}};
}

// ---- decoders ----

ViewState view_from_json(const Json& j, std::string_view field) {
  ViewState v;
  v.position = anchor_from_json(json_field::require(j, "position", field), join(field, "position"));
  v.heading = json_field::number(j, "heading", field);
  v.pitch = json_field::number(j, "pitch", field);
  v.roll = json_field::number(j, "roll", field);
  if (!is_valid(v)) throw Error(Errc::InvariantViolation, "view angles out of range", std::string(field));
  return v;
}

Sketch sketch_from_json(const Json& j, std::string_view field) {
  Sketch s;
  s.id = json_field::string(j, "id", field);
  const std::string kind = json_field::string(j, "kind", field);
  auto k = sketch_kind_from_string(kind);
  if (!k) throw Error(Errc::SchemaViolation, "unknown sketch kind '" + kind + "'", join(field, "kind"));
  s.kind = *k;
  s.vertices = anchors_from_json(j, "vertices", field);
  s.text = json_field::opt_string(j, "text", field);
  s.author = json_field::string(j, "author", field);
  if (j.contains("style")) {
    const Json& st = j["style"];
    const std::string sf = join(field, "style");
    if (!st.is_object()) throw Error(Errc::SchemaViolation, "expected an object", sf);
    s.style = SketchStyle{json_field::opt_string(st, "color", sf), json_field::opt_number(st, "width", sf)};
  }
  check_sketch(s, field);
  return s;
}

ModelPlacement placement_from_json(const Json& j, std::string_view field) {
  ModelPlacement p;
  p.id = json_field::string(j, "id", field);
  p.model_ref = json_field::string(j, "model_ref", field);
  p.position = anchor_from_json(json_field::require(j, "position", field), join(field, "position"));
  p.heading = json_field::opt_number(j, "heading", field).value_or(0.0);
  p.scale = json_field::opt_number(j, "scale", field).value_or(1.0);
  check_placement(p, field);
  return p;
}

VectorLayer layer_from_json(const Json& j, std::string_view field) {
  VectorLayer l;
  l.id = non_empty_string(j, "id", field);
  l.name = json_field::string(j, "name", field);
  const Json& features = json_field::require(j, "features", field);
  const std::string ff = join(field, "features");
  if (!features.is_array()) throw Error(Errc::SchemaViolation, "expected an array", ff);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const std::string here = ff + "[" + std::to_string(i) + "]";
    const Json& fj = features[i];
    const Json& geom = json_field::require(fj, "geometry", here);
    const std::string gf = join(here, "geometry");
    Feature f;
    const std::string type = json_field::string(geom, "type", gf);
    auto t = geometry_from_string(type);
    if (!t) throw Error(Errc::SchemaViolation, "unknown geometry type '" + type + "'", join(gf, "type"));
    f.type = *t;
    f.coordinates = anchors_from_json(geom, "coordinates", gf);
    if (fj.contains("properties")) {
      const Json& props = fj["properties"];
      if (!props.is_object()) throw Error(Errc::SchemaViolation, "expected an object", join(here, "properties"));
      for (const auto& [k, v] : props.items()) {
        if (!v.is_string()) throw Error(Errc::SchemaViolation, "property values must be strings", join(here, "properties." + k));
        f.properties.emplace(k, v.get<std::string>());
      }
    }
    check_feature(f, here);
    l.features.push_back(std::move(f));
  }
  return l;
}

SceneState scene_from_json(const Json& j, std::string_view field) {
  SceneState s;
  const std::string stage = json_field::string(j, "stage", field);
  auto st = stage_from_string(stage);
  if (!st) throw Error(Errc::SchemaViolation, "unknown stage '" + stage + "'", join(field, "stage"));
  s.stage = *st;

  auto each = [&](std::string_view key, auto&& insert) {
    const Json& m = json_field::require(j, key, field);
    const std::string mf = join(field, key);
    if (!m.is_object()) throw Error(Errc::SchemaViolation, "expected an object", mf);
    for (const auto& [id, v] : m.items()) insert(id, v, join(mf, id));
  };
  each("sketches", [&](const std::string& id, const Json& v, const std::string& f) {
    Sketch sk = sketch_from_json(v, f);
    if (sk.id != id) throw Error(Errc::InvariantViolation, "map key differs from id", f);
    s.sketches.emplace(id, std::move(sk));
  });
  each("placements", [&](const std::string& id, const Json& v, const std::string& f) {
    ModelPlacement p = placement_from_json(v, f);
    if (p.id != id) throw Error(Errc::InvariantViolation, "map key differs from id", f);
    s.placements.emplace(id, std::move(p));
  });
  each("layers", [&](const std::string& id, const Json& v, const std::string& f) {
    VectorLayer l = layer_from_json(v, f);
    if (l.id != id) throw Error(Errc::InvariantViolation, "map key differs from id", f);
    s.layers.emplace(id, std::move(l));
  });
  return s;
}

// ---- actions ----

SceneAction parse_scene_action(MessageKind kind, const Json& payload) {
  constexpr std::string_view f = "payload";
  switch (kind) {
    case MessageKind::sketch_create:
      return SketchCreate{sketch_from_json(payload, f)};
    case MessageKind::sketch_delete:
      return SketchDelete{non_empty_string(payload, "id", f)};
    case MessageKind::model_place:
      return ModelPlace{placement_from_json(payload, f)};
    case MessageKind::model_move: {
      ModelMove m;
      m.id = non_empty_string(payload, "id", f);
      m.position = anchor_from_json(json_field::require(payload, "position", f), "payload.position");
      m.heading = json_field::opt_number(payload, "heading", f);
      m.scale = json_field::opt_number(payload, "scale", f);
      if (m.heading && !in_heading_range(*m.heading))
        throw Error(Errc::InvariantViolation, "heading out of range", "payload.heading");
      if (m.scale && !(*m.scale > 0.0)) throw Error(Errc::InvariantViolation, "scale must be positive", "payload.scale");
      return m;
    }
    case MessageKind::model_remove:
      return ModelRemove{non_empty_string(payload, "id", f)};
    case MessageKind::layer_import: {
      if (payload.is_object() && payload.contains("geojson")) {
        std::string id = non_empty_string(payload, "id", f);
        std::string name = json_field::opt_string(payload, "name", f).value_or(id);
        return LayerImport{ingest_geojson(json_field::string(payload, "geojson", f), std::move(id), std::move(name))};
      }
      return LayerImport{layer_from_json(payload, f)};
    }
    case MessageKind::stage_change: {
      const std::string s = json_field::string(payload, "stage", f);
      auto st = stage_from_string(s);
      if (!st) throw Error(Errc::SchemaViolation, "unknown stage '" + s + "'", "payload.stage");
      return StageChange{*st};
    }
    default:
      throw Error(Errc::InvalidAction, std::string(protocol::to_string(kind)) + " does not mutate the scene");
  }
}

MessageKind action_kind(const SceneAction& action) noexcept {
  struct {
    MessageKind operator()(const SketchCreate&) const { return MessageKind::sketch_create; }
    MessageKind operator()(const SketchDelete&) const { return MessageKind::sketch_delete; }
    MessageKind operator()(const ModelPlace&) const { return MessageKind::model_place; }
    MessageKind operator()(const ModelMove&) const { return MessageKind::model_move; }
    MessageKind operator()(const ModelRemove&) const { return MessageKind::model_remove; }
    MessageKind operator()(const LayerImport&) const { return MessageKind::layer_import; }
    MessageKind operator()(const StageChange&) const { return MessageKind::stage_change; }
  } visitor;
  return std::visit(visitor, action);
}

Json action_payload(const SceneAction& action) {
  struct {
    Json operator()(const SketchCreate& a) const { return to_json(a.sketch); }
    Json operator()(const SketchDelete& a) const { return {{"id", a.id}}; }
    Json operator()(const ModelPlace& a) const { return to_json(a.placement); }
    Json operator()(const ModelMove& a) const {
      Json j = {{"id", a.id}, {"position", to_json(a.position)}};
      if (a.heading) j["heading"] = *a.heading;
      if (a.scale) j["scale"] = *a.scale;
      return j;
    }
    Json operator()(const ModelRemove& a) const { return {{"id", a.id}}; }
    Json operator()(const LayerImport& a) const { return to_json(a.layer); }
    Json operator()(const StageChange& a) const { return {{"stage", std::string(to_string(a.stage))}}; }
  } visitor;
  return std::visit(visitor, action);
}

SceneState scene_apply(SceneState scene, const SceneAction& action) {
  struct Applier {
    SceneState& scene;

    void operator()(const SketchCreate& a) const {
      check_sketch(a.sketch, "sketch");
      if (id_in_use(scene, a.sketch.id)) throw Error(Errc::DuplicateId, "id '" + a.sketch.id + "' already exists");
      scene.sketches.emplace(a.sketch.id, a.sketch);
    }
    void operator()(const SketchDelete& a) const {
      if (scene.sketches.erase(a.id) == 0) throw Error(Errc::UnknownId, "no sketch '" + a.id + "'");
    }
    void operator()(const ModelPlace& a) const {
      check_placement(a.placement, "placement");
      if (id_in_use(scene, a.placement.id)) throw Error(Errc::DuplicateId, "id '" + a.placement.id + "' already exists");
      scene.placements.emplace(a.placement.id, a.placement);
    }
    void operator()(const ModelMove& a) const {
      auto it = scene.placements.find(a.id);
      if (it == scene.placements.end()) throw Error(Errc::UnknownId, "no placement '" + a.id + "'");
      ModelPlacement moved = it->second;
      moved.position = a.position;
      if (a.heading) moved.heading = *a.heading;
      if (a.scale) moved.scale = *a.scale;
      check_placement(moved, "placement");
      it->second = std::move(moved);
    }
    void operator()(const ModelRemove& a) const {
      if (scene.placements.erase(a.id) == 0) throw Error(Errc::UnknownId, "no placement '" + a.id + "'");
    }
    void operator()(const LayerImport& a) const {
      if (a.layer.id.empty()) throw Error(Errc::InvariantViolation, "empty layer id");
      for (std::size_t i = 0; i < a.layer.features.size(); ++i)
        check_feature(a.layer.features[i], "layer.features[" + std::to_string(i) + "]");
      if (id_in_use(scene, a.layer.id)) throw Error(Errc::DuplicateId, "id '" + a.layer.id + "' already exists");
      scene.layers.emplace(a.layer.id, a.layer);
    }
    void operator()(const StageChange& a) const { scene.stage = a.stage; }
  };
  std::visit(Applier{scene}, action);
  return scene;
}

}  // namespace geocollab::geo
