#include "geocollab/action_gen.hpp"

namespace geocollab::sim {

using protocol::MessageKind;

namespace {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

GeoAnchor near_campus(std::mt19937_64& rng) {
  GeoAnchor a;
  a.lat = 31.225 + 0.01 * unit(rng);
  a.lon = 121.465 + 0.01 * unit(rng);
  a.height = 0.0;
  return a;
}

template <class Map>
const std::string& nth_key(const Map& m, std::uint64_t n) {
  auto it = m.begin();
  std::advance(it, static_cast<std::ptrdiff_t>(n % m.size()));
  return it->first;
}

}  // namespace

ActionSpec random_action(std::mt19937_64& rng, const geo::SceneState& scene, const std::string& author,
                         std::uint64_t& counter) {
  const std::uint64_t roll = rng() % 100;
  const std::string id_suffix = author + "-" + std::to_string(++counter);

  if (roll < 30) {
    geo::ViewState v;
    v.position = near_campus(rng);
    v.position.height = 200.0 + 800.0 * unit(rng);
    v.heading = 360.0 * unit(rng);
    v.pitch = -90.0 + 90.0 * unit(rng);
    return {MessageKind::view_update, geo::to_json(v)};
  }
  if (roll < 50) {
    geo::Sketch s;
    s.id = "sk-" + id_suffix;
    s.author = author;
    s.kind = static_cast<geo::SketchKind>(rng() % 4);
    const std::size_t n = s.kind == geo::SketchKind::polygon ? 3 + rng() % 4
                          : s.kind == geo::SketchKind::text_annotation ? 1
                          : s.kind == geo::SketchKind::arrow ? 2
                                                             : 2 + rng() % 4;
    for (std::size_t i = 0; i < n; ++i) s.vertices.push_back(near_campus(rng));
    if (s.kind == geo::SketchKind::text_annotation) s.text = "note " + id_suffix;
    return {MessageKind::sketch_create, geo::to_json(s)};
  }
  if (roll < 60 && !scene.sketches.empty())
    return {MessageKind::sketch_delete, {{"id", nth_key(scene.sketches, rng())}}};
  if (roll < 75) {
    static const char* const kModels[] = {"building_a", "building_b", "tree_oak", "street_lamp"};
    geo::ModelPlacement p;
    p.id = "m-" + id_suffix;
    p.model_ref = kModels[rng() % std::size(kModels)];
    p.position = near_campus(rng);
    p.heading = 360.0 * unit(rng);
    p.scale = 0.5 + unit(rng);
    return {MessageKind::model_place, geo::to_json(p)};
  }
  if (roll < 85 && !scene.placements.empty()) {
    Json j = {{"id", nth_key(scene.placements, rng())}, {"position", to_json(near_campus(rng))}};
    if (rng() % 2 == 0) j["heading"] = 360.0 * unit(rng);
    return {MessageKind::model_move, std::move(j)};
  }
  if (roll < 90 && !scene.placements.empty())
    return {MessageKind::model_remove, {{"id", nth_key(scene.placements, rng())}}};
  if (roll < 95) {
    const auto stage = static_cast<geo::Stage>(rng() % 4);
    return {MessageKind::stage_change, {{"stage", std::string(geo::to_string(stage))}}};
  }
  return {MessageKind::chat, {{"text", "message " + id_suffix}}};
}

}  // namespace geocollab::sim
