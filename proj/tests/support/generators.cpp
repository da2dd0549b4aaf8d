#include "generators.hpp"

#include "geocollab/session.hpp"

namespace geocollab::testing {

using protocol::MessageKind;

std::uint64_t pick(Rng& rng, std::uint64_t n) { return n == 0 ? 0 : rng() % n; }

double uniform(Rng& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

std::string random_id(Rng& rng, std::string_view prefix) {
  return std::string(prefix) + std::to_string(rng() % 1000000);
}

std::string random_text(Rng& rng, std::size_t max_len) {
  static const char* const kPieces[] = {"a", "b", "z", " ", "0", "9", "\"", "\\", "/", "\n", "é", "中", "😀", "{", "]"};
  const std::size_t len = 1 + pick(rng, max_len);
  std::string s;
  std::size_t chars = 0;
  while (chars < len) {
    s += kPieces[pick(rng, std::size(kPieces))];
    ++chars;
  }
  return s;
}

GeoAnchor random_anchor(Rng& rng) {
  GeoAnchor a;
  a.lat = uniform(rng, -90.0, 90.0);
  a.lon = uniform(rng, -180.0, 180.0);
  a.height = uniform(rng, -50.0, 500.0);
  if (pick(rng, 4) == 0) a.feature_id = random_id(rng, "f");
  return a;
}

geo::ViewState random_view(Rng& rng) {
  geo::ViewState v;
  v.position = random_anchor(rng);
  v.position.feature_id.reset();
  v.heading = uniform(rng, 0.0, 360.0);
  v.pitch = uniform(rng, -90.0, 90.0);
  v.roll = uniform(rng, -180.0, 180.0);
  return v;
}

geo::Sketch random_sketch(Rng& rng, std::string id, std::string author) {
  geo::Sketch s;
  s.id = std::move(id);
  s.author = std::move(author);
  s.kind = static_cast<geo::SketchKind>(pick(rng, 4));
  std::size_t n = 0;
  switch (s.kind) {
    case geo::SketchKind::polyline: n = 2 + pick(rng, 5); break;
    case geo::SketchKind::polygon: n = 3 + pick(rng, 5); break;
    case geo::SketchKind::arrow: n = 2; break;
    case geo::SketchKind::text_annotation: n = 1; break;
  }
  for (std::size_t i = 0; i < n; ++i) s.vertices.push_back(random_anchor(rng));
  if (s.kind == geo::SketchKind::text_annotation) s.text = random_text(rng, 40);
  if (pick(rng, 2) == 0) s.style = geo::SketchStyle{"#ff8800", uniform(rng, 0.5, 8.0)};
  return s;
}

geo::ModelPlacement random_placement(Rng& rng, std::string id) {
  geo::ModelPlacement p;
  p.id = std::move(id);
  static const char* const kModels[] = {"building_a", "building_b", "tree_oak", "tree_pine", "street_lamp"};
  p.model_ref = kModels[pick(rng, std::size(kModels))];
  p.position = random_anchor(rng);
  p.heading = uniform(rng, 0.0, 360.0);
  p.scale = uniform(rng, 0.1, 4.0);
  return p;
}

geo::VectorLayer random_layer(Rng& rng, std::string id) {
  geo::VectorLayer l;
  l.id = std::move(id);
  l.name = "layer " + l.id;
  const std::size_t n = pick(rng, 4);
  for (std::size_t i = 0; i < n; ++i) {
    geo::Feature f;
    f.type = static_cast<geo::GeometryType>(pick(rng, 3));
    const std::size_t count = f.type == geo::GeometryType::point ? 1 : f.type == geo::GeometryType::linestring ? 2 + pick(rng, 3) : 3 + pick(rng, 3);
    for (std::size_t k = 0; k < count; ++k) f.coordinates.push_back(random_anchor(rng));
    f.properties["name"] = "feature " + std::to_string(i);
    if (pick(rng, 2)) f.properties["floors"] = std::to_string(pick(rng, 12));
    l.features.push_back(std::move(f));
  }
  return l;
}

geo::SceneState random_scene(Rng& rng, int max_items) {
  geo::SceneState s;
  const auto items = pick(rng, static_cast<std::uint64_t>(max_items) + 1);
  for (std::uint64_t i = 0; i < items; ++i) {
    switch (pick(rng, 3)) {
      case 0: {
        auto sk = random_sketch(rng, "s" + std::to_string(i), "p1");
        s.sketches.emplace(sk.id, sk);
        break;
      }
      case 1: {
        auto p = random_placement(rng, "m" + std::to_string(i));
        s.placements.emplace(p.id, p);
        break;
      }
      default: {
        auto l = random_layer(rng, "l" + std::to_string(i));
        s.layers.emplace(l.id, l);
        break;
      }
    }
  }
  s.stage = static_cast<geo::Stage>(pick(rng, 4));
  return s;
}

namespace {

Json participants_payload(Rng& rng) {
  Json arr = Json::array();
  const auto n = 1 + pick(rng, 4);
  for (std::uint64_t i = 0; i < n; ++i)
    arr.push_back({{"id", "p" + std::to_string(i + 1)},
                   {"display_name", random_text(rng, 12)},
                   {"role", i == 0 ? "leader" : "follower"},
                   {"connected", pick(rng, 2) == 0},
                   {"joined_at", static_cast<std::int64_t>(pick(rng, 2'000'000'000'000))}});
  return arr;
}

Json snapshot_like(Rng& rng) {
  Json p = {{"scene", geo::to_json(random_scene(rng, 4))},
            {"max_seq", pick(rng, 100000)},
            {"participants", participants_payload(rng)}};
  if (pick(rng, 2)) p["last_view"] = geo::to_json(random_view(rng));
  return p;
}

}  // namespace

Json random_payload(Rng& rng, MessageKind kind) {
  switch (kind) {
    case MessageKind::join: return {{"display_name", random_text(rng, 20)}};
    case MessageKind::welcome: {
      Json p = snapshot_like(rng);
      p["participant_id"] = "p" + std::to_string(1 + pick(rng, 60));
      p["role"] = pick(rng, 2) ? "leader" : "follower";
      return p;
    }
    case MessageKind::snapshot: return snapshot_like(rng);
    case MessageKind::role_request: return pick(rng, 2) ? Json::object() : Json{{"participant_id", "p3"}};
    case MessageKind::role_grant:
    case MessageKind::role_deny: return {{"target", "p" + std::to_string(1 + pick(rng, 60))}};
    case MessageKind::view_update: return geo::to_json(random_view(rng));
    case MessageKind::sketch_create: return geo::to_json(random_sketch(rng, random_id(rng, "s"), "p1"));
    case MessageKind::sketch_delete: return {{"id", random_id(rng, "s")}};
    case MessageKind::chat: {
      Json p = {{"text", random_text(rng, 200)}};
      if (pick(rng, 2)) p["anchor"] = to_json(random_anchor(rng));
      return p;
    }
    case MessageKind::op_exec:
      return {{"op_kind", "distance"},
              {"params", {{"a", {{"lat", uniform(rng, -80, 80)}, {"lon", uniform(rng, -180, 180)}}},
                          {"b", {{"lat", uniform(rng, -80, 80)}, {"lon", uniform(rng, -180, 180)}}}}}};
    case MessageKind::op_result:
      if (pick(rng, 2))
        return {{"op_exec_seq", 1 + pick(rng, 1000)}, {"op_kind", "distance"}, {"ok", true}, {"result", {{"meters", uniform(rng, 0, 2e7)}}}};
      return {{"op_exec_seq", 1 + pick(rng, 1000)},
              {"op_kind", "viewshed"},
              {"ok", false},
              {"error", {{"code", "ServiceTimeout"}, {"message", "timed out"}}}};
    case MessageKind::model_place: return geo::to_json(random_placement(rng, random_id(rng, "m")));
    case MessageKind::model_move: {
      Json p = {{"id", random_id(rng, "m")}, {"position", to_json(random_anchor(rng))}};
      if (pick(rng, 2)) p["heading"] = uniform(rng, 0, 360);
      if (pick(rng, 2)) p["scale"] = uniform(rng, 0.1, 3);
      return p;
    }
    case MessageKind::model_remove: return {{"id", random_id(rng, "m")}};
    case MessageKind::layer_import: return geo::to_json(random_layer(rng, random_id(rng, "l")));
    case MessageKind::stage_change: return {{"stage", std::string(geo::to_string(static_cast<geo::Stage>(pick(rng, 4))))}};
    case MessageKind::publish_solution: {
      Json p = {{"title", random_text(rng, 30)}};
      if (pick(rng, 2)) {
        p["solution_id"] = random_id(rng, "sol-");
        p["version"] = 1 + pick(rng, 5);
      }
      return p;
    }
    case MessageKind::participant_joined:
      return {{"participant_id", "p" + std::to_string(1 + pick(rng, 60))}, {"display_name", random_text(rng, 20)}, {"role", "follower"}};
    case MessageKind::participant_left: return {{"participant_id", "p" + std::to_string(1 + pick(rng, 60))}};
    case MessageKind::leader_changed: {
      Json p = {{"leader", "p" + std::to_string(1 + pick(rng, 60))}, {"reason", pick(rng, 2) ? "grant" : "disconnect"}};
      if (pick(rng, 2)) p["previous"] = "p1";
      return p;
    }
    case MessageKind::replay_request: return {{"participant_id", "p2"}, {"last_seq", pick(rng, 5000)}};
    case MessageKind::replay_batch: {
      Json entries = Json::array();
      const auto n = pick(rng, 4);
      for (std::uint64_t i = 0; i < n; ++i) {
        auto inner = random_envelope(rng, MessageKind::chat);
        inner.seq = 10 + i;
        entries.push_back(protocol::envelope_to_json(inner));
      }
      return {{"entries", std::move(entries)}, {"final", pick(rng, 2) == 0}};
    }
    case MessageKind::error: return {{"code", "NotLeader"}, {"message", random_text(rng, 40)}, {"ref_kind", "sketch_create"}};
    case MessageKind::ping: return Json::object();
    case MessageKind::pong: return {{"in_flight", pick(rng, 10)}, {"max_seq", pick(rng, 1000)}};
  }
  return Json::object();
}

protocol::Envelope random_envelope(Rng& rng, MessageKind kind) {
  protocol::Envelope env;
  env.kind = kind;
  env.session = pick(rng, 2) ? "design-1" : "s_" + std::to_string(pick(rng, 100));
  if (pick(rng, 2)) env.seq = 1 + pick(rng, 1'000'000);
  env.sender = pick(rng, 2) ? "server" : "p" + std::to_string(1 + pick(rng, 64));
  env.ts = static_cast<std::int64_t>(pick(rng, 4'000'000'000'000ULL));
  env.payload = random_payload(rng, kind);
  return env;
}

}  // namespace geocollab::testing
