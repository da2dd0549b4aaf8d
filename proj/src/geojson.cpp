#include "geocollab/error.hpp"
#include "geocollab/scene.hpp"

namespace geocollab::geo {

namespace {

GeoAnchor position_to_anchor(const Json& pos, const std::string& where) {
  if (!pos.is_array() || pos.size() < 2 || pos.size() > 3)
    throw Error(Errc::ParseError, "position must be [lon, lat] or [lon, lat, height]", where);
  for (const auto& c : pos)
    if (!c.is_number()) throw Error(Errc::ParseError, "position components must be numbers", where);
  GeoAnchor a;
  a.lon = pos[0].get<double>();
  a.lat = pos[1].get<double>();
  a.height = pos.size() == 3 ? pos[2].get<double>() : 0.0;
  if (a.lon == 180.0) a.lon = -180.0;
  if (!is_valid(a)) throw Error(Errc::ParseError, "position out of range", where);
  return a;
}

std::vector<GeoAnchor> positions(const Json& arr, const std::string& where) {
  if (!arr.is_array()) throw Error(Errc::ParseError, "expected a coordinate array", where);
  std::vector<GeoAnchor> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i)
    out.push_back(position_to_anchor(arr[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

Feature convert_feature(const Json& f, const std::string& where) {
  if (!f.is_object() || f.value("type", "") != "Feature") throw Error(Errc::ParseError, "expected a Feature", where);
  auto git = f.find("geometry");
  if (git == f.end() || !git->is_object()) throw Error(Errc::UnsupportedGeometry, "feature without geometry", where);
  const Json& g = *git;
  const std::string type = g.value("type", "");
  const std::string cwhere = where + ".geometry.coordinates";

  Feature out;
  if (type == "Point") {
    out.type = GeometryType::point;
    out.coordinates.push_back(position_to_anchor(g.value("coordinates", Json()), cwhere));
  } else if (type == "LineString") {
    out.type = GeometryType::linestring;
    out.coordinates = positions(g.value("coordinates", Json()), cwhere);
    if (out.coordinates.size() < 2) throw Error(Errc::ParseError, "LineString needs two positions", cwhere);
  } else if (type == "Polygon") {
    out.type = GeometryType::polygon;
    const Json rings = g.value("coordinates", Json());
    if (!rings.is_array() || rings.empty()) throw Error(Errc::ParseError, "Polygon needs a ring", cwhere);
    if (rings.size() > 1) throw Error(Errc::UnsupportedGeometry, "polygons with holes are not supported", cwhere);
    out.coordinates = positions(rings[0], cwhere + "[0]");
    if (out.coordinates.size() > 1 && out.coordinates.front() == out.coordinates.back()) out.coordinates.pop_back();
    if (out.coordinates.size() < 3) throw Error(Errc::ParseError, "Polygon ring needs three distinct positions", cwhere);
  } else if (type == "MultiPoint" || type == "MultiLineString" || type == "MultiPolygon" ||
             type == "GeometryCollection") {
    throw Error(Errc::UnsupportedGeometry, type + " is not supported", where);
  } else {
    throw Error(Errc::ParseError, "unknown geometry type '" + type + "'", where);
  }

  if (auto pit = f.find("properties"); pit != f.end() && pit->is_object()) {
    for (const auto& [k, v] : pit->items())
      out.properties.emplace(k, v.is_string() ? v.get<std::string>() : v.dump());
  }
  return out;
}

}  // namespace

VectorLayer ingest_geojson(std::string_view doc, std::string id, std::string name) {
  Json j = Json::parse(doc, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::ParseError, "GeoJSON is not valid JSON");
  if (!j.is_object() || !j.contains("type") || j["type"] != "FeatureCollection")
    throw Error(Errc::ParseError, "expected a FeatureCollection");
  auto fit = j.find("features");
  if (fit == j.end() || !fit->is_array()) throw Error(Errc::ParseError, "FeatureCollection without features array");

  VectorLayer layer;
  layer.id = std::move(id);
  try {
    layer.name = !name.empty() ? std::move(name) : j.value("name", layer.id);
    for (std::size_t i = 0; i < fit->size(); ++i)
      layer.features.push_back(convert_feature((*fit)[i], "features[" + std::to_string(i) + "]"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
  return layer;
}

}  // namespace geocollab::geo
