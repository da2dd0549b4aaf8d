#include <openssl/sha.h>

#include <cmath>
#include <cstdio>

#include "geocollab/scene.hpp"

namespace geocollab::geo {

namespace {

void write_number(std::string& out, double d) {
  if (d == 0.0) d = 0.0;  // folds -0 into 0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", d);
  out += buf;
}

// nlohmann objects iterate in ascending byte order of keys, which is the
// canonical order.
void write_canonical(std::string& out, const Json& j) {
  switch (j.type()) {
    case Json::value_t::object: {
      out += '{';
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) out += ',';
        first = false;
        out += Json(k).dump(-1, ' ', false, Json::error_handler_t::replace);
        out += ':';
        write_canonical(out, v);
      }
      out += '}';
      break;
    }
    case Json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        write_canonical(out, j[i]);
      }
      out += ']';
      break;
    }
    case Json::value_t::number_float:
      write_number(out, j.get<double>());
      break;
    case Json::value_t::string:
      out += j.dump(-1, ' ', false, Json::error_handler_t::replace);
      break;
    default:
      out += j.dump();
      break;
  }
}

}  // namespace

std::string canonical_serialization(const SceneState& scene) {
  std::string out;
  write_canonical(out, to_json(scene));
  return out;
}

SceneDigest scene_hash(const SceneState& scene) {
  const std::string text = canonical_serialization(scene);
  SceneDigest d{};
  SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), d.data());
  return d;
}

std::string to_hex(const SceneDigest& d) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(d.size() * 2);
  for (auto b : d) {
    out += kDigits[b >> 4];
    out += kDigits[b & 0xF];
  }
  return out;
}

}  // namespace geocollab::geo
