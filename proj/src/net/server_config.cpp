#include <set>

#include "geocollab/error.hpp"
#include "geocollab/server.hpp"

namespace geocollab::sync {

namespace {

template <class T>
T number_field(const Json& j, const std::string& key) {
  const Json& v = j.at(key);
  if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw Error(Errc::ValidationError, key + " must be a number", key);
  } else {
    if (!v.is_number_integer()) throw Error(Errc::ValidationError, key + " must be an integer", key);
    if constexpr (std::is_unsigned_v<T>) {
      if (v.get<std::int64_t>() < 0) throw Error(Errc::ValidationError, key + " must not be negative", key);
    }
  }
  return v.get<T>();
}

std::string string_field(const Json& j, const std::string& key) {
  if (!j.at(key).is_string()) throw Error(Errc::ValidationError, key + " must be a string", key);
  return j.at(key).get<std::string>();
}

}  // namespace

ServerConfig config_from_json(const Json& j, ServerConfig c) {
  if (!j.is_object()) throw Error(Errc::ValidationError, "config must be a JSON object");
  static const std::set<std::string> kKeys = {
      "bind_address",   "port",          "max_sessions",   "max_participants",    "replay_capacity",
      "view_rate",      "write_timeout_ms", "service_timeout_ms", "services",        "assets_dir",
      "store_dir",      "threads",       "retention_ms",   "outbound_queue_limit", "socket_send_buffer"};
  for (const auto& [key, value] : j.items())
    if (!kKeys.contains(key)) throw Error(Errc::ValidationError, "unknown config key '" + key + "'", key);

  if (j.contains("bind_address")) c.bind_address = string_field(j, "bind_address");
  if (j.contains("port")) {
    const auto p = number_field<std::int64_t>(j, "port");
    if (p < 0 || p > 65535) throw Error(Errc::ValidationError, "port must be 0..65535", "port");
    c.port = static_cast<std::uint16_t>(p);
  }
  if (j.contains("max_sessions")) c.max_sessions = number_field<std::size_t>(j, "max_sessions");
  if (j.contains("max_participants")) c.max_participants = number_field<std::size_t>(j, "max_participants");
  if (j.contains("replay_capacity")) c.replay_capacity = number_field<std::size_t>(j, "replay_capacity");
  if (j.contains("view_rate")) c.view_rate = number_field<double>(j, "view_rate");
  if (j.contains("write_timeout_ms")) c.write_timeout_ms = number_field<std::int64_t>(j, "write_timeout_ms");
  if (j.contains("service_timeout_ms")) c.service_timeout_ms = number_field<std::int64_t>(j, "service_timeout_ms");
  if (j.contains("services")) {
    const Json& s = j.at("services");
    if (!s.is_object()) throw Error(Errc::ValidationError, "services must map op_kind to URL", "services");
    c.services.clear();
    for (const auto& [kind, url] : s.items()) {
      if (!url.is_string()) throw Error(Errc::ValidationError, "services." + kind + " must be a URL string", "services." + kind);
      c.services[kind] = url.get<std::string>();
    }
  }
  if (j.contains("assets_dir")) c.assets_dir = string_field(j, "assets_dir");
  if (j.contains("store_dir")) c.store_dir = string_field(j, "store_dir");
  if (j.contains("threads")) c.threads = number_field<int>(j, "threads");
  if (j.contains("retention_ms")) c.retention_ms = number_field<std::int64_t>(j, "retention_ms");
  if (j.contains("outbound_queue_limit")) c.outbound_queue_limit = number_field<std::size_t>(j, "outbound_queue_limit");
  if (j.contains("socket_send_buffer")) c.socket_send_buffer = number_field<int>(j, "socket_send_buffer");
  return c;
}

Json to_json(const ServerConfig& c) {
  return {{"bind_address", c.bind_address},
          {"port", c.port},
          {"max_sessions", c.max_sessions},
          {"max_participants", c.max_participants},
          {"replay_capacity", c.replay_capacity},
          {"view_rate", c.view_rate},
          {"write_timeout_ms", c.write_timeout_ms},
          {"service_timeout_ms", c.service_timeout_ms},
          {"services", c.services},
          {"assets_dir", c.assets_dir},
          {"store_dir", c.store_dir},
          {"threads", c.threads},
          {"retention_ms", c.retention_ms},
          {"outbound_queue_limit", c.outbound_queue_limit},
          {"socket_send_buffer", c.socket_send_buffer}};
}

void validate(const ServerConfig& c) {
  auto positive = [](bool ok, const char* key) {
    if (!ok) throw Error(Errc::ValidationError, std::string(key) + " must be positive", key);
  };
  positive(c.max_sessions > 0, "max_sessions");
  positive(c.max_participants > 0, "max_participants");
  positive(c.replay_capacity > 0, "replay_capacity");
  positive(c.view_rate > 0 && c.view_rate <= 1000, "view_rate");
  positive(c.write_timeout_ms > 0, "write_timeout_ms");
  positive(c.service_timeout_ms > 0, "service_timeout_ms");
  positive(c.threads > 0, "threads");
  positive(c.retention_ms > 0, "retention_ms");
  positive(c.outbound_queue_limit > 0, "outbound_queue_limit");
  if (c.socket_send_buffer < 0) throw Error(Errc::ValidationError, "socket_send_buffer must not be negative", "socket_send_buffer");
}

}  // namespace geocollab::sync
