#include "geocollab/protocol.hpp"

#include <algorithm>

#include "geocollab/error.hpp"

namespace geocollab::protocol {

namespace {

constexpr std::array<std::string_view, kAllKinds.size()> kKindNames = {
    "join",           "welcome",          "snapshot",       "role_request",  "role_grant",
    "role_deny",      "view_update",      "sketch_create",  "sketch_delete", "chat",
    "op_exec",        "op_result",        "model_place",    "model_move",    "model_remove",
    "layer_import",   "stage_change",     "publish_solution", "participant_joined",
    "participant_left", "leader_changed", "replay_request", "replay_batch",  "error",
    "ping",           "pong",
};

// Deeper documents are rejected before parsing; dump() and operator== on
// nlohmann values recurse, so unbounded depth would be a stack hazard later.
constexpr int kMaxDepth = 64;

bool nesting_within_limit(std::string_view raw) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (char c : raw) {
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{' || c == '[') {
      if (++depth > kMaxDepth) return false;
    } else if (c == '}' || c == ']') {
      --depth;
    }
  }
  return true;
}

const std::array<std::string_view, 7> kEnvelopeKeys = {"v", "kind", "session", "seq", "sender", "ts", "payload"};

}  // namespace

std::string_view to_string(MessageKind kind) noexcept {
  return kKindNames[static_cast<std::size_t>(kind)];
}

std::optional<MessageKind> kind_from_string(std::string_view s) noexcept {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == s) return static_cast<MessageKind>(i);
  return std::nullopt;
}

bool is_leader_gated(MessageKind kind) noexcept {
  switch (kind) {
    case MessageKind::view_update:
    case MessageKind::sketch_create:
    case MessageKind::sketch_delete:
    case MessageKind::model_place:
    case MessageKind::model_move:
    case MessageKind::model_remove:
    case MessageKind::layer_import:
    case MessageKind::stage_change:
    case MessageKind::op_exec:
    case MessageKind::publish_solution:
      return true;
    default:
      return false;
  }
}

bool is_scene_mutating(MessageKind kind) noexcept {
  switch (kind) {
    case MessageKind::sketch_create:
    case MessageKind::sketch_delete:
    case MessageKind::model_place:
    case MessageKind::model_move:
    case MessageKind::model_remove:
    case MessageKind::layer_import:
    case MessageKind::stage_change:
      return true;
    default:
      return false;
  }
}

bool valid_session_id(std::string_view id) noexcept {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-';
  });
}

Json envelope_to_json(const Envelope& env) {
  Json j = Json::object();
  j["v"] = env.v;
  j["kind"] = std::string(to_string(env.kind));
  j["session"] = env.session;
  if (env.seq) j["seq"] = *env.seq;
  j["sender"] = env.sender;
  j["ts"] = env.ts;
  j["payload"] = env.payload;
  return j;
}

std::string encode_message(const Envelope& env) {
  if (env.v != kVersion) throw Error(Errc::SchemaViolation, "unsupported version", "v");
  if (!valid_session_id(env.session)) throw Error(Errc::SchemaViolation, "invalid session id", "session");
  if (env.seq && *env.seq == 0) throw Error(Errc::SchemaViolation, "seq must be >= 1", "seq");
  if (env.sender.empty()) throw Error(Errc::SchemaViolation, "empty sender", "sender");
  if (env.ts < 0) throw Error(Errc::SchemaViolation, "negative timestamp", "ts");
  if (!env.payload.is_object()) throw Error(Errc::SchemaViolation, "payload must be an object", "payload");

  std::string out;
  try {
    out.reserve(96);
    out += R"({"v":1,"kind":")";
    out += to_string(env.kind);
    out += R"(","session":)";
    out += Json(env.session).dump();
    if (env.seq) {
      out += R"(,"seq":)";
      out += std::to_string(*env.seq);
    }
    out += R"(,"sender":)";
    out += Json(env.sender).dump();
    out += R"(,"ts":)";
    out += std::to_string(env.ts);
    out += R"(,"payload":)";
    out += env.payload.dump();
    out += '}';
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::SchemaViolation, "payload is not valid UTF-8", "payload");
  }
  if (out.size() > kMaxMessageBytes)
    throw Error(Errc::OversizeMessage, "encoded message is " + std::to_string(out.size()) + " bytes");
  return out;
}

Envelope envelope_from_json(const Json& j, std::string_view field) {
  using json_field::join;
  if (!j.is_object()) throw Error(Errc::SchemaViolation, "envelope must be an object", std::string(field));

  // Version first: a future version may legitimately change everything else.
  const auto v_it = j.find("v");
  if (v_it == j.end()) throw Error(Errc::SchemaViolation, "missing field", join(field, "v"));
  if (!v_it->is_number_integer()) throw Error(Errc::SchemaViolation, "expected an integer", join(field, "v"));
  if (v_it->get<std::int64_t>() != kVersion)
    throw Error(Errc::UnsupportedVersion, "unsupported protocol version " + v_it->dump());

  Envelope env;
  const std::string kind_name = json_field::string(j, "kind", field);
  auto kind = kind_from_string(kind_name);
  if (!kind) throw Error(Errc::UnknownKind, "unknown message kind '" + kind_name + "'", join(field, "kind"));
  env.kind = *kind;

  env.session = json_field::string(j, "session", field);
  if (!valid_session_id(env.session)) throw Error(Errc::SchemaViolation, "invalid session id", join(field, "session"));

  if (j.contains("seq")) {
    const Json& s = j["seq"];
    if (!s.is_number_integer() || s.get<std::int64_t>() < 1)
      throw Error(Errc::SchemaViolation, "seq must be an integer >= 1", join(field, "seq"));
    env.seq = s.get<std::uint64_t>();
  }

  env.sender = json_field::string(j, "sender", field);
  if (env.sender.empty()) throw Error(Errc::SchemaViolation, "empty sender", join(field, "sender"));

  env.ts = json_field::integer(j, "ts", field);
  if (env.ts < 0) throw Error(Errc::SchemaViolation, "negative timestamp", join(field, "ts"));

  const Json& payload = json_field::require(j, "payload", field);
  if (!payload.is_object()) throw Error(Errc::SchemaViolation, "payload must be an object", join(field, "payload"));

  for (const auto& item : j.items()) {
    if (std::find(kEnvelopeKeys.begin(), kEnvelopeKeys.end(), item.key()) == kEnvelopeKeys.end())
      throw Error(Errc::SchemaViolation, "unexpected field", join(field, item.key()));
  }

  validate_payload(env.kind, payload);
  env.payload = payload;
  return env;
}

Envelope decode_message(std::string_view raw) {
  if (raw.size() > kMaxMessageBytes)
    throw Error(Errc::OversizeMessage, "message is " + std::to_string(raw.size()) + " bytes");
  if (!nesting_within_limit(raw)) throw Error(Errc::MalformedJson, "nesting too deep");

  Json j = Json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw Error(Errc::MalformedJson, "not valid UTF-8 JSON");
  try {
    return envelope_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    // Schema helpers check types before access, so this is a backstop.
    throw Error(Errc::SchemaViolation, e.what());
  }
}

}  // namespace geocollab::protocol
