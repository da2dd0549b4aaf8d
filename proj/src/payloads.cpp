// Payload schemas for every message kind. docs/protocol.md is the prose
// reference for the same rules.

#include "geocollab/error.hpp"
#include "geocollab/protocol.hpp"
#include "geocollab/scene.hpp"

namespace geocollab::protocol {

namespace {

constexpr std::string_view P = "payload";
constexpr std::size_t kMaxChatChars = 4000;

void non_empty(const Json& p, std::string_view key) {
  if (json_field::string(p, key, P).empty())
    throw Error(Errc::SchemaViolation, "must not be empty", json_field::join(P, key));
}

void optional_non_empty(const Json& p, std::string_view key) {
  if (p.contains(key)) non_empty(p, key);
}

void non_negative(const Json& p, std::string_view key, std::int64_t min = 0) {
  if (json_field::integer(p, key, P) < min)
    throw Error(Errc::SchemaViolation, "must be >= " + std::to_string(min), json_field::join(P, key));
}

void role(const Json& p, std::string_view key) {
  const std::string r = json_field::string(p, key, P);
  if (r != "leader" && r != "follower") throw Error(Errc::SchemaViolation, "role must be leader or follower", json_field::join(P, key));
}

void scene_and_view(const Json& p) {
  geo::scene_from_json(json_field::require(p, "scene", P), "payload.scene");
  if (p.contains("last_view")) geo::view_from_json(p["last_view"], "payload.last_view");
  non_negative(p, "max_seq");
}

void participants(const Json& p) {
  const Json& arr = json_field::require(p, "participants", P);
  if (!arr.is_array()) throw Error(Errc::SchemaViolation, "expected an array", "payload.participants");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string f = "payload.participants[" + std::to_string(i) + "]";
    json_field::string(arr[i], "id", f);
    json_field::string(arr[i], "display_name", f);
    const std::string r = json_field::string(arr[i], "role", f);
    if (r != "leader" && r != "follower") throw Error(Errc::SchemaViolation, "bad role", f + ".role");
    json_field::boolean(arr[i], "connected", f);
    json_field::integer(arr[i], "joined_at", f);
  }
}

// Wraps geo-model invariant failures so the decoder only reports
// SchemaViolation for payload problems.
template <typename F>
void as_schema(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    if (e.code() == Errc::SchemaViolation) throw;
    throw Error(Errc::SchemaViolation, e.what(), e.field().empty() ? std::string(P) : e.field());
  }
}

}  // namespace

void validate_payload(MessageKind kind, const Json& p) {
  if (!p.is_object()) throw Error(Errc::SchemaViolation, "payload must be an object", std::string(P));
  as_schema([&] {
    switch (kind) {
      case MessageKind::join:
        non_empty(p, "display_name");
        break;
      case MessageKind::welcome:
        non_empty(p, "participant_id");
        role(p, "role");
        scene_and_view(p);
        participants(p);
        break;
      case MessageKind::snapshot:
        scene_and_view(p);
        break;
      case MessageKind::role_request:
        optional_non_empty(p, "participant_id");
        break;
      case MessageKind::role_grant:
      case MessageKind::role_deny:
        non_empty(p, "target");
        break;
      case MessageKind::view_update:
        geo::view_from_json(p, P);
        break;
      case MessageKind::sketch_create:
      case MessageKind::sketch_delete:
      case MessageKind::model_place:
      case MessageKind::model_move:
      case MessageKind::model_remove:
      case MessageKind::layer_import:
      case MessageKind::stage_change:
        geo::parse_scene_action(kind, p);
        break;
      case MessageKind::chat: {
        const std::string text = json_field::string(p, "text", P);
        if (text.empty() || utf8_length(text) > kMaxChatChars)
          throw Error(Errc::SchemaViolation, "chat text must be 1..4000 characters", "payload.text");
        if (p.contains("anchor")) anchor_from_json(p["anchor"], "payload.anchor");
        break;
      }
      case MessageKind::op_exec:
        non_empty(p, "op_kind");
        if (p.contains("params") && !p["params"].is_object())
          throw Error(Errc::SchemaViolation, "expected an object", "payload.params");
        break;
      case MessageKind::op_result:
        non_negative(p, "op_exec_seq", 1);
        non_empty(p, "op_kind");
        if (json_field::boolean(p, "ok", P)) {
          if (!json_field::require(p, "result", P).is_object())
            throw Error(Errc::SchemaViolation, "expected an object", "payload.result");
        } else {
          const Json& err = json_field::require(p, "error", P);
          json_field::string(err, "code", "payload.error");
          json_field::string(err, "message", "payload.error");
        }
        break;
      case MessageKind::publish_solution:
        non_empty(p, "title");
        optional_non_empty(p, "solution_id");
        if (p.contains("version")) non_negative(p, "version", 1);
        break;
      case MessageKind::participant_joined:
        non_empty(p, "participant_id");
        non_empty(p, "display_name");
        role(p, "role");
        break;
      case MessageKind::participant_left:
        non_empty(p, "participant_id");
        break;
      case MessageKind::leader_changed:
        non_empty(p, "leader");
        optional_non_empty(p, "previous");
        non_empty(p, "reason");
        break;
      case MessageKind::replay_request:
        non_empty(p, "participant_id");
        non_negative(p, "last_seq");
        break;
      case MessageKind::replay_batch: {
        const Json& entries = json_field::require(p, "entries", P);
        if (!entries.is_array()) throw Error(Errc::SchemaViolation, "expected an array", "payload.entries");
        for (std::size_t i = 0; i < entries.size(); ++i) {
          const std::string f = "payload.entries[" + std::to_string(i) + "]";
          Envelope inner = envelope_from_json(entries[i], f);
          if (!inner.seq || inner.kind == MessageKind::replay_batch)
            throw Error(Errc::SchemaViolation, "entries must be sequenced broadcasts", f);
        }
        json_field::boolean(p, "final", P);
        break;
      }
      case MessageKind::error:
        non_empty(p, "code");
        json_field::string(p, "message", P);
        break;
      case MessageKind::ping:
        break;
      case MessageKind::pong:
        if (p.contains("in_flight")) non_negative(p, "in_flight");
        if (p.contains("max_seq")) non_negative(p, "max_seq");
        break;
    }
  });
}

}  // namespace geocollab::protocol
