#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "geocollab/geo_anchor.hpp"

namespace geocollab::protocol {

inline constexpr int kVersion = 1;
inline constexpr std::size_t kMaxMessageBytes = 65536;
inline constexpr std::string_view kServerSender = "server";

enum class MessageKind {
  join,
  welcome,
  snapshot,
  role_request,
  role_grant,
  role_deny,
  view_update,
  sketch_create,
  sketch_delete,
  chat,
  op_exec,
  op_result,
  model_place,
  model_move,
  model_remove,
  layer_import,
  stage_change,
  publish_solution,
  participant_joined,
  participant_left,
  leader_changed,
  replay_request,
  replay_batch,
  error,
  ping,
  pong,
};

inline constexpr std::array kAllKinds = {
    MessageKind::join,           MessageKind::welcome,          MessageKind::snapshot,
    MessageKind::role_request,   MessageKind::role_grant,       MessageKind::role_deny,
    MessageKind::view_update,    MessageKind::sketch_create,    MessageKind::sketch_delete,
    MessageKind::chat,           MessageKind::op_exec,          MessageKind::op_result,
    MessageKind::model_place,    MessageKind::model_move,       MessageKind::model_remove,
    MessageKind::layer_import,   MessageKind::stage_change,     MessageKind::publish_solution,
    MessageKind::participant_joined, MessageKind::participant_left, MessageKind::leader_changed,
    MessageKind::replay_request, MessageKind::replay_batch,     MessageKind::error,
    MessageKind::ping,           MessageKind::pong,
};

std::string_view to_string(MessageKind kind) noexcept;
std::optional<MessageKind> kind_from_string(std::string_view s) noexcept;

// Only the leader may submit these.
bool is_leader_gated(MessageKind kind) noexcept;
// Kinds that change SceneState when applied.
bool is_scene_mutating(MessageKind kind) noexcept;

struct Envelope {
  int v = kVersion;
  MessageKind kind = MessageKind::ping;
  std::string session;
  std::optional<std::uint64_t> seq;  // server broadcasts only
  std::string sender;
  std::int64_t ts = 0;
  Json payload = Json::object();

  bool operator==(const Envelope&) const = default;
};

bool valid_session_id(std::string_view id) noexcept;

/// Canonical JSON text, keys in the order v, kind, session, seq, sender, ts,
/// payload. Throws Error(OversizeMessage) past kMaxMessageBytes and
/// Error(SchemaViolation) if the envelope breaks a type invariant.
std::string encode_message(const Envelope& env);

/// Total over arbitrary bytes: returns a valid envelope or throws
/// geocollab::Error with one of MalformedJson, UnknownKind, SchemaViolation,
/// UnsupportedVersion, OversizeMessage. Nothing else escapes.
Envelope decode_message(std::string_view raw);

/// Envelope <-> JSON object, used for envelopes nested in replay batches.
Json envelope_to_json(const Envelope& env);
Envelope envelope_from_json(const Json& j, std::string_view field = "");

/// Per-kind payload schema check used by the decoder. Throws
/// Error(SchemaViolation, "payload.<field>").
void validate_payload(MessageKind kind, const Json& payload);

}  // namespace geocollab::protocol
