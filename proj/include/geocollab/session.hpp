#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geocollab/protocol.hpp"
#include "geocollab/scene.hpp"

namespace geocollab::session {

using protocol::Envelope;
using protocol::MessageKind;

enum class Role { leader, follower };
std::string_view to_string(Role r) noexcept;

struct Participant {
  std::string id;
  std::string display_name;
  Role role = Role::follower;
  std::int64_t joined_at = 0;
  bool connected = true;
  std::uint64_t join_order = 0;  // tie-break for "earliest joined"
  std::int64_t disconnected_at = 0;
};

struct SessionConfig {
  std::size_t max_participants = 64;
  std::size_t replay_capacity = 1024;
  std::int64_t retention_ms = 10 * 60 * 1000;
};

/// Ring of the most recent sequenced broadcasts. Sequence numbers are
/// contiguous; the oldest entry is evicted once capacity is reached.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  /// Requires env.seq == last_seq() + 1 (or any seq when empty).
  void append(Envelope env);

  /// Every entry with seq in (after, last_seq()], or nullopt when some of that
  /// range has already been evicted.
  std::optional<std::vector<Envelope>> since(std::uint64_t after) const;

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::uint64_t first_seq() const noexcept;
  std::uint64_t last_seq() const noexcept;
  const std::deque<Envelope>& entries() const noexcept { return entries_; }

 private:
  std::size_t capacity_;
  std::uint64_t evicted_through_ = 0;
  std::deque<Envelope> entries_;
};

enum class Audience { all, all_except, only };

/// A message the transport must deliver to connected participants.
struct Outbound {
  Audience audience = Audience::all;
  std::string participant;  // for all_except / only
  Envelope envelope;
};
using Outbox = std::vector<Outbound>;

struct JoinResult {
  std::string participant_id;
  Outbox messages;
};

struct ReplayResult {
  bool snapshot = false;
  std::vector<Envelope> missed;  // empty on the snapshot path
  Outbox messages;               // batches or snapshot first, then rejoin broadcasts
};

using Clock = std::function<std::int64_t()>;
std::int64_t system_clock_ms();

/// One design session: membership, leader-and-follower floor control,
/// sequencing and the replay ring.
///
/// Not thread-safe; the owner serializes every call. Every mutating call either
/// succeeds completely or throws geocollab::Error leaving the state untouched.
class Session {
 public:
  explicit Session(std::string id, SessionConfig config = {}, Clock clock = system_clock_ms);

  /// Adds a participant. The first connected participant becomes leader.
  /// Emits participant_joined to the others, then a private welcome.
  JoinResult join(std::string_view display_name);

  /// Client-originated action. Leader-gated kinds from a follower throw
  /// NotLeader; failed validation throws InvalidAction (field() holds the
  /// underlying error code).
  Outbox submit_action(const std::string& pid, MessageKind kind, const Json& payload);

  /// Sequenced broadcast originated by the server itself (op_result).
  Outbox submit_server(MessageKind kind, Json payload);

  Outbox grant_role(const std::string& granter, const std::string& target);
  Outbox deny_role(const std::string& leader, const std::string& target);
  Outbox handle_disconnect(const std::string& pid);

  /// Catch-up for a returning (or gap-detecting) participant. Marks a
  /// disconnected participant connected again.
  ReplayResult replay_since(const std::string& pid, std::uint64_t last_seq);

  /// Drops disconnected participants older than the retention window.
  std::size_t purge_expired(std::int64_t now_ms);

  /// Throws NotLeader unless pid is the connected leader.
  void require_leader(const std::string& pid) const;

  const std::string& id() const noexcept { return id_; }
  const SessionConfig& config() const noexcept { return config_; }
  const std::map<std::string, Participant>& participants() const noexcept { return participants_; }
  const geo::SceneState& scene() const noexcept { return scene_; }
  const std::optional<geo::ViewState>& last_view() const noexcept { return last_view_; }
  const std::deque<std::string>& role_queue() const noexcept { return role_queue_; }
  const ReplayBuffer& replay() const noexcept { return replay_; }
  std::uint64_t next_seq() const noexcept { return next_seq_; }
  std::uint64_t max_seq() const noexcept { return next_seq_ - 1; }
  std::optional<std::string> leader() const;
  std::size_t connected_count() const noexcept;

  /// "at most one leader; exactly one iff someone is connected; queue holds
  /// no duplicates and no leader".
  bool invariants_hold() const;

  Json snapshot_payload() const;

 private:
  Envelope make_envelope(MessageKind kind, std::string sender, Json payload, bool sequenced);
  Outbound sequence(MessageKind kind, std::string sender, Json payload, Audience audience = Audience::all,
                    std::string participant = {});
  Participant& connected_participant(const std::string& pid);
  std::optional<std::string> successor() const;
  Json participants_json() const;
  Outbox batches(const std::string& pid, std::vector<Envelope> entries) const;

  std::string id_;
  SessionConfig config_;
  Clock clock_;
  std::map<std::string, Participant> participants_;
  geo::SceneState scene_;
  std::optional<geo::ViewState> last_view_;
  std::deque<std::string> role_queue_;
  ReplayBuffer replay_;
  std::uint64_t next_seq_ = 1;
  std::uint64_t join_counter_ = 0;
};

}  // namespace geocollab::session
