#include "geocollab/session.hpp"

#include <algorithm>
#include <chrono>

#include "geocollab/error.hpp"

namespace geocollab::session {

std::string_view to_string(Role r) noexcept { return r == Role::leader ? "leader" : "follower"; }

std::int64_t system_clock_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

// ---- ReplayBuffer ----

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw Error(Errc::InvariantViolation, "replay capacity must be positive");
}

std::uint64_t ReplayBuffer::first_seq() const noexcept {
  return entries_.empty() ? evicted_through_ + 1 : *entries_.front().seq;
}

std::uint64_t ReplayBuffer::last_seq() const noexcept {
  return entries_.empty() ? evicted_through_ : *entries_.back().seq;
}

void ReplayBuffer::append(Envelope env) {
  if (!env.seq) throw Error(Errc::InvariantViolation, "replay entries must be sequenced");
  if (!entries_.empty() && *env.seq != last_seq() + 1)
    throw Error(Errc::InvariantViolation, "replay entries must be contiguous");
  if (entries_.empty() && evicted_through_ == 0) evicted_through_ = *env.seq - 1;
  if (entries_.size() == capacity_) {
    evicted_through_ = *entries_.front().seq;
    entries_.pop_front();
  }
  entries_.push_back(std::move(env));
}

std::optional<std::vector<Envelope>> ReplayBuffer::since(std::uint64_t after) const {
  if (after >= last_seq()) return std::vector<Envelope>{};
  if (after < evicted_through_) return std::nullopt;
  const std::size_t skip = static_cast<std::size_t>(after - evicted_through_);
  return std::vector<Envelope>(entries_.begin() + static_cast<std::ptrdiff_t>(skip), entries_.end());
}

// ---- Session ----

Session::Session(std::string id, SessionConfig config, Clock clock)
    : id_(std::move(id)), config_(config), clock_(std::move(clock)), replay_(config.replay_capacity) {
  if (!protocol::valid_session_id(id_)) throw Error(Errc::InvariantViolation, "invalid session id '" + id_ + "'");
  if (config_.max_participants == 0) throw Error(Errc::InvariantViolation, "max_participants must be positive");
}

Envelope Session::make_envelope(MessageKind kind, std::string sender, Json payload, bool sequenced) {
  Envelope env;
  env.kind = kind;
  env.session = id_;
  env.sender = std::move(sender);
  env.ts = clock_();
  env.payload = std::move(payload);
  if (sequenced) env.seq = next_seq_;
  return env;
}

Outbound Session::sequence(MessageKind kind, std::string sender, Json payload, Audience audience,
                           std::string participant) {
  Envelope env = make_envelope(kind, std::move(sender), std::move(payload), true);
  replay_.append(env);
  ++next_seq_;
  return Outbound{audience, std::move(participant), std::move(env)};
}

std::optional<std::string> Session::leader() const {
  for (const auto& [id, p] : participants_)
    if (p.role == Role::leader) return id;
  return std::nullopt;
}

std::size_t Session::connected_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(participants_.begin(), participants_.end(), [](const auto& kv) { return kv.second.connected; }));
}

bool Session::invariants_hold() const {
  std::size_t leaders = 0;
  for (const auto& [id, p] : participants_) {
    if (p.role == Role::leader) {
      ++leaders;
      if (!p.connected) return false;
    }
  }
  if (leaders > 1) return false;
  if ((leaders == 1) != (connected_count() > 0)) return false;
  const auto lead = leader();
  for (std::size_t i = 0; i < role_queue_.size(); ++i) {
    if (lead && role_queue_[i] == *lead) return false;
    if (std::find(role_queue_.begin() + static_cast<std::ptrdiff_t>(i) + 1, role_queue_.end(), role_queue_[i]) !=
        role_queue_.end())
      return false;
  }
  return next_seq_ == replay_.last_seq() + 1;
}

Participant& Session::connected_participant(const std::string& pid) {
  auto it = participants_.find(pid);
  if (it == participants_.end() || !it->second.connected)
    throw Error(Errc::UnknownParticipant, "no connected participant '" + pid + "'");
  return it->second;
}

void Session::require_leader(const std::string& pid) const {
  auto it = participants_.find(pid);
  if (it == participants_.end() || !it->second.connected)
    throw Error(Errc::UnknownParticipant, "no connected participant '" + pid + "'");
  if (it->second.role != Role::leader) throw Error(Errc::NotLeader, "only the leader may do that");
}

std::optional<std::string> Session::successor() const {
  for (const auto& pid : role_queue_) {
    auto it = participants_.find(pid);
    if (it != participants_.end() && it->second.connected) return pid;
  }
  const Participant* best = nullptr;
  for (const auto& [id, p] : participants_) {
    if (!p.connected || p.role == Role::leader) continue;
    if (!best || p.join_order < best->join_order) best = &p;
  }
  if (best) return best->id;
  return std::nullopt;
}

Json Session::participants_json() const {
  Json arr = Json::array();
  for (const auto& [id, p] : participants_) {
    arr.push_back({{"id", p.id},
                   {"display_name", p.display_name},
                   {"role", std::string(to_string(p.role))},
                   {"connected", p.connected},
                   {"joined_at", p.joined_at}});
  }
  return arr;
}

Json Session::snapshot_payload() const {
  Json p = {{"scene", geo::to_json(scene_)}, {"max_seq", max_seq()}, {"participants", participants_json()}};
  if (last_view_) p["last_view"] = geo::to_json(*last_view_);
  if (auto l = leader()) p["leader"] = *l;
  Json queue = Json::array();
  for (const auto& q : role_queue_) queue.push_back(q);
  p["role_queue"] = std::move(queue);
  return p;
}

JoinResult Session::join(std::string_view display_name) {
  if (display_name.empty() || utf8_length(display_name) > 64)
    throw Error(Errc::InvalidName, "display name must be 1..64 characters");
  if (connected_count() >= config_.max_participants)
    throw Error(Errc::SessionFull, "session '" + id_ + "' is full");

  Participant p;
  p.id = "p" + std::to_string(++join_counter_);
  p.display_name = std::string(display_name);
  p.role = connected_count() == 0 ? Role::leader : Role::follower;
  p.joined_at = clock_();
  p.connected = true;
  p.join_order = join_counter_;
  const std::string pid = p.id;
  const Role role = p.role;
  participants_.emplace(pid, std::move(p));

  JoinResult result;
  result.participant_id = pid;
  result.messages.push_back(sequence(MessageKind::participant_joined, std::string(protocol::kServerSender),
                                     {{"participant_id", pid},
                                      {"display_name", std::string(display_name)},
                                      {"role", std::string(to_string(role))}},
                                     Audience::all_except, pid));
  Json welcome = snapshot_payload();
  welcome["participant_id"] = pid;
  welcome["role"] = std::string(to_string(role));
  result.messages.push_back(Outbound{
      Audience::only, pid, make_envelope(MessageKind::welcome, std::string(protocol::kServerSender), std::move(welcome), false)});
  return result;
}

Outbox Session::submit_action(const std::string& pid, MessageKind kind, const Json& payload) {
  Participant& sender = connected_participant(pid);

  const bool allowed = protocol::is_leader_gated(kind) || kind == MessageKind::chat || kind == MessageKind::role_request;
  if (!allowed) throw Error(Errc::InvalidAction, std::string(protocol::to_string(kind)) + " cannot be submitted by a client");
  if (protocol::is_leader_gated(kind) && sender.role != Role::leader)
    throw Error(Errc::NotLeader, std::string(protocol::to_string(kind)) + " is reserved for the leader");

  if (kind == MessageKind::role_request) {
    if (sender.role == Role::leader) throw Error(Errc::AlreadyLeader, "the leader cannot request the leader role");
    if (std::find(role_queue_.begin(), role_queue_.end(), pid) != role_queue_.end()) return {};
    role_queue_.push_back(pid);
    Outbox out;
    out.push_back(sequence(kind, pid, {{"participant_id", pid}}));
    return out;
  }

  std::optional<geo::SceneState> next_scene;
  std::optional<geo::ViewState> next_view;
  try {
    protocol::validate_payload(kind, payload);
    if (protocol::is_scene_mutating(kind)) next_scene = geo::scene_apply(scene_, geo::parse_scene_action(kind, payload));
    if (kind == MessageKind::view_update) next_view = geo::view_from_json(payload, "payload");
  } catch (const Error& e) {
    throw Error(Errc::InvalidAction, e.what(), std::string(geocollab::to_string(e.code())));
  }

  if (next_scene) scene_ = std::move(*next_scene);
  if (next_view) last_view_ = std::move(next_view);
  Outbox out;
  out.push_back(sequence(kind, pid, payload));
  return out;
}

Outbox Session::submit_server(MessageKind kind, Json payload) {
  protocol::validate_payload(kind, payload);
  Outbox out;
  out.push_back(sequence(kind, std::string(protocol::kServerSender), std::move(payload)));
  return out;
}

Outbox Session::grant_role(const std::string& granter, const std::string& target) {
  require_leader(granter);
  auto it = participants_.find(target);
  if (it == participants_.end()) throw Error(Errc::UnknownParticipant, "no participant '" + target + "'");
  if (target == granter) throw Error(Errc::InvalidAction, "cannot grant the leader role to oneself");
  if (!it->second.connected) throw Error(Errc::TargetDisconnected, "participant '" + target + "' is disconnected");

  participants_.at(granter).role = Role::follower;
  it->second.role = Role::leader;
  std::erase(role_queue_, target);
  Outbox out;
  out.push_back(sequence(MessageKind::leader_changed, std::string(protocol::kServerSender),
                         {{"leader", target}, {"previous", granter}, {"reason", "grant"}}));
  return out;
}

Outbox Session::deny_role(const std::string& leader_pid, const std::string& target) {
  require_leader(leader_pid);
  auto it = std::find(role_queue_.begin(), role_queue_.end(), target);
  if (it == role_queue_.end()) throw Error(Errc::NotQueued, "participant '" + target + "' has no pending request");
  role_queue_.erase(it);
  Outbox out;
  out.push_back(Outbound{Audience::only, target,
                         make_envelope(MessageKind::role_deny, leader_pid, {{"target", target}}, false)});
  return out;
}

Outbox Session::handle_disconnect(const std::string& pid) {
  auto it = participants_.find(pid);
  if (it == participants_.end()) throw Error(Errc::UnknownParticipant, "no participant '" + pid + "'");
  Participant& p = it->second;
  if (!p.connected) return {};

  const bool was_leader = p.role == Role::leader;
  p.connected = false;
  p.role = Role::follower;
  p.disconnected_at = clock_();
  std::erase(role_queue_, pid);

  Outbox out;
  out.push_back(sequence(MessageKind::participant_left, std::string(protocol::kServerSender), {{"participant_id", pid}}));
  if (was_leader) {
    if (auto next = successor()) {
      participants_.at(*next).role = Role::leader;
      std::erase(role_queue_, *next);
      out.push_back(sequence(MessageKind::leader_changed, std::string(protocol::kServerSender),
                             {{"leader", *next}, {"previous", pid}, {"reason", "disconnect"}}));
    }
  }
  return out;
}

Outbox Session::batches(const std::string& pid, std::vector<Envelope> entries) const {
  // Headroom for the replay_batch envelope around the entries.
  constexpr std::size_t kBudget = protocol::kMaxMessageBytes - 1024;
  Outbox out;
  Json current = Json::array();
  std::size_t used = 0;
  auto flush = [&](bool final) {
    Envelope env;
    env.kind = MessageKind::replay_batch;
    env.session = id_;
    env.sender = std::string(protocol::kServerSender);
    env.ts = clock_();
    env.payload = {{"entries", std::move(current)}, {"final", final}};
    out.push_back(Outbound{Audience::only, pid, std::move(env)});
    current = Json::array();
    used = 0;
  };
  for (const auto& e : entries) {
    Json j = protocol::envelope_to_json(e);
    const std::size_t sz = j.dump().size() + 1;
    if (sz > kBudget) throw Error(Errc::OversizeMessage, "replay entry too large for a batch");
    if (used + sz > kBudget) flush(false);
    current.push_back(std::move(j));
    used += sz;
  }
  flush(true);
  return out;
}

ReplayResult Session::replay_since(const std::string& pid, std::uint64_t last_seq) {
  auto it = participants_.find(pid);
  if (it == participants_.end()) throw Error(Errc::UnknownParticipant, "no participant '" + pid + "'");

  ReplayResult result;
  std::optional<std::vector<Envelope>> missed;
  if (last_seq <= max_seq()) missed = replay_.since(last_seq);
  if (missed) {
    try {
      result.messages = batches(pid, *missed);
      result.missed = std::move(*missed);
    } catch (const Error&) {
      missed.reset();
    }
  }
  if (!missed) {
    result.snapshot = true;
    result.messages.push_back(Outbound{Audience::only, pid,
                                       make_envelope(MessageKind::snapshot, std::string(protocol::kServerSender),
                                                     snapshot_payload(), false)});
  }

  Participant& p = it->second;
  if (!p.connected) {
    if (connected_count() >= config_.max_participants) throw Error(Errc::SessionFull, "session '" + id_ + "' is full");
    p.connected = true;
    p.role = connected_count() == 1 ? Role::leader : Role::follower;
    result.messages.push_back(sequence(MessageKind::participant_joined, std::string(protocol::kServerSender),
                                       {{"participant_id", pid},
                                        {"display_name", p.display_name},
                                        {"role", std::string(to_string(p.role))},
                                        {"rejoin", true}}));
    if (p.role == Role::leader)
      result.messages.push_back(sequence(MessageKind::leader_changed, std::string(protocol::kServerSender),
                                         {{"leader", pid}, {"reason", "vacancy"}}));
  }
  return result;
}

std::size_t Session::purge_expired(std::int64_t now_ms) {
  return std::erase_if(participants_, [&](const auto& kv) {
    const Participant& p = kv.second;
    return !p.connected && p.disconnected_at + config_.retention_ms <= now_ms;
  });
}

}  // namespace geocollab::session
